"""Exceptions raised by the Liénard periodic-orbit toolkit."""

from __future__ import annotations


class LienardError(Exception):
    """Base exception for the toolkit."""

    pass


class ValidationError(LienardError):
    """Exception raised for invalid inputs or definitions."""

    pass


class NumericalError(LienardError):
    """Exception raised when a numerical procedure fails."""

    pass


class InvalidFunction(ValidationError):
    """Exception raised when a function evaluates to a non-finite value."""

    pass


class FrameError(ValidationError):
    """Exception raised for an unknown coordinate frame tag."""

    pass


class ScenarioError(ValidationError):
    """Exception raised when a scenario or system document is malformed."""

    def __init__(self, message: str, path: list[str] | None = None) -> None:
        """Initialize with the offending key path."""
        super().__init__(message)
        self.path = path or []


class StepSizeUnderflow(NumericalError):
    """Exception raised when the step size collapses (stiffness or blow-up)."""

    pass


class NonFiniteState(NumericalError):
    """Exception raised when the integrated state becomes non-finite."""

    pass


class NoCrossing(NumericalError):
    """Exception raised when no section crossing occurs before max_time."""

    pass


class SingularShooting(NumericalError):
    """Exception raised when the return-map derivative is too close to 1."""

    pass


class NoReturn(NumericalError):
    """Exception raised when the orbit never returns to the section."""

    pass


class Diverged(NumericalError):
    """Exception raised when Newton shooting exhausts its iterations."""

    pass


class OrbitOutsideS(NumericalError):
    """Exception raised when the orbit does not fit inside the disk S."""

    pass


class MultiplierMismatch(NumericalError):
    """Exception raised when monodromy eigenvalues disagree with {1, W(tau0)}."""

    pass


class SimpleMultiplierViolation(NumericalError):
    """Exception raised when 1 is not a simple characteristic multiplier."""

    pass


class DegenerateAmplitude(NumericalError):
    """Exception raised when g(a) vanishes."""

    pass


class NewtonDiverged(NumericalError):
    """Exception raised when the perturbed Newton iteration does not converge."""

    pass


class SingularJacobian(NumericalError):
    """Exception raised when the perturbed Newton Jacobian is ill-conditioned."""

    pass


class NonPeriodicForcing(NumericalError):
    """Exception raised when a forcing is not periodic with the orbit period."""

    pass


class MonotonicityViolation(NumericalError):
    """Exception raised when a Lyapunov function increases along a trajectory."""

    pass
