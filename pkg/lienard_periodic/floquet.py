"""Fundamental matrix, multipliers and the Jacobi matrix along the limit cycle.

The variational system is integrated in the farkas frame around
p(t) = (-u0' - F(u0), u0), where its matrix is [[0, g'(x2)], [-1, -f(x2)]].
With u0'(0) = 0 the monodromy matrix is upper triangular,
Y(tau0) = [[1, Y12], [0, rho2]], and J = -I + diag(g(a), 0) + Y(tau0).
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import cumulative_simpson

from .const import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    DEGENERATE_AMPLITUDE_TOL,
    LIOUVILLE_TOL,
    MULTIPLIER_REL_TOL,
    SIMPLE_MULTIPLIER_TOL,
    TRIANGULAR_TOL,
)
from .exceptions import (
    DegenerateAmplitude,
    MultiplierMismatch,
    SimpleMultiplierViolation,
)
from .limit_cycle import PeriodicOrbit
from .ode import VariationalTrajectory, integrate_with_variational
from .system import Frame, LienardSystem, field_function, jacobian_function

_LOGGER = logging.getLogger(__name__)

# quadrature grid refinement relative to the report grid
QUADRATURE_REFINEMENT = 16
# multipliers below this size are matched with an absolute error of
# MULTIPLIER_REL_TOL * MULTIPLIER_FLOOR
MULTIPLIER_FLOOR = 1e-3
FLOQUET_CSV_HEADER = ("t", "Y11", "Y12", "Y21", "Y22", "W")


@dataclass(frozen=True)
class JacobiData:
    """Jacobi matrix J(tau0) with its inverse and norms."""

    g_a: float
    J: NDArray[np.float64]
    J_inv: NDArray[np.float64]
    J_inv_norm: float
    J_inv_spectral_norm: float
    det_J: float
    v_tau0: float
    printed_J_inv: NDArray[np.float64]
    printed_discrepancy: float
    triangular: bool


@dataclass(frozen=True)
class FloquetData:
    """Floquet quantities of the variational system along u0.

    Multiplier and Jacobi fields are filled by ``floquet_analysis``.
    """

    a: float
    tau0: float
    times: NDArray[np.float64] = field(repr=False)
    Y: NDArray[np.float64] = field(repr=False)
    W: NDArray[np.float64] = field(repr=False)
    damping_integral: float
    liouville_residual: float
    trivial_residual: float
    tracking_residual: float
    variational: VariationalTrajectory | None = field(default=None, repr=False)
    rho1: float | None = None
    rho2: float | None = None
    condition10: bool | None = None
    eigenvalues: tuple[complex, complex] | None = None
    exponent: float | None = None
    jacobi: JacobiData | None = None

    @property
    def Y_tau0(self) -> NDArray[np.float64]:
        """Monodromy matrix Y(tau0)."""
        return np.array(self.Y[-1], copy=True)

    @property
    def W_tau0(self) -> float:
        """Wronskian at tau0."""
        return float(self.W[-1])

    @property
    def J(self) -> NDArray[np.float64] | None:
        """Jacobi matrix, when computed."""
        return None if self.jacobi is None else self.jacobi.J

    @property
    def J_inv(self) -> NDArray[np.float64] | None:
        """Inverse Jacobi matrix, when computed."""
        return None if self.jacobi is None else self.jacobi.J_inv

    @property
    def J_inv_norm(self) -> float | None:
        """2 * max-entry norm of J^-1, when computed."""
        return None if self.jacobi is None else self.jacobi.J_inv_norm

    @property
    def v_tau0(self) -> float | None:
        """v(tau0) recovered from Y12(tau0) / g(a)^2, when computed."""
        return None if self.jacobi is None else self.jacobi.v_tau0

    def checks(self) -> dict[str, Any]:
        """Invariant residuals and their pass/fail status."""
        checks: dict[str, Any] = {
            "liouville_residual": self.liouville_residual,
            "liouville_ok": self.liouville_residual < LIOUVILLE_TOL,
            "trivial_eigenvector_residual": self.trivial_residual,
            "trivial_eigenvector_ok": self.trivial_residual < TRIANGULAR_TOL,
            "trivial_tracking_residual": self.tracking_residual,
        }
        if self.rho1 is not None and self.rho2 is not None:
            checks["multiplier_product_residual"] = abs(
                self.rho1 * self.rho2 - float(np.linalg.det(self.Y_tau0))
            )
        if self.jacobi is not None:
            identity = self.jacobi.J @ self.jacobi.J_inv
            checks["inverse_residual"] = float(np.max(np.abs(identity - np.eye(2))))
            checks["triangular"] = self.jacobi.triangular
        return checks


def matrix_max_norm(matrix: NDArray[np.float64]) -> float:
    """Norm 2 * max |m_ij| used by every certificate constant."""
    return 2.0 * float(np.max(np.abs(matrix)))


def adjugate(matrix: NDArray[np.float64]) -> NDArray[np.float64]:
    """Adjugate of a 2x2 matrix (or a stack of them)."""
    result = np.empty_like(matrix)
    result[..., 0, 0] = matrix[..., 1, 1]
    result[..., 0, 1] = -matrix[..., 0, 1]
    result[..., 1, 0] = -matrix[..., 1, 0]
    result[..., 1, 1] = matrix[..., 0, 0]
    return result


def variational_along_orbit(
    system: LienardSystem,
    orbit: PeriodicOrbit,
    t_end: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> VariationalTrajectory:
    """Integrate p and Y from p(0) = (-F(a), a), Y(0) = I to ``t_end``.

    Negative ``t_end`` integrates backward in time.
    """
    p0 = np.array([-float(system.F(orbit.a)), orbit.a])
    return integrate_with_variational(
        field_function(system, Frame.FARKAS),
        jacobian_function(system, Frame.FARKAS),
        p0,
        0.0,
        t_end,
        rtol,
        atol,
    )


def wronskian(
    system: LienardSystem, orbit: PeriodicOrbit, times: NDArray[np.float64]
) -> tuple[NDArray[np.float64], float]:
    """W(t) = exp(-int_0^t f(u0)) on a uniform grid starting at 0.

    Returns the Wronskian on ``times`` and the damping integral up to
    ``times[-1]``.
    """
    n = len(times)
    fine = np.linspace(times[0], times[-1], QUADRATURE_REFINEMENT * (n - 1) + 1)
    u = orbit.trajectory.sample(fine)[:, 0]
    integral = cumulative_simpson(system.f(u), x=fine, initial=0.0)
    coarse = integral[::QUADRATURE_REFINEMENT]
    return np.exp(-coarse), float(integral[-1])


def fundamental_matrix(
    system: LienardSystem,
    orbit: PeriodicOrbit,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> FloquetData:
    """Fundamental matrix Y and Wronskian W on the orbit's sample grid.

    det Y is cross-checked against W (Liouville); a deviation above 1e-7 is
    logged, not raised.
    """
    variational = variational_along_orbit(system, orbit, orbit.tau0, rtol, atol)
    times = orbit.times
    Y = np.array([variational.fundamental(float(t)) for t in times])
    W, damping = wronskian(system, orbit, times)
    liouville = float(np.max(np.abs(np.linalg.det(Y) - W)))
    if liouville >= LIOUVILLE_TOL:
        _LOGGER.warning("Liouville check off by %.3e (det Y vs W)", liouville)

    states = orbit.states
    p_dot = np.column_stack((system.g(states[:, 0]), states[:, 1]))
    p_dot0 = p_dot[0]
    scale = float(np.linalg.norm(p_dot0))
    tracked = np.einsum("nij,j->ni", Y, p_dot0)
    tracking = float(np.max(np.linalg.norm(tracked - p_dot, axis=1)) / scale)
    trivial = float(np.linalg.norm(Y[-1] @ p_dot0 - p_dot0) / scale)
    _LOGGER.debug(
        "Fundamental matrix: damping=%.12g liouville=%.2e trivial=%.2e",
        damping,
        liouville,
        trivial,
    )
    return FloquetData(
        a=orbit.a,
        tau0=orbit.tau0,
        times=times,
        Y=Y,
        W=W,
        damping_integral=damping,
        liouville_residual=liouville,
        trivial_residual=trivial,
        tracking_residual=tracking,
        variational=variational,
    )


def _match(eigenvalues: NDArray[np.complex128], targets: tuple[float, float]) -> float:
    """Worst relative error of the best pairing of eigenvalues with targets."""

    def rel(value: complex, target: float) -> float:
        return abs(value - target) / max(abs(target), MULTIPLIER_FLOOR)

    direct = max(rel(eigenvalues[0], targets[0]), rel(eigenvalues[1], targets[1]))
    swapped = max(rel(eigenvalues[1], targets[0]), rel(eigenvalues[0], targets[1]))
    return min(direct, swapped)


def multipliers(fd: FloquetData, orbit: PeriodicOrbit) -> tuple[float, float, bool]:
    """Characteristic multipliers and the stability condition.

    rho1 is the trivial multiplier 1 and rho2 = W(tau0); condition10 holds when
    the damping integral over one period is positive.

    Raises:
        MultiplierMismatch: If eig(Y(tau0)) differs from {1, rho2} by more
            than 1e-5 relative to max(|target|, 1e-3), so by more than 1e-8
            absolute once rho2 drops below 1e-3.

    """
    rho1 = 1.0
    rho2 = math.exp(-fd.damping_integral)
    eigenvalues = np.linalg.eigvals(fd.Y_tau0)
    mismatch = _match(eigenvalues, (rho1, rho2))
    if mismatch > MULTIPLIER_REL_TOL:
        raise MultiplierMismatch(
            f"eig(Y(tau0)) = {eigenvalues.tolist()} but expected {{1, {rho2:.12g}}} "
            f"(relative error {mismatch:.2e}) for the orbit with a={orbit.a:.12g}"
        )
    condition10 = fd.damping_integral > 0
    _LOGGER.debug("Multipliers: rho2=%.12g condition10=%s", rho2, condition10)
    return rho1, rho2, condition10


def assemble_jacobi(g_a: float, Y_tau0: NDArray[np.float64], rho2: float) -> JacobiData:
    """Build J = -I + diag(g(a), 0) + Y(tau0) and invert it exactly.

    Raises:
        DegenerateAmplitude: If |g(a)| < 1e-12.
        SimpleMultiplierViolation: If |1 - rho2| < 1e-8.

    """
    if abs(g_a) < DEGENERATE_AMPLITUDE_TOL:
        raise DegenerateAmplitude(f"g(a) = {g_a!r} vanishes")
    if abs(1.0 - rho2) < SIMPLE_MULTIPLIER_TOL:
        raise SimpleMultiplierViolation(
            f"rho2 = {rho2!r} is within {SIMPLE_MULTIPLIER_TOL} of 1"
        )

    Y = np.asarray(Y_tau0, dtype=float)
    J = -np.eye(2) + np.diag([g_a, 0.0]) + Y
    det_J = float(J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0])
    if det_J == 0.0:
        raise SimpleMultiplierViolation("Jacobi matrix is singular")
    J_inv = adjugate(J) / det_J

    v_tau0 = float(Y[0, 1]) / (g_a * g_a)
    printed = np.array(
        [[1.0 / g_a, g_a * g_a * v_tau0 / (1.0 - rho2)], [0.0, -1.0 / (1.0 - rho2)]]
    )
    discrepancy = float(np.max(np.abs(printed - J_inv)))
    if discrepancy > 1e-8 * max(1.0, float(np.max(np.abs(J_inv)))):
        _LOGGER.warning(
            "Closed-form J^-1 off-diagonal %.12g differs from exact inverse %.12g",
            printed[0, 1],
            J_inv[0, 1],
        )

    J_inv_norm = 2.0 * max(abs(1.0 / g_a), abs(1.0 / (1.0 - rho2)), abs(float(J_inv[0, 1])))
    triangular = abs(float(Y[1, 0])) < TRIANGULAR_TOL and abs(float(Y[0, 0]) - 1.0) < TRIANGULAR_TOL
    if not triangular:
        _LOGGER.warning(
            "Monodromy matrix is not upper triangular: Y11=%.3e Y21=%.3e", Y[0, 0], Y[1, 0]
        )
    return JacobiData(
        g_a=g_a,
        J=J,
        J_inv=J_inv,
        J_inv_norm=J_inv_norm,
        J_inv_spectral_norm=float(np.linalg.norm(J_inv, 2)),
        det_J=det_J,
        v_tau0=v_tau0,
        printed_J_inv=printed,
        printed_discrepancy=discrepancy,
        triangular=triangular,
    )


def jacobi_matrix(fd: FloquetData, orbit: PeriodicOrbit, system: LienardSystem) -> JacobiData:
    """Jacobi matrix of the shooting problem at the cycle.

    Raises:
        DegenerateAmplitude: If g(a) vanishes.
        SimpleMultiplierViolation: If 1 is not a simple multiplier.

    """
    rho2 = fd.rho2 if fd.rho2 is not None else math.exp(-fd.damping_integral)
    return assemble_jacobi(float(system.g(orbit.a)), fd.Y_tau0, rho2)


def floquet_analysis(
    system: LienardSystem,
    orbit: PeriodicOrbit,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> FloquetData:
    """Run fundamental_matrix, multipliers and jacobi_matrix in sequence."""
    fd = fundamental_matrix(system, orbit, rtol, atol)
    rho1, rho2, condition10 = multipliers(fd, orbit)
    fd = dataclasses.replace(
        fd,
        rho1=rho1,
        rho2=rho2,
        condition10=condition10,
        eigenvalues=tuple(complex(v) for v in np.linalg.eigvals(fd.Y_tau0)),  # type: ignore[arg-type]
        exponent=math.log(rho2) / orbit.tau0,
    )
    fd = dataclasses.replace(fd, jacobi=jacobi_matrix(fd, orbit, system))
    _LOGGER.info(
        "Floquet: rho2=%.12g damping=%.12g condition10=%s ||J^-1||=%.6g",
        rho2,
        fd.damping_integral,
        condition10,
        fd.J_inv_norm,
    )
    return fd


def inverse_path(fd: FloquetData) -> tuple[NDArray[np.float64], float]:
    """Y^-1(t) = adj(Y(t)) / W(t) on the sample grid.

    Returns the inverses and the max deviation from direct inversion.
    """
    inverse = adjugate(fd.Y) / fd.W[:, None, None]
    direct = np.linalg.inv(fd.Y)
    return inverse, float(np.max(np.abs(inverse - direct)))


def floquet_report(fd: FloquetData) -> dict[str, Any]:
    """JSON-ready Floquet report."""
    report: dict[str, Any] = {
        "a": fd.a,
        "tau0": fd.tau0,
        "rho1": fd.rho1,
        "rho2": fd.rho2,
        "damping_integral": fd.damping_integral,
        "condition10": fd.condition10,
        "exponent": fd.exponent,
        "Y_tau0": fd.Y_tau0,
        "checks": fd.checks(),
    }
    if fd.eigenvalues is not None:
        report["eigenvalues"] = [[v.real, v.imag] for v in fd.eigenvalues]
    if fd.jacobi is not None:
        report.update(
            {
                "J": fd.jacobi.J,
                "J_inv": fd.jacobi.J_inv,
                "J_inv_norm": fd.jacobi.J_inv_norm,
                "J_inv_spectral_norm": fd.jacobi.J_inv_spectral_norm,
                "det_J": fd.jacobi.det_J,
                "v_tau0": fd.jacobi.v_tau0,
                "printed_J_inv": fd.jacobi.printed_J_inv,
                "printed_discrepancy": fd.jacobi.printed_discrepancy,
            }
        )
    return report


def floquet_rows(fd: FloquetData) -> list[tuple[float, ...]]:
    """Rows (t, Y11, Y12, Y21, Y22, W) on the quadrature grid."""
    return [
        (float(t), float(y[0, 0]), float(y[0, 1]), float(y[1, 0]), float(y[1, 1]), float(w))
        for t, y, w in zip(fd.times, fd.Y, fd.W, strict=True)
    ]
