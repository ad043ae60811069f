"""Periodic solutions of the perturbed system by two-unknown Newton shooting.

Unknowns are the period tau and the amplitude shift h; the solution starts at
(a + h, 0) and the perturbation is evaluated at gamma((t + phi) / tau, u, u').
"""

from __future__ import annotations

import functools
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .const import (
    EPSILON_CAP,
    PERTURBED_ATOL,
    PERTURBED_FD_STEP,
    PERTURBED_MAX_CONDITION,
    PERTURBED_MAX_HALVINGS,
    PERTURBED_MAX_ITERATIONS,
    PERTURBED_RESIDUAL_TOL,
    PERTURBED_RTOL,
    PERTURBED_STEP_TOL,
)
from .exceptions import (
    NewtonDiverged,
    NonFiniteState,
    NumericalError,
    SingularJacobian,
    StepSizeUnderflow,
    ValidationError,
)
from .floquet import FloquetData, jacobi_matrix
from .functions import Perturbation, PerturbationKind
from .limit_cycle import PeriodicOrbit
from .ode import Trajectory, integrate
from .parallel import ordered_map
from .system import Frame, LienardSystem, field_function

_LOGGER = logging.getLogger(__name__)

SWEEP_CSV_HEADER = ("epsilon", "phi", "tau", "h", "residual", "iterations", "status")
SOLUTION_CSV_HEADER = ("t", "u", "udot")
STATUS_CONVERGED = "converged"

# samples compared when re-integrating a second period
_PERIODICITY_SAMPLES = 64


@dataclass(frozen=True)
class PerturbedSolution:
    """Periodic solution of the perturbed system found by Newton shooting."""

    epsilon: float
    phi: float
    tau: float
    h: float
    a: float
    tau0: float
    residual: float
    newton_iterations: int
    trajectory: Trajectory = field(repr=False)
    system: LienardSystem = field(repr=False)

    @property
    def initial_state(self) -> NDArray[np.float64]:
        """(a + h, 0)."""
        return np.array([self.a + self.h, 0.0])

    def evaluate(self, t: float) -> NDArray[np.float64]:
        """State at ``t``, wrapped modulo tau."""
        return self.trajectory(float(np.mod(t, self.tau)))


@dataclass(frozen=True)
class SweepRow:
    """One continuation step; failed rows carry the error class as status."""

    epsilon: float
    phi: float
    tau: float
    h: float
    residual: float
    iterations: int
    status: str

    @property
    def converged(self) -> bool:
        """True for a successful solve."""
        return self.status == STATUS_CONVERGED

    def as_row(self) -> tuple[Any, ...]:
        """Row matching SWEEP_CSV_HEADER."""
        return (
            float(self.epsilon),
            float(self.phi),
            float(self.tau),
            float(self.h),
            float(self.residual),
            self.iterations,
            self.status,
        )

    @classmethod
    def from_solution(cls, solution: PerturbedSolution) -> SweepRow:
        """Row for a converged solve."""
        return cls(
            epsilon=solution.epsilon,
            phi=solution.phi,
            tau=solution.tau,
            h=solution.h,
            residual=solution.residual,
            iterations=solution.newton_iterations,
            status=STATUS_CONVERGED,
        )


@dataclass(frozen=True)
class AutonomousReport:
    """Solves of an autonomous perturbation at several phases."""

    epsilon: float
    solutions: tuple[PerturbedSolution, ...]
    tau_spread: float
    h_spread: float


def _system_for(system: LienardSystem, epsilon: float, tau: float) -> LienardSystem:
    if epsilon == 0.0 or system.perturbation is None:
        return LienardSystem(f=system.f, g=system.g, tau=tau)
    return system.with_perturbation(system.perturbation, epsilon, tau)


class _Shooting:
    """Residual map (tau, h) -> flow_tau(a + h, 0) - (a + h, 0)."""

    def __init__(
        self,
        system: LienardSystem,
        a: float,
        epsilon: float,
        phi: float,
        rtol: float,
        atol: float,
    ) -> None:
        self.system = system
        self.a = a
        self.epsilon = epsilon
        self.phi = phi
        self.rtol = rtol
        self.atol = atol

    def flow(self, tau: float, h: float) -> Trajectory:
        if not tau > 0:
            raise NewtonDiverged(f"Period left the positive axis (tau={tau!r})")
        perturbed = _system_for(self.system, self.epsilon, tau)
        return integrate(
            field_function(perturbed, Frame.UV, self.phi),
            [self.a + h, 0.0],
            0.0,
            tau,
            self.rtol,
            self.atol,
        )

    def residual(self, tau: float, h: float) -> NDArray[np.float64]:
        final = self.flow(tau, h).final_state
        return final - np.array([self.a + h, 0.0])

    def jacobian(
        self, tau: float, h: float, base: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        d_tau = PERTURBED_FD_STEP * max(1.0, abs(tau))
        d_h = PERTURBED_FD_STEP * max(1.0, abs(self.a))
        column_tau = (self.residual(tau + d_tau, h) - base) / d_tau
        column_h = (self.residual(tau, h + d_h) - base) / d_h
        return np.column_stack((column_tau, column_h))


def _check_inputs(
    system: LienardSystem,
    orbit0: PeriodicOrbit,
    fd: FloquetData,
    epsilon: float,
) -> None:
    if not abs(epsilon) < EPSILON_CAP:
        raise ValueError(f"|epsilon| must be below {EPSILON_CAP}, got {epsilon!r}")
    if epsilon != 0.0 and system.perturbation is None:
        raise ValidationError("A non-zero epsilon needs a perturbation")
    jacobi = fd.jacobi or jacobi_matrix(fd, orbit0, system)
    if jacobi.det_J == 0.0:
        raise SingularJacobian("det J vanishes at the unperturbed cycle")


def solve_perturbed(
    system: LienardSystem,
    orbit0: PeriodicOrbit,
    fd: FloquetData,
    epsilon: float,
    phi: float = 0.0,
    tau_guess: float | None = None,
    h_guess: float = 0.0,
    rtol: float = PERTURBED_RTOL,
    atol: float = PERTURBED_ATOL,
) -> PerturbedSolution:
    """Find (tau, h) such that the solution from (a + h, 0) closes after tau.

    Args:
        system: System carrying the perturbation gamma (its epsilon and tau
            are replaced by the arguments).
        orbit0: Unperturbed limit cycle.
        fd: Floquet data of the cycle; det J must not vanish.
        epsilon: Perturbation amplitude.
        phi: Phase shift of the perturbation argument.
        tau_guess: Starting period, tau0 by default.
        h_guess: Starting amplitude shift.
        rtol: Relative integration tolerance.
        atol: Absolute integration tolerance.

    Raises:
        ValueError: If |epsilon| reaches the cap.
        NewtonDiverged: If 25 iterations do not converge.
        SingularJacobian: If the Newton Jacobian has condition above 1e12.

    """
    _check_inputs(system, orbit0, fd, epsilon)
    shooting = _Shooting(system, orbit0.a, epsilon, phi, rtol, atol)
    tau = orbit0.tau0 if tau_guess is None else float(tau_guess)
    h = float(h_guess)

    base = shooting.residual(tau, h)
    norm = float(np.linalg.norm(base))
    for iteration in range(PERTURBED_MAX_ITERATIONS + 1):
        jac = shooting.jacobian(tau, h, base)
        condition = float(np.linalg.cond(jac))
        if not condition <= PERTURBED_MAX_CONDITION:
            raise SingularJacobian(
                f"Newton Jacobian condition {condition:.3e} at eps={epsilon!r}, phi={phi!r}"
            )
        step = -np.linalg.solve(jac, base)
        step_norm = float(np.linalg.norm(step))
        _LOGGER.debug(
            "Newton %d: tau=%.15g h=%.3e |R|=%.3e |step|=%.3e cond=%.2e",
            iteration,
            tau,
            h,
            norm,
            step_norm,
            condition,
        )
        if norm < PERTURBED_RESIDUAL_TOL and step_norm < PERTURBED_STEP_TOL:
            return _solution(shooting, tau, h, norm, iteration, orbit0)
        if iteration == PERTURBED_MAX_ITERATIONS:
            break

        damping = 1.0
        for _ in range(PERTURBED_MAX_HALVINGS + 1):
            trial_tau, trial_h = tau + damping * step[0], h + damping * step[1]
            try:
                trial = shooting.residual(trial_tau, trial_h)
                trial_norm = float(np.linalg.norm(trial))
            except (NonFiniteState, StepSizeUnderflow) as err:
                _LOGGER.debug("Trial step rejected: %s", err)
                trial, trial_norm = base, math.inf
            if trial_norm <= norm:
                break
            damping *= 0.5
        if not math.isfinite(trial_norm):
            break
        tau, h, base, norm = trial_tau, trial_h, trial, trial_norm

    raise NewtonDiverged(
        f"No convergence in {PERTURBED_MAX_ITERATIONS} iterations at eps={epsilon!r}, "
        f"phi={phi!r} (|R|={norm:.3e})"
    )


def _solution(
    shooting: _Shooting,
    tau: float,
    h: float,
    residual: float,
    iterations: int,
    orbit0: PeriodicOrbit,
) -> PerturbedSolution:
    trajectory = shooting.flow(tau, h)
    solution = PerturbedSolution(
        epsilon=shooting.epsilon,
        phi=shooting.phi,
        tau=tau,
        h=h,
        a=orbit0.a,
        tau0=orbit0.tau0,
        residual=residual,
        newton_iterations=iterations,
        trajectory=trajectory,
        system=_system_for(shooting.system, shooting.epsilon, tau),
    )
    _LOGGER.info(
        "Perturbed solution eps=%g phi=%g: tau=%.12g h=%.3e in %d iteration(s)",
        solution.epsilon,
        solution.phi,
        tau,
        h,
        iterations,
    )
    return solution


def check_periodicity(
    solution: PerturbedSolution,
    rtol: float = PERTURBED_RTOL,
    atol: float = PERTURBED_ATOL,
) -> float:
    """Re-integrate over [tau, 2 tau] and return the max deviation from period one."""
    tau = solution.tau
    second = integrate(
        field_function(solution.system, Frame.UV, solution.phi),
        solution.trajectory.final_state,
        tau,
        2 * tau,
        rtol,
        atol,
    )
    times = np.linspace(0.0, tau, _PERIODICITY_SAMPLES)
    first = solution.trajectory.sample(times)
    repeat = second.sample(times + tau)
    return float(np.max(np.abs(repeat - first)))


def sweep_epsilon(
    system: LienardSystem,
    orbit0: PeriodicOrbit,
    fd: FloquetData,
    gamma: Perturbation,
    eps_grid: Sequence[float],
    phi: float = 0.0,
    rtol: float = PERTURBED_RTOL,
    atol: float = PERTURBED_ATOL,
) -> list[SweepRow]:
    """Continuation in epsilon, warm-starting each solve from the previous one.

    The first failure is recorded as a row whose status names the error and
    ends the sweep.

    Raises:
        ValueError: If the grid is empty, unsorted or does not start at 0.

    """
    grid = [float(eps) for eps in eps_grid]
    if not grid or grid[0] != 0.0:
        raise ValueError("eps_grid must start at 0")
    if any(abs(b) < abs(a) for a, b in zip(grid, grid[1:], strict=False)):
        raise ValueError("eps_grid must be sorted by |epsilon|")

    forced = system.with_perturbation(gamma, 0.0)
    rows: list[SweepRow] = []
    tau_guess, h_guess = orbit0.tau0, 0.0
    for epsilon in grid:
        try:
            solution = solve_perturbed(
                forced, orbit0, fd, epsilon, phi, tau_guess, h_guess, rtol, atol
            )
        except (NumericalError, ValueError) as err:
            _LOGGER.warning(
                "Sweep stopped at eps=%g, phi=%g: %s", epsilon, phi, type(err).__name__
            )
            rows.append(
                SweepRow(
                    epsilon=epsilon,
                    phi=phi,
                    tau=math.nan,
                    h=math.nan,
                    residual=math.nan,
                    iterations=0,
                    status=type(err).__name__,
                )
            )
            break
        rows.append(SweepRow.from_solution(solution))
        tau_guess, h_guess = solution.tau, solution.h
    return rows


def _sweep_at_phase(
    phi: float,
    system: LienardSystem,
    orbit0: PeriodicOrbit,
    fd: FloquetData,
    gamma: Perturbation,
    eps_grid: tuple[float, ...],
    rtol: float,
    atol: float,
) -> list[SweepRow]:
    return sweep_epsilon(system, orbit0, fd, gamma, eps_grid, phi, rtol, atol)


def sweep_phases(
    system: LienardSystem,
    orbit0: PeriodicOrbit,
    fd: FloquetData,
    gamma: Perturbation,
    eps_grid: Sequence[float],
    phis: Sequence[float],
    jobs: int = 1,
    rtol: float = PERTURBED_RTOL,
    atol: float = PERTURBED_ATOL,
) -> list[SweepRow]:
    """Run one continuation per phase; rows ordered by phase index then epsilon."""
    task = functools.partial(
        _sweep_at_phase,
        system=system,
        orbit0=orbit0,
        fd=fd,
        gamma=gamma,
        eps_grid=tuple(eps_grid),
        rtol=rtol,
        atol=atol,
    )
    tables = ordered_map(task, [float(phi) for phi in phis], jobs)
    return [row for table in tables for row in table]


def _solve_at_phase(
    phi: float,
    system: LienardSystem,
    orbit0: PeriodicOrbit,
    fd: FloquetData,
    epsilon: float,
    rtol: float,
    atol: float,
) -> PerturbedSolution:
    return solve_perturbed(system, orbit0, fd, epsilon, phi, rtol=rtol, atol=atol)


def solve_autonomous(
    system: LienardSystem,
    orbit0: PeriodicOrbit,
    fd: FloquetData,
    epsilon: float,
    phis: Sequence[float],
    jobs: int = 1,
    rtol: float = PERTURBED_RTOL,
    atol: float = PERTURBED_ATOL,
) -> AutonomousReport:
    """Solve an autonomous perturbation at several phases and measure the spread.

    For perturbations independent of time the period and amplitude shift
    depend on epsilon only, so both spreads should vanish.

    Raises:
        ValidationError: If the system's perturbation is not autonomous.

    """
    if system.perturbation is None or system.perturbation.kind is not PerturbationKind.AUTONOMOUS:
        raise ValidationError("solve_autonomous needs an autonomous perturbation")
    if not phis:
        raise ValueError("phis must not be empty")
    task = functools.partial(
        _solve_at_phase,
        system=system,
        orbit0=orbit0,
        fd=fd,
        epsilon=epsilon,
        rtol=rtol,
        atol=atol,
    )
    solutions = tuple(ordered_map(task, [float(phi) for phi in phis], jobs))
    taus = [s.tau for s in solutions]
    hs = [s.h for s in solutions]
    report = AutonomousReport(
        epsilon=epsilon,
        solutions=solutions,
        tau_spread=max(taus) - min(taus),
        h_spread=max(hs) - min(hs),
    )
    _LOGGER.info(
        "Autonomous solve eps=%g over %d phases: tau spread %.2e, h spread %.2e",
        epsilon,
        len(solutions),
        report.tau_spread,
        report.h_spread,
    )
    return report


def solution_rows(solution: PerturbedSolution, n: int = 512) -> list[tuple[float, float, float]]:
    """Rows (t, u, udot) on n uniform samples of one period."""
    times = np.linspace(0.0, solution.tau, n)
    states = solution.trajectory.sample(times)
    return [
        (float(t), float(state[0]), float(state[1]))
        for t, state in zip(times, states, strict=True)
    ]
