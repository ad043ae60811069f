"""Moser-type perturbation of the Duffing oscillator without periodic solutions.

The equation is x'' + x + x^3 + eps f(t, x, x') = 0 with

    f(t, x, y) = (2 + cos 2 pi t) q(x, y),   q = x^2 y^3 on {xy > 0}, else 0.

V = 2x^2 + x^4 + 2x'^2 satisfies V' = -4 eps x' f, which is never positive
and strictly negative inside the open quadrants {xy > 0}. A trajectory that
ever enters a quadrant loses V for good and cannot close up.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .const import (
    DEFAULT_MOSER_T_FINAL,
    DEFAULT_MOSER_TRAJECTORIES,
    DEFAULT_SEED,
    MOSER_ATOL,
    MOSER_CHECK_SAMPLES,
    MOSER_FD_STEP,
    MOSER_MAX_EPSILON,
    MOSER_MIN_PERIODS,
    MOSER_MONOTONE_TOL,
    MOSER_PERIOD,
    MOSER_RATE_GAP_TOL,
    MOSER_RTOL,
    MOSER_SCAN_SAMPLES,
    MOSER_STRICT_DECAY,
)
from .exceptions import MonotonicityViolation
from .ode import Trajectory, integrate
from .parallel import ordered_map

_LOGGER = logging.getLogger(__name__)

CHECK_PERIODIC = "periodic_in_t"
CHECK_VANISHES_OFF_QUADRANTS = "vanishes_off_quadrants"
CHECK_INCREASING_IN_Y = "increasing_in_y"
CHECK_SIGN_CONDITION = "sign_condition"
CHECK_ORIGIN = "vanishes_at_origin"
CHECK_SUPERLINEAR = "superlinear_restoring_force"

SCAN_CSV_HEADER = (
    "index",
    "x0",
    "y0",
    "V_initial",
    "V_final",
    "max_upstep",
    "strict_decay",
    "time_in_quadrant",
    "rate_gap",
)


def quadrant_coupling(x: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
    """q(x, y): x^2 y^3 where xy > 0 and zero elsewhere."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    return np.where(xs * ys > 0, xs**2 * ys**3, 0.0)


def quadrant_coupling_dy(x: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
    """dq/dy: 3 x^2 y^2 where xy > 0 and zero elsewhere."""
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    return np.where(xs * ys > 0, 3.0 * xs**2 * ys**2, 0.0)


def _time_factor(t: ArrayLike) -> NDArray[np.float64]:
    return 2.0 + np.cos(2.0 * np.pi * np.asarray(t, dtype=float) / MOSER_PERIOD)


@dataclass(frozen=True)
class MoserSystem:
    """x'' + x + x^3 + eps f(t, x, x') = 0 with the quadrant coupling above.

    ``epsilon = 0`` gives the conservative Duffing oscillator; ``build_moser``
    restricts to the demonstration range and verifies the construction.
    """

    epsilon: float
    checks: dict[str, bool] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        """Reject negative or non-finite coupling strengths."""
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be finite and non-negative, got {self.epsilon!r}")

    def f(self, t: ArrayLike, x: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
        """Coupling term f(t, x, y)."""
        return _time_factor(t) * quadrant_coupling(x, y)

    def f_dy(self, t: ArrayLike, x: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
        """Partial derivative of f in y."""
        return _time_factor(t) * quadrant_coupling_dy(x, y)

    def phi(self, t: ArrayLike, x: ArrayLike, y: ArrayLike) -> NDArray[np.float64]:
        """Full restoring term x + x^3 + eps f."""
        xs = np.asarray(x, dtype=float)
        return xs + xs**3 + self.epsilon * self.f(t, xs, y)

    def rhs(self, t: float, state: NDArray[np.float64]) -> NDArray[np.float64]:
        """First-order field (x, y)' = (y, -phi(t, x, y))."""
        x, y = float(state[0]), float(state[1])
        return np.array([y, -float(self.phi(t, x, y))])

    @property
    def passed(self) -> bool:
        """True when every recorded construction check holds."""
        return all(self.checks.values())


def construction_checks(system: MoserSystem, n_samples: int, seed: int) -> dict[str, bool]:
    """Re-verify the coupling conditions on random (t, x, y) in [0,1] x [-1,1]^2."""
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 1.0, n_samples)
    x = rng.uniform(-1.0, 1.0, n_samples)
    y = rng.uniform(-1.0, 1.0, n_samples)
    values = system.f(t, x, y)
    inside = x * y > 0

    growth_x = np.logspace(0.0, 3.0, 64)
    growth = (growth_x + growth_x**3) / growth_x

    checks = {
        CHECK_PERIODIC: bool(np.array_equal(system.f(t + MOSER_PERIOD, x, y), values)),
        CHECK_VANISHES_OFF_QUADRANTS: bool(np.all(values[~inside] == 0.0)),
        CHECK_INCREASING_IN_Y: bool(np.all(system.f_dy(t[inside], x[inside], y[inside]) > 0)),
        CHECK_SIGN_CONDITION: bool(
            np.all(x[inside] * values[inside] > 0) and np.all(y[inside] * values[inside] > 0)
        ),
        CHECK_ORIGIN: float(system.f(0.0, 0.0, 0.0)) == 0.0,
        CHECK_SUPERLINEAR: bool(np.all(np.diff(growth) > 0) and growth[-1] > 1e5),
    }
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        _LOGGER.warning("Moser construction checks failed: %s", ", ".join(failed))
    return checks


def build_moser(epsilon: float, seed: int = DEFAULT_SEED) -> MoserSystem:
    """Concrete Moser system for 0 < epsilon <= 0.5 with verified construction.

    Raises:
        ValueError: If epsilon is outside (0, 0.5].

    """
    if not 0 < epsilon <= MOSER_MAX_EPSILON:
        raise ValueError(f"epsilon must lie in (0, {MOSER_MAX_EPSILON}], got {epsilon!r}")
    checks = construction_checks(MoserSystem(epsilon), MOSER_CHECK_SAMPLES, seed)
    return MoserSystem(epsilon=epsilon, checks=checks)


def lyapunov_V(x: ArrayLike, xdot: ArrayLike) -> NDArray[np.float64]:
    """V = 2x^2 + x^4 + 2 xdot^2."""
    xs = np.asarray(x, dtype=float)
    vs = np.asarray(xdot, dtype=float)
    return 2.0 * xs**2 + xs**4 + 2.0 * vs**2


def lyapunov_rate(
    system: MoserSystem, t: ArrayLike, x: ArrayLike, xdot: ArrayLike
) -> NDArray[np.float64]:
    """dV/dt along solutions: -4 eps xdot f(t, x, xdot)."""
    return -4.0 * system.epsilon * np.asarray(xdot, dtype=float) * system.f(t, x, xdot)


def rate_identity_gap(
    system: MoserSystem,
    trajectory: Trajectory,
    n_samples: int = MOSER_SCAN_SAMPLES,
    step: float = MOSER_FD_STEP,
) -> float:
    """Max |central-difference dV/dt - lyapunov_rate| on the dense output."""
    if trajectory.t1 - trajectory.t0 <= 2 * step:
        raise ValueError("Trajectory too short for the finite-difference oracle")
    times = np.linspace(trajectory.t0 + step, trajectory.t1 - step, n_samples)
    ahead = trajectory.sample(times + step)
    behind = trajectory.sample(times - step)
    centre = trajectory.sample(times)
    slope = (lyapunov_V(ahead[:, 0], ahead[:, 1]) - lyapunov_V(behind[:, 0], behind[:, 1])) / (
        2 * step
    )
    rate = lyapunov_rate(system, times, centre[:, 0], centre[:, 1])
    return float(np.max(np.abs(slope - rate)))


@dataclass(frozen=True)
class ScanTrajectory:
    """Lyapunov bookkeeping for one simulated start."""

    index: int
    start: tuple[float, float]
    V_initial: float
    V_final: float
    max_upstep: float
    max_drift: float
    strict_decay: bool
    time_in_quadrant: float
    rate_gap: float

    @property
    def decay(self) -> float:
        """V_initial - V_final."""
        return self.V_initial - self.V_final

    @property
    def enters_quadrant(self) -> bool:
        """True if the trajectory spends time in {x x' > 0}."""
        return self.time_in_quadrant > 0

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready view."""
        return {
            "index": self.index,
            "start": list(self.start),
            "V_initial": self.V_initial,
            "V_final": self.V_final,
            "decay": self.decay,
            "max_upstep": self.max_upstep,
            "max_drift": self.max_drift,
            "strict_decay": self.strict_decay,
            "time_in_quadrant": self.time_in_quadrant,
            "rate_gap": self.rate_gap,
        }

    def as_row(self) -> tuple[Any, ...]:
        """CSV row matching ``SCAN_CSV_HEADER``."""
        return (
            self.index,
            self.start[0],
            self.start[1],
            self.V_initial,
            self.V_final,
            self.max_upstep,
            int(self.strict_decay),
            self.time_in_quadrant,
            self.rate_gap,
        )


@dataclass(frozen=True)
class ScanReport:
    """Outcome of a non-existence scan, ordered by trajectory index."""

    epsilon: float
    box: float
    t_final: float
    seed: int
    trajectories: tuple[ScanTrajectory, ...]

    @property
    def n_trajectories(self) -> int:
        """Number of scanned starts."""
        return len(self.trajectories)

    @property
    def n_strict_decay(self) -> int:
        """Trajectories whose V decreased by more than the strict threshold."""
        return sum(1 for item in self.trajectories if item.strict_decay)

    @property
    def max_upstep(self) -> float:
        """Largest rise of V above its running minimum over all trajectories."""
        return max((item.max_upstep for item in self.trajectories), default=0.0)

    @property
    def max_rate_gap(self) -> float:
        """Largest V' identity gap over all trajectories."""
        return max((item.rate_gap for item in self.trajectories), default=0.0)

    @property
    def max_drift(self) -> float:
        """Largest |V(t) - V(0)| over all trajectories."""
        return max((item.max_drift for item in self.trajectories), default=0.0)

    @property
    def entering_trajectories_decay(self) -> bool:
        """Every trajectory that enters {x x' > 0} has strictly decreased V."""
        return all(item.strict_decay for item in self.trajectories if item.enters_quadrant)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready view."""
        return {
            "epsilon": self.epsilon,
            "box": self.box,
            "t_final": self.t_final,
            "seed": self.seed,
            "n_trajectories": self.n_trajectories,
            "n_monotone": self.n_trajectories,
            "n_strict_decay": self.n_strict_decay,
            "max_upstep": self.max_upstep,
            "max_rate_gap": self.max_rate_gap,
            "max_drift": self.max_drift,
            "entering_trajectories_decay": self.entering_trajectories_decay,
            "trajectories": [item.to_dict() for item in self.trajectories],
        }


def simulate(
    system: MoserSystem,
    start: ArrayLike,
    t_final: float,
    rtol: float = MOSER_RTOL,
    atol: float = MOSER_ATOL,
) -> Trajectory:
    """Integrate the Moser equation from (x, x') = start over [0, t_final]."""
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final!r}")
    return integrate(system.rhs, np.asarray(start, dtype=float), 0.0, t_final, rtol, atol)


def _scan_one(
    task: tuple[int, tuple[float, float]],
    system: MoserSystem,
    t_final: float,
    rtol: float,
    atol: float,
) -> ScanTrajectory:
    index, start = task
    trajectory = simulate(system, start, t_final, rtol, atol)
    times = np.linspace(0.0, t_final, MOSER_SCAN_SAMPLES)
    states = trajectory.sample(times)
    v = lyapunov_V(states[:, 0], states[:, 1])

    upstep = float(np.max(v - np.minimum.accumulate(v)))
    if upstep > MOSER_MONOTONE_TOL and system.epsilon > 0:
        raise MonotonicityViolation(
            f"V rises by {upstep:.3e} along trajectory {index} from {start}"
        )

    inside = states[:, 0] * states[:, 1] > 0
    dt = np.diff(times)
    quadrant_time = float(np.sum(dt[inside[:-1] & inside[1:]]))
    gap = rate_identity_gap(system, trajectory)
    if gap >= MOSER_RATE_GAP_TOL:
        _LOGGER.warning("V' identity gap %.3e on trajectory %d", gap, index)

    return ScanTrajectory(
        index=index,
        start=(float(start[0]), float(start[1])),
        V_initial=float(v[0]),
        V_final=float(v[-1]),
        max_upstep=upstep,
        max_drift=float(np.max(np.abs(v - v[0]))),
        strict_decay=bool(v[0] - v[-1] > MOSER_STRICT_DECAY),
        time_in_quadrant=quadrant_time,
        rate_gap=gap,
    )


def sample_starts(n: int, box: float, seed: int) -> list[tuple[float, float]]:
    """Uniform starts in the open box |x| < box, |y| < box."""
    rng = np.random.default_rng(seed)
    points = rng.uniform(-box, box, size=(n, 2))
    return [(float(x), float(y)) for x, y in points]


def nonexistence_scan(
    system: MoserSystem,
    n_trajectories: int = DEFAULT_MOSER_TRAJECTORIES,
    t_final: float = DEFAULT_MOSER_T_FINAL,
    seed: int = DEFAULT_SEED,
    box: float | None = None,
    jobs: int = 1,
    starts: list[tuple[float, float]] | None = None,
    rtol: float = MOSER_RTOL,
    atol: float = MOSER_ATOL,
) -> ScanReport:
    """Simulate random starts and certify monotone decay of V.

    Starts are drawn in |x|, |y| < box (box defaults to epsilon) unless
    ``starts`` is given. For epsilon = 0 the upstep check is skipped and
    ``max_drift`` measures conservation instead.

    Raises:
        ValueError: For t_final below 20 periods, no trajectories, or no box.
        MonotonicityViolation: If V increases beyond 1e-9 on any trajectory.

    """
    if t_final < MOSER_MIN_PERIODS * MOSER_PERIOD:
        raise ValueError(
            f"t_final must cover at least {MOSER_MIN_PERIODS} periods, got {t_final!r}"
        )
    half_width = system.epsilon if box is None else box
    if starts is None:
        if n_trajectories < 1:
            raise ValueError(f"n_trajectories must be positive, got {n_trajectories!r}")
        if not half_width > 0:
            raise ValueError("A positive box is required when epsilon is zero")
        starts = sample_starts(n_trajectories, half_width, seed)

    worker = functools.partial(
        _scan_one, system=system, t_final=t_final, rtol=rtol, atol=atol
    )
    results = ordered_map(worker, list(enumerate(starts)), jobs=jobs)
    report = ScanReport(
        epsilon=system.epsilon,
        box=float(half_width),
        t_final=float(t_final),
        seed=seed,
        trajectories=tuple(results),
    )
    if system.epsilon > 0 and not report.entering_trajectories_decay:
        _LOGGER.warning("Some trajectories enter {x x' > 0} without strict decay of V")
    _LOGGER.info(
        "Moser scan eps=%g: %d trajectories, %d strict decay, max upstep %.3e",
        system.epsilon,
        report.n_trajectories,
        report.n_strict_decay,
        report.max_upstep,
    )
    return report


def scan_rows(report: ScanReport) -> list[tuple[Any, ...]]:
    """CSV rows for the scan report."""
    return [item.as_row() for item in report.trajectories]
