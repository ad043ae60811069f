"""Limit cycle of the unperturbed system by scalar Newton shooting.

The cycle is anchored on the section {u' = 0, u > 0}, so u0(0) = a and
u0'(0) = 0. The return map P sends an amplitude a to the u-coordinate of the
next guarded crossing; the cycle is the fixed point P(a) = a.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .const import (
    CYCLE_CLOSURE_TOL,
    CYCLE_FD_STEP,
    CYCLE_MIN_SAMPLES,
    CYCLE_NEWTON_MAX_STEPS,
    CYCLE_RETURN_HORIZON,
    CYCLE_SINGULAR_TOL,
    CYCLE_UPDATE_TOL,
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    SUP_NORM_SAMPLES,
)
from .exceptions import (
    Diverged,
    NoCrossing,
    NoReturn,
    OrbitOutsideS,
    SingularShooting,
    ValidationError,
)
from .ode import Section, SectionEvent, Trajectory, integrate_to_section
from .reports import write_csv
from .system import Frame, LienardSystem, field_function

_LOGGER = logging.getLogger(__name__)

ORBIT_CSV_HEADER = ("t", "u", "udot")


@dataclass(frozen=True)
class ReturnMap:
    """One evaluation of the first-return map."""

    amplitude: float
    image: float
    time: float
    event: SectionEvent = field(repr=False)

    @property
    def displacement(self) -> float:
        """P(a) - a."""
        return self.image - self.amplitude


@dataclass(frozen=True)
class PeriodicOrbit:
    """Isolated periodic solution u0 of the unperturbed system."""

    system: LienardSystem = field(repr=False)
    a: float
    tau0: float
    trajectory: Trajectory = field(repr=False)
    closure_residual: float
    max_radius: float
    return_derivative: float
    newton_steps: int
    times: NDArray[np.float64] = field(repr=False)
    states: NDArray[np.float64] = field(repr=False)

    def evaluate(self, t: float) -> NDArray[np.float64]:
        """State (u0, u0') at ``t``, wrapped modulo tau0."""
        return self.trajectory(float(np.mod(t, self.tau0)))

    def sample(self, n: int) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Return ``n`` uniform samples on [0, tau0] as (times, states)."""
        times = np.linspace(0.0, self.tau0, n)
        return times, self.trajectory.sample(times)

    @property
    def initial_state(self) -> NDArray[np.float64]:
        """State at t = 0, i.e. (a, 0)."""
        return np.array([self.a, 0.0])


@dataclass(frozen=True)
class OrbitGeometry:
    """Placement of the orbit inside the disk S of radius r."""

    r: float
    max_radius: float
    sigma: float
    t_max: float


@dataclass(frozen=True)
class FarkasPath:
    """Samples of p(t) = (-u0' - F(u0), u0) and its derivative (g(u0), u0')."""

    times: NDArray[np.float64]
    p: NDArray[np.float64]
    p_dot: NDArray[np.float64]


def _guess_frequency(system: LienardSystem, a: float) -> float:
    candidates = [
        math.sqrt(abs(float(system.g_prime(0.0)))),
        math.sqrt(abs(float(system.g(a)) / a)),
    ]
    positive = [w for w in candidates if w > 0 and math.isfinite(w)]
    return min(positive) if positive else 1.0


def _section_for(system: LienardSystem, a: float) -> Section:
    """Section u' = 0 guarded by u > 0, crossed the way the field leaves (a, 0)."""
    acceleration = -float(system.g(a))
    direction = -1 if acceleration < 0 else 1
    return Section.coordinate(index=1, value=0.0, direction=direction, guard_index=0)


def return_map(
    system: LienardSystem,
    a: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    section: Section | None = None,
    max_time: float | None = None,
) -> ReturnMap:
    """Evaluate the first-return map at amplitude ``a``.

    Raises:
        NoReturn: If the orbit does not come back to the section in time.

    """
    section = section or _section_for(system, a)
    if max_time is None:
        max_time = CYCLE_RETURN_HORIZON / _guess_frequency(system, a)
    try:
        event = integrate_to_section(
            field_function(system, Frame.UV), [a, 0.0], 0.0, section, max_time, rtol, atol
        )
    except NoCrossing as err:
        raise NoReturn(f"No return to the section from a={a!r} within t={max_time:g}") from err
    return ReturnMap(a, float(event.state[0]), event.t, event)


def _max_radius(trajectory: Trajectory, tau0: float) -> tuple[float, float]:
    """Max of sqrt(u^2 + u'^2) over [0, tau0] with local quadratic refinement."""
    times = np.linspace(0.0, tau0, SUP_NORM_SAMPLES + 1)
    states = trajectory.sample(times)
    radii = np.hypot(states[:, 0], states[:, 1])
    i = int(np.argmax(radii))
    best_t, best = float(times[i]), float(radii[i])
    if 0 < i < len(times) - 1:
        left, mid, right = radii[i - 1], radii[i], radii[i + 1]
        curvature = left - 2 * mid + right
        if curvature < 0:
            offset = 0.5 * (left - right) / curvature
            t_vertex = float(times[i] + offset * (times[1] - times[0]))
            refined = float(np.hypot(*trajectory(t_vertex)[:2]))
            if refined > best:
                best_t, best = t_vertex, refined
    return best, best_t


def find_limit_cycle(
    system: LienardSystem,
    a_guess: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> PeriodicOrbit:
    """Find the isolated periodic solution through (a, 0) by Newton shooting.

    Args:
        system: Unperturbed Liénard system.
        a_guess: Positive starting amplitude.
        rtol: Relative integration tolerance.
        atol: Absolute integration tolerance.

    Returns:
        The converged orbit sampled on at least 512 points.

    Raises:
        ValueError: If a_guess is not positive.
        ValidationError: If the system carries a perturbation.
        SingularShooting: If P'(a) is within 1e-8 of 1 (non-isolated orbit).
        NoReturn: If the orbit never returns to the section.
        Diverged: If Newton does not converge within 20 steps.

    """
    if not a_guess > 0:
        raise ValueError(f"a_guess must be positive, got {a_guess!r}")
    if system.is_perturbed:
        raise ValidationError("find_limit_cycle needs the unperturbed system")

    a = float(a_guess)
    section = _section_for(system, a)
    max_time = CYCLE_RETURN_HORIZON / _guess_frequency(system, a)

    for step in range(1, CYCLE_NEWTON_MAX_STEPS + 1):
        current = return_map(system, a, rtol, atol, section, max_time)
        h = CYCLE_FD_STEP * max(1.0, a)
        plus = return_map(system, a + h, rtol, atol, section, max_time)
        minus = return_map(system, a - h, rtol, atol, section, max_time)
        derivative = (plus.image - minus.image) / (2 * h)
        if abs(derivative - 1.0) < CYCLE_SINGULAR_TOL:
            raise SingularShooting(
                f"Return-map derivative {derivative!r} is within {CYCLE_SINGULAR_TOL} "
                f"of 1 at a={a!r}; the orbit is not isolated"
            )

        update = -current.displacement / (derivative - 1.0)
        closure = abs(current.displacement)
        _LOGGER.debug(
            "Shooting step %d: a=%.15g P(a)-a=%.3e P'(a)=%.6g update=%.3e",
            step,
            a,
            current.displacement,
            derivative,
            update,
        )

        if abs(update) < CYCLE_UPDATE_TOL and closure < CYCLE_CLOSURE_TOL:
            return _build_orbit(system, current, derivative, step)

        a_next = a + update
        # keep the amplitude on the guarded half of the section
        a = a_next if a_next > 0 else 0.5 * a

    raise Diverged(
        f"Shooting did not converge in {CYCLE_NEWTON_MAX_STEPS} steps (last a={a!r})"
    )


def _build_orbit(
    system: LienardSystem, current: ReturnMap, derivative: float, steps: int
) -> PeriodicOrbit:
    trajectory = current.event.trajectory
    tau0 = current.time
    n = max(CYCLE_MIN_SAMPLES, trajectory.n_steps + 1)
    times = np.linspace(0.0, tau0, n)
    states = trajectory.sample(times)
    closure = float(np.linalg.norm(trajectory.final_state - trajectory.states[0]))
    max_radius, _ = _max_radius(trajectory, tau0)
    orbit = PeriodicOrbit(
        system=system,
        a=current.amplitude,
        tau0=tau0,
        trajectory=trajectory,
        closure_residual=closure,
        max_radius=max_radius,
        return_derivative=derivative,
        newton_steps=steps,
        times=times,
        states=states,
    )
    _LOGGER.info(
        "Limit cycle found: a=%.12g tau0=%.12g closure=%.2e after %d step(s)",
        orbit.a,
        orbit.tau0,
        closure,
        steps,
    )
    return orbit


def inside_s(
    system: LienardSystem, x1: NDArray[np.float64], x2: NDArray[np.float64], r: float
) -> NDArray[np.bool_]:
    """Membership in S written in the farkas frame: x2^2 + (-x1 - F(x2))^2 < r^2."""
    velocity = -np.asarray(x1) - system.F(np.asarray(x2))
    return np.asarray(np.asarray(x2) ** 2 + velocity**2 < r * r)


def orbit_geometry(orbit: PeriodicOrbit, r: float) -> OrbitGeometry:
    """Measure the orbit's distance to the boundary of S.

    Raises:
        ValueError: If r is not positive.
        OrbitOutsideS: If the orbit reaches or leaves the boundary of S.

    """
    if not r > 0:
        raise ValueError(f"r must be positive, got {r!r}")
    max_radius, t_max = _max_radius(orbit.trajectory, orbit.tau0)
    sigma = r - max_radius
    path = farkas_path(orbit)
    if sigma <= 0 or not bool(np.all(inside_s(orbit.system, path.p[:, 0], path.p[:, 1], r))):
        raise OrbitOutsideS(
            f"Orbit reaches radius {max_radius:.6g} at t={t_max:.6g}, outside S(r={r:g})"
        )
    return OrbitGeometry(r=r, max_radius=max_radius, sigma=sigma, t_max=t_max)


def farkas_path(orbit: PeriodicOrbit, n: int | None = None) -> FarkasPath:
    """Orbit in farkas coordinates with its time derivative."""
    if n is None:
        times, states = orbit.times, orbit.states
    else:
        times, states = orbit.sample(n)
    u, udot = states[:, 0], states[:, 1]
    system = orbit.system
    p = np.column_stack((-udot - system.F(u), u))
    p_dot = np.column_stack((system.g(u), udot))
    return FarkasPath(times=times, p=p, p_dot=p_dot)


def orbit_rows(orbit: PeriodicOrbit, n: int | None = None) -> list[tuple[float, float, float]]:
    """Rows (t, u, udot) for export."""
    times, states = (orbit.times, orbit.states) if n is None else orbit.sample(n)
    return [
        (float(t), float(state[0]), float(state[1]))
        for t, state in zip(times, states, strict=True)
    ]


def orbit_to_csv(orbit: PeriodicOrbit, path: Path | str, n: int | None = None) -> Path:
    """Write the orbit as CSV columns t, u, udot."""
    return write_csv(path, ORBIT_CSV_HEADER, orbit_rows(orbit, n))
