"""Adaptive Dormand-Prince 5(4) integrator with dense output and section events.

Every numerical result of the toolkit flows through this module so that
tolerances, failure modes and reproducibility are controlled in one place.
Steps are accepted when the RMS of err / (atol + rtol * max|y|) is at most 1;
the step factor is 0.9 * err**(-1/5) clamped to [0.2, 10]. Dense output is the
standard fourth-order continuous extension of the pair.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from ..const import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    EVENT_MAX_ITERATIONS,
    EVENT_RESIDUAL_TOL,
    MAX_REJECTIONS_PER_STEP,
    MAX_STEPS,
    MAX_TOLERANCE,
    MIN_TOLERANCE,
    STEP_MAX_FACTOR,
    STEP_MIN_FACTOR,
    STEP_SAFETY,
)
from ..exceptions import NoCrossing, NonFiniteState, StepSizeUnderflow, ValidationError

_LOGGER = logging.getLogger(__name__)

type RHS = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = (
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array(
    [-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40]
)
# Continuous extension: y(t_old + x h) = y_old + h * (K.T @ _P) @ [x, x^2, x^3, x^4]
_P = np.array(
    [
        [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0, 0, 0, 0],
        [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)
_ERROR_EXPONENT = -1.0 / 5.0


@dataclass(frozen=True)
class DenseSegment:
    """Continuous extension over one accepted step.

    Valid between ``t_old`` and ``t_old + h``; ``h`` is negative for segments
    produced by backward integration.
    """

    t_old: float
    h: float
    y_old: NDArray[np.float64]
    Q: NDArray[np.float64]

    @property
    def bounds(self) -> tuple[float, float]:
        """Interval covered by the segment, in increasing order."""
        end = self.t_old + self.h
        return (min(self.t_old, end), max(self.t_old, end))

    def __call__(self, t: float) -> NDArray[np.float64]:
        """Interpolated state at time ``t``."""
        x = (t - self.t_old) / self.h
        return self.y_old + self.Q @ np.array([x, x * x, x**3, x**4])


@dataclass
class Trajectory:
    """Accepted steps of one integration, ordered by increasing time."""

    times: NDArray[np.float64]
    states: NDArray[np.float64]
    segments: list[DenseSegment]
    error_estimates: NDArray[np.float64]
    rejected_steps: int = 0
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    @property
    def t0(self) -> float:
        """First time covered."""
        return float(self.times[0])

    @property
    def t1(self) -> float:
        """Last time covered."""
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        """Number of accepted steps."""
        return len(self.segments)

    @property
    def final_state(self) -> NDArray[np.float64]:
        """State at the last time."""
        return np.array(self.states[-1], copy=True)

    def __call__(self, t: float) -> NDArray[np.float64]:
        """Dense-output state at ``t`` inside [t0, t1]."""
        if not self.t0 - 1e-12 * max(1.0, abs(self.t0)) <= t <= self.t1 + 1e-12 * max(
            1.0, abs(self.t1)
        ):
            raise ValueError(f"t={t!r} outside trajectory span [{self.t0}, {self.t1}]")
        if not self.segments:
            return np.array(self.states[0], copy=True)
        index = int(np.searchsorted(self.times, t, side="right")) - 1
        index = min(max(index, 0), len(self.segments) - 1)
        return self.segments[index](t)

    def sample(self, times: ArrayLike) -> NDArray[np.float64]:
        """Dense-output states at each of ``times``, shape (len(times), n)."""
        return np.array([self(float(t)) for t in np.asarray(times, dtype=float)])


@dataclass(frozen=True)
class Section:
    """Affine section c . y + offset = 0 with crossing direction and guard.

    ``direction`` +1 keeps only increasing crossings, -1 only decreasing ones
    and 0 both. The optional guard ``guard_normal . y + guard_offset > 0``
    must hold at the crossing.
    """

    normal: tuple[float, ...]
    offset: float = 0.0
    direction: int = 0
    guard_normal: tuple[float, ...] | None = None
    guard_offset: float = 0.0

    def __post_init__(self) -> None:
        """Validate the direction flag."""
        if self.direction not in (-1, 0, 1):
            raise ValidationError(f"Section direction must be -1, 0 or 1, got {self.direction}")

    def value(self, y: NDArray[np.float64]) -> float:
        """Signed section functional at ``y``."""
        return float(np.dot(self.normal, y[: len(self.normal)])) + self.offset

    def guard(self, y: NDArray[np.float64]) -> bool:
        """True when the guard accepts ``y``."""
        if self.guard_normal is None:
            return True
        return float(np.dot(self.guard_normal, y[: len(self.guard_normal)])) + self.guard_offset > 0

    def crosses(self, before: float, after: float) -> bool:
        """True when the section is crossed in the configured direction.

        The earlier value must lie strictly on one side. Callers handle the
        tolerance band around the section, see ``integrate_to_section``.
        """
        if self.direction >= 0 and before < 0.0 <= after:
            return True
        return self.direction <= 0 and before > 0.0 >= after

    @classmethod
    def coordinate(
        cls,
        index: int,
        value: float = 0.0,
        direction: int = 0,
        guard_index: int | None = None,
        guard_sign: float = 1.0,
        dimension: int = 2,
    ) -> Section:
        """Section y[index] = value, optionally guarded by sign(y[guard_index])."""
        normal = [0.0] * dimension
        normal[index] = 1.0
        guard = None
        if guard_index is not None:
            guard_vec = [0.0] * dimension
            guard_vec[guard_index] = guard_sign
            guard = tuple(guard_vec)
        return cls(tuple(normal), -value, direction, guard)


@dataclass(frozen=True)
class SectionEvent:
    """First guarded crossing of a section."""

    t: float
    state: NDArray[np.float64]
    residual: float
    trajectory: Trajectory = field(repr=False)


def _rms(values: NDArray[np.float64]) -> float:
    return float(np.sqrt(np.mean(values * values)))


def _check_tolerances(rtol: float, atol: float) -> None:
    if not (MIN_TOLERANCE <= rtol <= MAX_TOLERANCE) or not (0 < atol <= MAX_TOLERANCE):
        raise ValidationError(
            f"Tolerances out of range: rtol={rtol!r}, atol={atol!r} "
            f"(rtol must lie in [{MIN_TOLERANCE}, {MAX_TOLERANCE}])"
        )


class DormandPrince:
    """Forward-in-time DOPRI5 stepper (t_bound > t0).

    ``step`` advances one accepted step and returns its dense segment.
    """

    def __init__(
        self,
        func: RHS,
        t0: float,
        y0: ArrayLike,
        t_bound: float,
        rtol: float = DEFAULT_RTOL,
        atol: float = DEFAULT_ATOL,
        first_step: float | None = None,
    ) -> None:
        """Initialize the stepper at (t0, y0)."""
        _check_tolerances(rtol, atol)
        self.func = func
        self.t = float(t0)
        self.t_bound = float(t_bound)
        self.y = np.asarray(y0, dtype=float).copy()
        self.rtol = rtol
        self.atol = atol
        if not np.all(np.isfinite(self.y)):
            raise NonFiniteState(f"Initial state is not finite: {self.y}")
        self.f = self._evaluate(self.t, self.y)
        self.K = np.empty((7, self.y.size))
        self.h = first_step if first_step is not None else self._initial_step()
        self.rejected = 0
        self.last_error = 0.0

    def _evaluate(self, t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        value = np.asarray(self.func(t, y), dtype=float)
        if not np.all(np.isfinite(value)):
            raise NonFiniteState(f"Vector field is not finite at t={t!r}, y={y}")
        return value

    def _initial_step(self) -> float:
        span = self.t_bound - self.t
        if span <= 0:
            return 0.0
        scale = self.atol + self.rtol * np.abs(self.y)
        d0 = _rms(self.y / scale)
        d1 = _rms(self.f / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
        f1 = np.asarray(self.func(self.t + h0, self.y + h0 * self.f), dtype=float)
        d2 = _rms((f1 - self.f) / scale) / h0 if np.all(np.isfinite(f1)) else math.inf
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1.0 / 5.0)
        return min(100 * h0, h1, span)

    def _attempt(self, h: float) -> tuple[NDArray[np.float64], NDArray[np.float64], float]:
        K, t, y = self.K, self.t, self.y
        K[0] = self.f
        for stage in range(1, 6):
            dy = h * (_A[stage] @ K[:stage])
            K[stage] = self.func(t + _C[stage] * h, y + dy)
        y_new = y + h * (_B @ K[:6])
        f_new = np.asarray(self.func(t + h, y_new), dtype=float)
        K[6] = f_new
        if not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(K))):
            return y_new, f_new, math.nan
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        error = h * (_E @ K) / scale
        return y_new, f_new, _rms(error)

    def step(self) -> DenseSegment:
        """Advance one accepted step, clipping the last one to ``t_bound``.

        Raises:
            StepSizeUnderflow: If the step size collapses or too many
                rejections occur in one step.
            NonFiniteState: If the state cannot be advanced to finite values.

        """
        rejections = 0
        h = min(self.h, self.t_bound - self.t)
        while True:
            min_step = 10 * np.finfo(float).eps * max(1.0, abs(self.t))
            if h < min_step:
                raise StepSizeUnderflow(
                    f"Step size {h:.3e} below {min_step:.3e} at t={self.t!r}"
                )
            y_new, f_new, err = self._attempt(h)
            if math.isfinite(err) and err <= 1.0:
                break
            rejections += 1
            self.rejected += 1
            if rejections > MAX_REJECTIONS_PER_STEP:
                if not math.isfinite(err):
                    raise NonFiniteState(f"State became non-finite near t={self.t!r}")
                raise StepSizeUnderflow(
                    f"{rejections} rejected attempts at t={self.t!r} (last h={h:.3e})"
                )
            factor = STEP_MIN_FACTOR if not math.isfinite(err) else max(
                STEP_MIN_FACTOR, STEP_SAFETY * err**_ERROR_EXPONENT
            )
            h *= factor

        segment = DenseSegment(self.t, h, self.y, h * (self.K.T @ _P))
        remaining = self.t_bound - (self.t + h)
        self.t = self.t_bound if remaining <= 4 * np.finfo(float).eps * max(
            1.0, abs(self.t_bound)
        ) else self.t + h
        self.y = y_new
        self.f = f_new
        self.last_error = err
        factor = STEP_MAX_FACTOR if err == 0.0 else min(
            STEP_MAX_FACTOR, max(STEP_MIN_FACTOR, STEP_SAFETY * err**_ERROR_EXPONENT)
        )
        self.h = h * factor
        return segment

    @property
    def finished(self) -> bool:
        """True once ``t_bound`` has been reached."""
        return self.t >= self.t_bound


class _Recorder:
    """Collects accepted steps into a Trajectory."""

    def __init__(self, t0: float, y0: NDArray[np.float64]) -> None:
        self.times = [t0]
        self.states = [np.array(y0, dtype=float)]
        self.segments: list[DenseSegment] = []
        self.errors: list[float] = []

    def add(self, segment: DenseSegment, t: float, y: NDArray[np.float64], err: float) -> None:
        self.segments.append(segment)
        self.times.append(t)
        self.states.append(np.array(y, copy=True))
        self.errors.append(err)

    def build(self, rejected: int, rtol: float, atol: float) -> Trajectory:
        return Trajectory(
            times=np.array(self.times),
            states=np.array(self.states),
            segments=self.segments,
            error_estimates=np.array(self.errors),
            rejected_steps=rejected,
            rtol=rtol,
            atol=atol,
        )


def _reversed_rhs(func: RHS) -> RHS:
    def backward(s: float, z: NDArray[np.float64]) -> NDArray[np.float64]:
        return -np.asarray(func(-s, z), dtype=float)

    return backward


def _mirror(trajectory: Trajectory) -> Trajectory:
    """Map a trajectory in s = -t back onto increasing t."""
    segments = [
        DenseSegment(-seg.t_old, -seg.h, seg.y_old, seg.Q) for seg in reversed(trajectory.segments)
    ]
    return Trajectory(
        times=-trajectory.times[::-1],
        states=trajectory.states[::-1].copy(),
        segments=segments,
        error_estimates=trajectory.error_estimates[::-1].copy(),
        rejected_steps=trajectory.rejected_steps,
        rtol=trajectory.rtol,
        atol=trajectory.atol,
    )


def integrate(
    func: RHS,
    y0: ArrayLike,
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    first_step: float | None = None,
) -> Trajectory:
    """Integrate y' = func(t, y) from (t0, y0) to t1.

    For t1 < t0 the system is integrated backward; the returned trajectory
    is still ordered by increasing time and ends at t0.

    Raises:
        ValidationError: For tolerances out of range.
        StepSizeUnderflow: If the step size collapses.
        NonFiniteState: If the state becomes non-finite.

    """
    if t1 < t0:
        forward = integrate(_reversed_rhs(func), y0, -t0, -t1, rtol, atol, first_step)
        return _mirror(forward)

    stepper = DormandPrince(func, t0, y0, t1, rtol, atol, first_step)
    recorder = _Recorder(stepper.t, stepper.y)
    steps = 0
    while not stepper.finished:
        segment = stepper.step()
        recorder.add(segment, stepper.t, stepper.y, stepper.last_error)
        steps += 1
        if steps >= MAX_STEPS:
            raise StepSizeUnderflow(f"Exceeded {MAX_STEPS} steps before t={t1!r}")

    _LOGGER.debug(
        "Integrated [%g, %g]: %d steps, %d rejected", t0, t1, steps, stepper.rejected
    )
    return recorder.build(stepper.rejected, rtol, atol)


def _refine_crossing(section: Section, segment: DenseSegment, t_new: float) -> float:
    """Root of the section functional along the dense output of one step."""

    def residual(t: float) -> float:
        return section.value(segment(t))

    end_value = residual(t_new)
    if end_value == 0.0 or residual(segment.t_old) * end_value > 0:
        # interpolant and step endpoint disagree on the sign at round-off level
        return t_new
    return float(
        brentq(
            residual,
            segment.t_old,
            t_new,
            xtol=4 * np.finfo(float).eps * max(1.0, abs(t_new)),
            maxiter=EVENT_MAX_ITERATIONS,
        )
    )


def integrate_to_section(
    func: RHS,
    y0: ArrayLike,
    t0: float,
    section: Section,
    max_time: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> SectionEvent:
    """Integrate until the first guarded crossing of ``section``.

    The crossing time is refined on the dense output with Brent's method. A
    start within EVENT_RESIDUAL_TOL of the section counts as on it, and sign
    changes are ignored until the trajectory has left that band, so restarting
    from a returned event finds the next crossing.

    Raises:
        NoCrossing: If no crossing occurs before t0 + max_time.
        StepSizeUnderflow: If the step size collapses.
        NonFiniteState: If the state becomes non-finite.

    """
    t_bound = t0 + max_time
    stepper = DormandPrince(func, t0, y0, t_bound, rtol, atol)
    recorder = _Recorder(stepper.t, stepper.y)
    value = section.value(stepper.y)
    armed = abs(value) > EVENT_RESIDUAL_TOL
    steps = 0

    while not stepper.finished:
        segment = stepper.step()
        steps += 1
        new_value = section.value(stepper.y)
        if not armed:
            armed = abs(new_value) > EVENT_RESIDUAL_TOL
        elif section.crosses(value, new_value):
            t_event = _refine_crossing(section, segment, stepper.t)
            state = segment(t_event)
            if section.guard(state):
                residual = abs(section.value(state))
                if residual > EVENT_RESIDUAL_TOL:
                    _LOGGER.warning("Section residual %.3e at t=%g", residual, t_event)
                recorder.add(segment, t_event, state, stepper.last_error)
                return SectionEvent(
                    t_event, state, residual, recorder.build(stepper.rejected, rtol, atol)
                )
        recorder.add(segment, stepper.t, stepper.y, stepper.last_error)
        value = new_value
        if steps >= MAX_STEPS:
            break

    raise NoCrossing(f"No section crossing within max_time={max_time!r} from t0={t0!r}")


def variational_rhs(
    func: RHS,
    jacobian: Callable[[float, NDArray[np.float64]], NDArray[np.float64]],
    n: int,
) -> RHS:
    """Augment an n-dimensional field with its variational equation.

    The augmented state is (x, vec(Phi)) with Phi stored row-major and
    Phi' = A(t, x) Phi.
    """

    def augmented(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        x = y[:n]
        phi = y[n:].reshape(n, n)
        return np.concatenate((func(t, x), (jacobian(t, x) @ phi).reshape(-1)))

    return augmented


@dataclass
class VariationalTrajectory:
    """Trajectory of a state together with its fundamental matrix."""

    trajectory: Trajectory
    dimension: int

    def state(self, t: float) -> NDArray[np.float64]:
        """State x(t)."""
        return self.trajectory(t)[: self.dimension]

    def fundamental(self, t: float) -> NDArray[np.float64]:
        """Matrix M(t) = Phi(t) M0, with M(t0) = M0 (the identity by default)."""
        n = self.dimension
        return self.trajectory(t)[n:].reshape(n, n)

    @property
    def t0(self) -> float:
        """First time covered."""
        return self.trajectory.t0

    @property
    def t1(self) -> float:
        """Last time covered."""
        return self.trajectory.t1


def integrate_with_variational(
    func: RHS,
    jacobian: Callable[[float, NDArray[np.float64]], NDArray[np.float64]],
    x0: ArrayLike,
    t0: float,
    t1: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    m0: ArrayLike | None = None,
) -> VariationalTrajectory:
    """Integrate the state and the matrix M' = A(t, x) M from M(t0) = m0.

    ``m0`` defaults to the identity, giving the fundamental matrix. Error
    control covers every component of the augmented system.

    Raises:
        ValidationError: If ``m0`` is not an n x n matrix.

    """
    x = np.asarray(x0, dtype=float)
    n = x.size
    start = np.eye(n) if m0 is None else np.asarray(m0, dtype=float)
    if start.shape != (n, n):
        raise ValidationError(f"m0 must have shape ({n}, {n}), got {start.shape}")
    y0 = np.concatenate((x, start.reshape(-1)))
    trajectory = integrate(variational_rhs(func, jacobian, n), y0, t0, t1, rtol, atol)
    return VariationalTrajectory(trajectory, n)
