"""Liénard systems, coordinate frames and hypothesis checks.

The unperturbed equation u'' + f(u)u' + g(u) = 0 is handled in three
equivalent plane forms:

  uv             u' = v,          v' = -g(u) - f(u) v
  lienard_plane  u' = w - F(u),   w' = -g(u)
  farkas         x1' = g(x2),     x2' = -x1 - F(x2)

with x1 = -u' - F(u), x2 = u. The perturbation eps*gamma((t + phi)/tau, u, u')
enters the second equation of the uv and lienard_plane forms and the first
equation of the farkas form (with a minus sign).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np
import voluptuous as vol
from numpy.typing import NDArray
from scipy.optimize import brentq

from .const import (
    DEFAULT_TAU,
    SYMMETRY_SAMPLES,
    SYMMETRY_TOL,
    ZERO_SCAN_SAMPLES,
)
from .exceptions import FrameError, ScenarioError, ValidationError
from .functions import CATALOG, Perturbation, PerturbationKind, ScalarFunction

_LOGGER = logging.getLogger(__name__)

type FieldFunction = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]

CHECK_F_EVEN = "f_even"
CHECK_G_ODD = "g_odd"
CHECK_X_G_POSITIVE = "x_g_positive"
CHECK_F_UNBOUNDED = "F_unbounded"
CHECK_G_UNBOUNDED = "G_unbounded"
CHECK_F_UNIQUE_ZERO = "F_unique_positive_zero"
CHECK_TWICE_DIFFERENTIABLE = "twice_differentiable"


def finite_float(value: Any) -> float:
    """Coerce to a finite float."""
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise vol.Invalid("must be a number")
    number = float(value)
    if not math.isfinite(number):
        raise vol.Invalid("must be finite")
    return number


def positive_float(value: Any) -> float:
    """Coerce to a finite positive float."""
    number = finite_float(value)
    if number <= 0:
        raise vol.Invalid("must be positive")
    return number


FUNCTION_SCHEMA = vol.Any(
    vol.Schema({vol.Required("poly"): vol.All([finite_float], vol.Length(min=1))}),
    vol.Schema(
        {
            vol.Required("catalog"): vol.In(sorted(CATALOG)),
            vol.Optional("params", default=list): [finite_float],
        }
    ),
)

PERTURBATION_SCHEMA = vol.Schema(
    {
        vol.Required("kind"): vol.In([str(kind) for kind in PerturbationKind]),
        vol.Optional("forcing"): FUNCTION_SCHEMA,
        vol.Optional("position"): FUNCTION_SCHEMA,
        vol.Optional("velocity"): FUNCTION_SCHEMA,
    }
)

SYSTEM_SCHEMA = vol.Schema(
    {
        vol.Required("f"): FUNCTION_SCHEMA,
        vol.Required("g"): FUNCTION_SCHEMA,
        vol.Optional("perturbation"): PERTURBATION_SCHEMA,
        vol.Optional("epsilon", default=0.0): finite_float,
        vol.Optional("tau", default=DEFAULT_TAU): positive_float,
    }
)


class Frame(StrEnum):
    """Plane coordinate frames for the Liénard equation."""

    UV = "uv"
    LIENARD_PLANE = "lienard_plane"
    FARKAS = "farkas"


def parse_frame(tag: Frame | str) -> Frame:
    """Convert a frame tag, raising FrameError for unknown tags."""
    try:
        return Frame(tag)
    except ValueError as err:
        raise FrameError(f"Unknown coordinate frame: {tag!r}") from err


@dataclass(frozen=True)
class PhasePoint:
    """Two-component state tagged with its coordinate frame."""

    state: tuple[float, float]
    frame: Frame = Frame.UV

    def __post_init__(self) -> None:
        """Normalize the frame tag and state tuple."""
        object.__setattr__(self, "frame", parse_frame(self.frame))
        object.__setattr__(self, "state", (float(self.state[0]), float(self.state[1])))

    def as_array(self) -> NDArray[np.float64]:
        """State as a numpy vector."""
        return np.array(self.state, dtype=float)


@dataclass(frozen=True)
class LienardSystem:
    """Pair (f, g) with optional perturbation eps*gamma(t/tau, u, u').

    F and G (antiderivatives vanishing at 0) and the derivatives needed by
    the variational system are materialized at construction.
    """

    f: ScalarFunction
    g: ScalarFunction
    perturbation: Perturbation | None = None
    epsilon: float = 0.0
    tau: float = DEFAULT_TAU
    F: ScalarFunction = field(init=False, repr=False)
    G: ScalarFunction = field(init=False, repr=False)
    f_prime: ScalarFunction = field(init=False, repr=False)
    g_prime: ScalarFunction = field(init=False, repr=False)
    g_second: ScalarFunction = field(init=False, repr=False)

    def __post_init__(self) -> None:
        """Validate and materialize derived functions."""
        if self.perturbation is None and self.epsilon != 0.0:
            raise ValidationError("epsilon must be 0 when no perturbation is given")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValidationError(f"tau must be positive, got {self.tau!r}")
        object.__setattr__(self, "F", self.f.antiderivative())
        object.__setattr__(self, "G", self.g.antiderivative())
        object.__setattr__(self, "f_prime", self.f.derivative())
        object.__setattr__(self, "g_prime", self.g.derivative())
        object.__setattr__(self, "g_second", self.g_prime.derivative())

    @property
    def is_perturbed(self) -> bool:
        """True when a perturbation with non-zero amplitude is attached."""
        return self.perturbation is not None and self.epsilon != 0.0

    def unperturbed(self) -> LienardSystem:
        """The system (L) with the perturbation removed."""
        return LienardSystem(f=self.f, g=self.g, tau=self.tau)

    def with_perturbation(
        self, perturbation: Perturbation, epsilon: float, tau: float | None = None
    ) -> LienardSystem:
        """The system (L_R) with the given perturbation and amplitude."""
        return LienardSystem(
            f=self.f,
            g=self.g,
            perturbation=perturbation,
            epsilon=epsilon,
            tau=self.tau if tau is None else tau,
        )

    def to_frame(self, point: PhasePoint, target: Frame | str) -> PhasePoint:
        """Convert a phase point to another frame."""
        return to_frame(self, point, target)


def _to_uv(system: LienardSystem, point: PhasePoint) -> tuple[float, float]:
    a, b = point.state
    if point.frame is Frame.UV:
        return a, b
    if point.frame is Frame.LIENARD_PLANE:
        return a, b - float(system.F(a))
    return b, -a - float(system.F(b))


def to_frame(system: LienardSystem, point: PhasePoint, target: Frame | str) -> PhasePoint:
    """Convert ``point`` into ``target`` frame using the system's F."""
    frame = parse_frame(target)
    if frame is point.frame:
        return point
    u, v = _to_uv(system, point)
    if frame is Frame.UV:
        return PhasePoint((u, v), Frame.UV)
    if frame is Frame.LIENARD_PLANE:
        return PhasePoint((u, v + float(system.F(u))), Frame.LIENARD_PLANE)
    return PhasePoint((-v - float(system.F(u)), u), Frame.FARKAS)


def field_function(
    system: LienardSystem, frame: Frame | str = Frame.UV, phi: float = 0.0
) -> FieldFunction:
    """Return the vector field of ``system`` in ``frame`` as ``(t, y) -> dy/dt``."""
    frame = parse_frame(frame)
    f, g, F = system.f, system.g, system.F
    gamma = system.perturbation if system.is_perturbed else None
    eps, tau = system.epsilon, system.tau

    if frame is Frame.UV:

        def uv_field(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
            u, v = y[0], y[1]
            dv = -g(u) - f(u) * v
            if gamma is not None:
                dv = dv + eps * gamma((t + phi) / tau, u, v, eps)
            return np.array([v, dv])

        return uv_field

    if frame is Frame.LIENARD_PLANE:

        def plane_field(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
            u, w = y[0], y[1]
            Fu = F(u)
            dw = -g(u)
            if gamma is not None:
                dw = dw + eps * gamma((t + phi) / tau, u, w - Fu, eps)
            return np.array([w - Fu, dw])

        return plane_field

    def farkas_field(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        x1, x2 = y[0], y[1]
        velocity = -x1 - F(x2)
        dx1 = g(x2)
        if gamma is not None:
            dx1 = dx1 - eps * gamma((t + phi) / tau, x2, velocity, eps)
        return np.array([dx1, velocity])

    return farkas_field


def jacobian_function(
    system: LienardSystem, frame: Frame | str = Frame.UV, phi: float = 0.0
) -> Callable[[float, NDArray[np.float64]], NDArray[np.float64]]:
    """Return the state Jacobian of the vector field in ``frame``."""
    frame = parse_frame(frame)
    f, F, g_prime, f_prime = system.f, system.F, system.g_prime, system.f_prime
    gamma = system.perturbation if system.is_perturbed else None
    eps, tau = system.epsilon, system.tau

    def uv_jacobian(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        u, v = y[0], y[1]
        row = [-g_prime(u) - f_prime(u) * v, -f(u)]
        if gamma is not None:
            _, d_u, d_udot = gamma.gradient((t + phi) / tau, u, v)
            row = [row[0] + eps * d_u, row[1] + eps * d_udot]
        return np.array([[0.0, 1.0], row], dtype=float)

    def plane_jacobian(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        u, w = y[0], y[1]
        fu = f(u)
        row = [-g_prime(u), 0.0]
        if gamma is not None:
            _, d_u, d_udot = gamma.gradient((t + phi) / tau, u, w - F(u))
            row = [row[0] + eps * (d_u - fu * d_udot), eps * d_udot]
        return np.array([[-fu, 1.0], row], dtype=float)

    def farkas_jacobian(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        x1, x2 = y[0], y[1]
        fx = f(x2)
        row = [0.0, g_prime(x2)]
        if gamma is not None:
            # q1 = -gamma(theta, x2, -x1 - F(x2))
            _, d_u, d_udot = gamma.gradient((t + phi) / tau, x2, -x1 - F(x2))
            row = [eps * d_udot, row[1] + eps * (-d_u + fx * d_udot)]
        return np.array([row, [-1.0, -fx]], dtype=float)

    if frame is Frame.UV:
        return uv_jacobian
    if frame is Frame.LIENARD_PLANE:
        return plane_jacobian
    return farkas_jacobian


def vector_field(
    system: LienardSystem, point: PhasePoint, t: float, phi: float = 0.0
) -> NDArray[np.float64]:
    """Time derivative of ``point`` in its own frame at time ``t``."""
    return field_function(system, point.frame, phi)(t, point.as_array())


@dataclass(frozen=True)
class HypothesisCheck:
    """Outcome of one named hypothesis probe."""

    name: str
    passed: bool
    witness: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    """Advisory report on the standing hypotheses for (f, g)."""

    probe_radius: float
    checks: tuple[HypothesisCheck, ...]
    positive_zero_of_F: float | None = None

    @property
    def passed(self) -> bool:
        """True when every check passed."""
        return all(check.passed for check in self.checks)

    @property
    def failed(self) -> list[str]:
        """Names of failed checks."""
        return [check.name for check in self.checks if not check.passed]

    def get(self, name: str) -> HypothesisCheck:
        """Look up a check by name."""
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    @property
    def symmetric(self) -> bool:
        """True when f is even and g is odd."""
        return self.get(CHECK_F_EVEN).passed and self.get(CHECK_G_ODD).passed


def _symmetry_check(
    name: str, func: ScalarFunction, samples: NDArray[np.float64], sign: float
) -> HypothesisCheck:
    values = func.checked(samples)
    mirrored = func.checked(-samples)
    violation = np.abs(values - sign * mirrored) / np.maximum(1.0, np.abs(values))
    worst = int(np.argmax(violation))
    if violation[worst] <= SYMMETRY_TOL:
        return HypothesisCheck(name, True)
    witness = float(abs(samples[worst]))
    return HypothesisCheck(
        name,
        False,
        witness,
        f"{func.describe()} at +/-{witness:g}: {float(func(witness)):g} vs {float(func(-witness)):g}",
    )


def _violation_midpoint(
    g: ScalarFunction, xs: NDArray[np.float64], product: NDArray[np.float64]
) -> float:
    """Midpoint of the first run of x g(x) <= 0 moving out from 0, x > 0 first.

    Run ends inside the probe interval are refined with brentq.
    """

    def h(x: float) -> float:
        return x * float(g(x))

    for sign in (1.0, -1.0):
        side = np.sign(xs) == sign
        order = np.argsort(np.abs(xs[side]))
        x, p = xs[side][order], product[side][order]
        bad = np.flatnonzero(p <= 0)
        if bad.size == 0:
            continue
        start = stop = int(bad[0])
        while stop + 1 < len(p) and p[stop + 1] <= 0:
            stop += 1
        inner = float(x[start]) if start == 0 else float(brentq(h, x[start - 1], x[start]))
        outer = float(x[stop]) if stop == len(p) - 1 else float(brentq(h, x[stop], x[stop + 1]))
        witness = 0.5 * (inner + outer)
        if h(witness) <= 0:
            return witness
        return float(x[start + int(np.argmin(p[start : stop + 1]))])
    raise ValueError("no sample violates x*g(x) > 0")


def _sign_positive_check(g: ScalarFunction, samples: NDArray[np.float64]) -> HypothesisCheck:
    nonzero = samples[samples != 0.0]
    product = nonzero * g.checked(nonzero)
    if np.all(product > 0):
        return HypothesisCheck(CHECK_X_G_POSITIVE, True)
    witness = _violation_midpoint(g, nonzero, product)
    return HypothesisCheck(
        CHECK_X_G_POSITIVE, False, witness, f"x*g(x) = {witness * float(g(witness)):g}"
    )


def _unbounded_check(
    name: str, primitive: ScalarFunction, integrand: ScalarFunction, radius: float
) -> HypothesisCheck:
    value = float(primitive.checked(radius))
    slope = float(integrand.checked(radius))
    if value > 0 and slope > 0:
        return HypothesisCheck(name, True)
    return HypothesisCheck(
        name, False, radius, f"value {value:g}, slope {slope:g} at the probe boundary"
    )


def _unique_zero_check(
    F: ScalarFunction, radius: float
) -> tuple[HypothesisCheck, float | None]:
    grid = np.linspace(radius / ZERO_SCAN_SAMPLES, radius, ZERO_SCAN_SAMPLES)
    signs = np.sign(F.checked(grid))
    nonzero = signs != 0
    zeros: list[float] = []
    exact = grid[~nonzero]
    zeros.extend(float(x) for x in exact)
    compact_grid, compact_signs = grid[nonzero], signs[nonzero]
    for i in np.flatnonzero(compact_signs[:-1] * compact_signs[1:] < 0):
        lo, hi = float(compact_grid[i]), float(compact_grid[i + 1])
        zeros.append(float(brentq(lambda x: float(F(x)), lo, hi, xtol=1e-14)))
    zeros.sort()
    if len(zeros) == 1:
        return HypothesisCheck(CHECK_F_UNIQUE_ZERO, True, zeros[0]), zeros[0]
    if not zeros:
        return (
            HypothesisCheck(CHECK_F_UNIQUE_ZERO, False, radius, "F has no positive zero"),
            None,
        )
    return (
        HypothesisCheck(
            CHECK_F_UNIQUE_ZERO, False, zeros[1], f"F has {len(zeros)} positive zeros"
        ),
        zeros[0],
    )


def hypothesis_check(system: LienardSystem, probe_radius: float) -> HypothesisReport:
    """Probe the standing hypotheses on [-probe_radius, probe_radius].

    The report is advisory; nothing downstream is blocked by a failure.

    Raises:
        ValueError: If probe_radius is not positive.
        InvalidFunction: If f, g or their primitives evaluate to non-finite values.

    """
    if not probe_radius > 0:
        raise ValueError("probe_radius must be positive")

    # Descending order so ties in the worst violation resolve to positive x
    samples = np.linspace(probe_radius, -probe_radius, SYMMETRY_SAMPLES)
    unique_zero, zero = _unique_zero_check(system.F, probe_radius)
    smooth = all(
        func.smoothness is None or func.smoothness >= 2 for func in (system.f, system.g)
    )
    checks = (
        _symmetry_check(CHECK_F_EVEN, system.f, samples, 1.0),
        _symmetry_check(CHECK_G_ODD, system.g, samples, -1.0),
        _sign_positive_check(system.g, samples),
        _unbounded_check(CHECK_F_UNBOUNDED, system.F, system.f, probe_radius),
        _unbounded_check(CHECK_G_UNBOUNDED, system.G, system.g, probe_radius),
        unique_zero,
        HypothesisCheck(CHECK_TWICE_DIFFERENTIABLE, smooth),
    )
    report = HypothesisReport(probe_radius, checks, zero)
    if report.passed:
        _LOGGER.debug("All hypotheses hold on radius %g", probe_radius)
    else:
        _LOGGER.warning(
            "Hypotheses failing on radius %g: %s", probe_radius, ", ".join(report.failed)
        )
    return report


def system_from_json(document: dict[str, Any]) -> LienardSystem:
    """Build a system from its JSON document, rejecting unknown keys.

    Raises:
        ScenarioError: With the offending key path when validation fails.

    """
    try:
        data = SYSTEM_SCHEMA(document)
    except vol.Invalid as err:
        raise ScenarioError(
            f"Invalid system definition: {err}", [str(p) for p in err.path]
        ) from err

    try:
        f = ScalarFunction.from_json(data["f"])
        g = ScalarFunction.from_json(data["g"])
    except ValidationError as err:
        raise ScenarioError(f"Invalid function: {err}", ["f/g"]) from err

    perturbation = None
    if "perturbation" in data:
        try:
            perturbation = Perturbation.from_json(data["perturbation"])
        except ValidationError as err:
            raise ScenarioError(
                f"Invalid perturbation: {err}", ["perturbation"]
            ) from err
    elif data["epsilon"] != 0.0:
        raise ScenarioError("epsilon must be 0 without a perturbation", ["epsilon"])

    return LienardSystem(
        f=f, g=g, perturbation=perturbation, epsilon=data["epsilon"], tau=data["tau"]
    )


def system_to_json(system: LienardSystem) -> dict[str, Any]:
    """Serialize a system to its JSON document."""
    document: dict[str, Any] = {
        "f": system.f.to_json(),
        "g": system.g.to_json(),
        "epsilon": system.epsilon,
        "tau": system.tau,
    }
    if system.perturbation is not None:
        document["perturbation"] = system.perturbation.to_json()
    return document
