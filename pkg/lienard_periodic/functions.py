"""Scalar functions and perturbations used to define Liénard systems.

A ScalarFunction is a polynomial plus a finite sum of sinusoids. That family
is closed under differentiation and integration, so the antiderivatives F and
G of the damping and restoring terms stay exact.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any

import numpy as np
from numpy.polynomial import polynomial as npp
from numpy.typing import ArrayLike, NDArray

from .exceptions import InvalidFunction, ValidationError

_LOGGER = logging.getLogger(__name__)

type FloatOrArray = float | NDArray[np.float64]


@dataclass(frozen=True)
class Sinusoid:
    """Term amplitude * sin(omega * x + phase)."""

    amplitude: float
    omega: float
    phase: float = 0.0

    def __call__(self, x: FloatOrArray) -> FloatOrArray:
        """Evaluate the term."""
        return self.amplitude * np.sin(self.omega * x + self.phase)


@dataclass(frozen=True)
class ScalarFunction:
    """Univariate real function: polynomial part plus sinusoids.

    Coefficients are ordered constant term first (numpy convention).
    ``catalog_id`` and ``params`` record where a catalog entry came from;
    ``smoothness`` is the differentiability tag (None means C-infinity).
    """

    coefficients: tuple[float, ...] = (0.0,)
    sinusoids: tuple[Sinusoid, ...] = ()
    catalog_id: str | None = None
    params: tuple[float, ...] = ()
    smoothness: int | None = None

    def __post_init__(self) -> None:
        """Normalize an empty coefficient list to the zero polynomial."""
        if not self.coefficients:
            object.__setattr__(self, "coefficients", (0.0,))

    def __call__(self, x: FloatOrArray) -> FloatOrArray:
        """Evaluate without finiteness checks (integrator hot path)."""
        value = npp.polyval(x, self.coefficients)
        for term in self.sinusoids:
            value = value + term(x)
        return value

    def checked(self, x: ArrayLike) -> NDArray[np.float64]:
        """Evaluate on an array and raise InvalidFunction on non-finite output."""
        arr = np.asarray(x, dtype=float)
        value = np.asarray(self(arr), dtype=float)
        if not np.all(np.isfinite(value)):
            bad = arr.reshape(-1)[~np.isfinite(value.reshape(-1))][0]
            raise InvalidFunction(
                f"{self.describe()} is not finite at x={float(bad)!r}"
            )
        return value

    @property
    def is_polynomial(self) -> bool:
        """True when there is no sinusoidal part."""
        return not self.sinusoids

    @property
    def degree(self) -> int:
        """Degree of the polynomial part."""
        return len(npp.polytrim(np.asarray(self.coefficients, dtype=float))) - 1

    def derivative(self) -> ScalarFunction:
        """Exact first derivative."""
        coeffs = npp.polyder(np.asarray(self.coefficients, dtype=float))
        terms = tuple(
            Sinusoid(t.amplitude * t.omega, t.omega, t.phase + math.pi / 2)
            for t in self.sinusoids
            if t.omega != 0.0
        )
        return ScalarFunction(
            coefficients=tuple(float(c) for c in coeffs),
            sinusoids=terms,
            smoothness=None if self.smoothness is None else self.smoothness - 1,
        )

    def second_derivative(self) -> ScalarFunction:
        """Exact second derivative."""
        return self.derivative().derivative()

    def antiderivative(self) -> ScalarFunction:
        """Exact antiderivative vanishing at 0."""
        coeffs = list(npp.polyint(np.asarray(self.coefficients, dtype=float)))
        terms: list[Sinusoid] = []
        for t in self.sinusoids:
            if t.omega == 0.0:
                # constant amplitude*sin(phase) integrates to a linear term
                coeffs[1] += t.amplitude * math.sin(t.phase)
                continue
            scale = t.amplitude / t.omega
            terms.append(Sinusoid(scale, t.omega, t.phase - math.pi / 2))
            coeffs[0] += scale * math.cos(t.phase)
        return ScalarFunction(
            coefficients=tuple(float(c) for c in coeffs),
            sinusoids=tuple(terms),
            smoothness=None if self.smoothness is None else self.smoothness + 1,
        )

    def describe(self) -> str:
        """Short human-readable label."""
        if self.catalog_id:
            return f"{self.catalog_id}{list(self.params)}"
        if self.sinusoids:
            return f"poly{list(self.coefficients)}+{len(self.sinusoids)} sinusoid(s)"
        return f"poly{list(self.coefficients)}"

    def to_json(self) -> dict[str, Any]:
        """Serialize to the system-document form."""
        if self.catalog_id is not None:
            return {"catalog": self.catalog_id, "params": list(self.params)}
        if self.sinusoids:
            raise ValidationError(
                "Only polynomial or catalog functions can be serialized"
            )
        return {"poly": list(self.coefficients)}

    @classmethod
    def polynomial(cls, coefficients: list[float] | tuple[float, ...]) -> ScalarFunction:
        """Build a polynomial from coefficients, constant term first."""
        coeffs = tuple(float(c) for c in coefficients)
        if not all(math.isfinite(c) for c in coeffs):
            raise InvalidFunction("Polynomial coefficients must be finite")
        return cls(coefficients=coeffs)

    @classmethod
    def constant(cls, value: float) -> ScalarFunction:
        """Build a constant function."""
        return cls.polynomial([value])

    @classmethod
    def from_catalog(cls, name: str, params: list[float] | tuple[float, ...]) -> ScalarFunction:
        """Build a named catalog entry."""
        if name not in CATALOG:
            raise ValidationError(f"Unknown catalog entry: {name}")
        builder, arity = CATALOG[name]
        values = tuple(float(p) for p in params)
        if len(values) != arity:
            raise ValidationError(
                f"Catalog entry {name} takes {arity} parameter(s), got {len(values)}"
            )
        if not all(math.isfinite(p) for p in values):
            raise InvalidFunction(f"Catalog entry {name} has non-finite parameters")
        base = builder(*values)
        return cls(
            coefficients=base.coefficients,
            sinusoids=base.sinusoids,
            catalog_id=name,
            params=values,
            smoothness=base.smoothness,
        )

    @classmethod
    def from_json(cls, document: dict[str, Any]) -> ScalarFunction:
        """Build from ``{"poly": [...]}`` or ``{"catalog": name, "params": [...]}``."""
        if "poly" in document:
            return cls.polynomial(document["poly"])
        return cls.from_catalog(document["catalog"], document.get("params", []))


def _vdp_damping(mu: float) -> ScalarFunction:
    return ScalarFunction(coefficients=(-mu, 0.0, mu))


def _cubic_stiffness(alpha: float, beta: float) -> ScalarFunction:
    return ScalarFunction(coefficients=(0.0, alpha, 0.0, beta))


def _linear(k: float) -> ScalarFunction:
    return ScalarFunction(coefficients=(0.0, k))


def _constant(c: float) -> ScalarFunction:
    return ScalarFunction(coefficients=(c,))


def _sin(amplitude: float, omega: float, phase: float) -> ScalarFunction:
    return ScalarFunction(sinusoids=(Sinusoid(amplitude, omega, phase),))


def _cos(amplitude: float, omega: float, phase: float) -> ScalarFunction:
    return ScalarFunction(sinusoids=(Sinusoid(amplitude, omega, phase + math.pi / 2),))


CATALOG: dict[str, tuple[Callable[..., ScalarFunction], int]] = {
    "vdp_damping": (_vdp_damping, 1),
    "cubic_stiffness": (_cubic_stiffness, 2),
    "linear": (_linear, 1),
    "constant": (_constant, 1),
    "sin": (_sin, 3),
    "cos": (_cos, 3),
}

ZERO = ScalarFunction()


class PerturbationKind(StrEnum):
    """Dependence class of a perturbation."""

    TIME_ONLY = "time_only"
    AUTONOMOUS = "autonomous"
    GENERAL = "general"


type GammaCallable = Callable[[float, float, float, float], float]


@dataclass(frozen=True)
class Perturbation:
    """Controllably periodic perturbation gamma(theta, u, udot, eps).

    Built-in forms, with theta taken modulo 1:
      time_only:  e(theta)
      autonomous: a(u) + b(u) * udot
      general:    e(theta) * (a(u) + b(u) * udot)
    A custom callable may be supplied instead; its gradient is then taken
    by central differences.
    """

    kind: PerturbationKind
    forcing: ScalarFunction | None = None
    position: ScalarFunction | None = None
    velocity: ScalarFunction | None = None
    custom: GammaCallable | None = field(default=None, compare=False)
    smoothness: str = "C2"

    def __post_init__(self) -> None:
        """Validate that the components match the declared kind."""
        object.__setattr__(self, "kind", PerturbationKind(self.kind))
        if self.custom is not None:
            return
        has_state = self.position is not None or self.velocity is not None
        if self.kind is PerturbationKind.TIME_ONLY:
            if self.forcing is None or has_state:
                raise ValidationError("time_only perturbation needs exactly a forcing")
        elif self.kind is PerturbationKind.AUTONOMOUS:
            if self.forcing is not None or not has_state:
                raise ValidationError(
                    "autonomous perturbation needs position and/or velocity terms only"
                )
        elif self.forcing is None or not has_state:
            raise ValidationError("general perturbation needs a forcing and a state term")

    def _state_term(self, u: FloatOrArray, udot: FloatOrArray) -> FloatOrArray:
        a = self.position(u) if self.position is not None else 0.0
        b = self.velocity(u) * udot if self.velocity is not None else 0.0
        return a + b

    def __call__(
        self,
        theta: FloatOrArray,
        u: FloatOrArray,
        udot: FloatOrArray,
        eps: float = 0.0,
    ) -> FloatOrArray:
        """Evaluate gamma; theta is reduced modulo 1."""
        phase = np.mod(theta, 1.0)
        if self.custom is not None:
            return self.custom(phase, u, udot, eps)  # type: ignore[arg-type]
        if self.kind is PerturbationKind.TIME_ONLY:
            assert self.forcing is not None
            return self.forcing(phase) + 0.0 * u
        if self.kind is PerturbationKind.AUTONOMOUS:
            return self._state_term(u, udot) + 0.0 * phase
        assert self.forcing is not None
        return self.forcing(phase) * self._state_term(u, udot)

    def gradient(
        self, theta: FloatOrArray, u: FloatOrArray, udot: FloatOrArray
    ) -> tuple[FloatOrArray, FloatOrArray, FloatOrArray]:
        """Partial derivatives (d/dtheta, d/du, d/dudot) of gamma."""
        phase = np.mod(theta, 1.0)
        if self.custom is not None:
            step = 1e-6
            d_theta = (self(phase + step, u, udot) - self(phase - step, u, udot)) / (2 * step)
            d_u = (self(phase, u + step, udot) - self(phase, u - step, udot)) / (2 * step)
            d_udot = (self(phase, u, udot + step) - self(phase, u, udot - step)) / (2 * step)
            return d_theta, d_u, d_udot

        zero = 0.0 * (phase + u + udot)
        d_pos = self.position.derivative()(u) if self.position is not None else 0.0
        d_vel = self.velocity.derivative()(u) * udot if self.velocity is not None else 0.0
        d_u_state = d_pos + d_vel + zero
        d_udot_state = (self.velocity(u) if self.velocity is not None else 0.0) + zero

        if self.kind is PerturbationKind.AUTONOMOUS:
            return zero, d_u_state, d_udot_state
        assert self.forcing is not None
        e = self.forcing(phase)
        d_e = self.forcing.derivative()(phase)
        if self.kind is PerturbationKind.TIME_ONLY:
            return d_e + zero, zero, zero
        state = self._state_term(u, udot)
        return d_e * state, e * d_u_state, e * d_udot_state

    def check_kind(self, n_samples: int = 64, seed: int = 0) -> bool:
        """Sample gamma to confirm its dependence matches the declared kind."""
        rng = np.random.default_rng(seed)
        theta = rng.uniform(0.0, 1.0, n_samples)
        u = rng.uniform(-2.0, 2.0, n_samples)
        udot = rng.uniform(-2.0, 2.0, n_samples)
        base = np.array([float(self(t, x, y)) for t, x, y in zip(theta, u, udot, strict=True)])
        if self.kind is PerturbationKind.AUTONOMOUS:
            shifted = np.array(
                [float(self(t + 0.37, x, y)) for t, x, y in zip(theta, u, udot, strict=True)]
            )
        elif self.kind is PerturbationKind.TIME_ONLY:
            shifted = np.array(
                [float(self(t, x + 0.5, y - 0.5)) for t, x, y in zip(theta, u, udot, strict=True)]
            )
        else:
            return True
        return bool(np.allclose(base, shifted, rtol=1e-12, atol=1e-12))

    def to_json(self) -> dict[str, Any]:
        """Serialize to the system-document form."""
        if self.custom is not None:
            raise ValidationError("Custom perturbations cannot be serialized")
        document: dict[str, Any] = {"kind": str(self.kind)}
        if self.forcing is not None:
            document["forcing"] = self.forcing.to_json()
        if self.position is not None:
            document["position"] = self.position.to_json()
        if self.velocity is not None:
            document["velocity"] = self.velocity.to_json()
        return document

    @classmethod
    def from_json(cls, document: dict[str, Any]) -> Perturbation:
        """Build from a perturbation document."""

        def _part(key: str) -> ScalarFunction | None:
            return ScalarFunction.from_json(document[key]) if key in document else None

        return cls(
            kind=PerturbationKind(document["kind"]),
            forcing=_part("forcing"),
            position=_part("position"),
            velocity=_part("velocity"),
        )

    @classmethod
    def from_callable(cls, gamma: GammaCallable, kind: PerturbationKind | str) -> Perturbation:
        """Wrap an arbitrary callable and verify its declared kind by sampling."""
        perturbation = cls(kind=PerturbationKind(kind), custom=gamma)
        if not perturbation.check_kind():
            raise ValidationError(
                f"Callable perturbation is not consistent with kind {kind}"
            )
        _LOGGER.debug("Wrapped custom perturbation of kind %s", kind)
        return perturbation
