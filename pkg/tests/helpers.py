"""Systems and orbit builders shared by the test modules."""

from __future__ import annotations

import math

import numpy as np

from lienard_periodic.functions import Perturbation, PerturbationKind, ScalarFunction
from lienard_periodic.limit_cycle import PeriodicOrbit
from lienard_periodic.ode import integrate
from lienard_periodic.system import Frame, LienardSystem, field_function

# High-accuracy shooting reference for Van der Pol, mu = 1
VDP_AMPLITUDE = 2.0086198609
VDP_PERIOD = 6.6632868593


def vdp(mu: float) -> LienardSystem:
    """Van der Pol system u'' + mu (u^2 - 1) u' + u = 0."""
    return LienardSystem(
        f=ScalarFunction.from_catalog("vdp_damping", [mu]),
        g=ScalarFunction.from_catalog("linear", [1.0]),
    )


def harmonic() -> LienardSystem:
    """Center u'' + u = 0."""
    return LienardSystem(
        f=ScalarFunction.constant(0.0), g=ScalarFunction.from_catalog("linear", [1.0])
    )


def cosine_forcing() -> Perturbation:
    """Time-only perturbation gamma = cos(2 pi theta)."""
    return Perturbation(
        kind=PerturbationKind.TIME_ONLY,
        forcing=ScalarFunction.from_catalog("cos", [1.0, 2 * math.pi, 0.0]),
    )


def unit_push() -> Perturbation:
    """Autonomous perturbation gamma = 1."""
    return Perturbation(
        kind=PerturbationKind.AUTONOMOUS, position=ScalarFunction.constant(1.0)
    )


def surrogate_orbit(system: LienardSystem, a: float, period: float) -> PeriodicOrbit:
    """PeriodicOrbit built by plain integration over a known period."""
    trajectory = integrate(field_function(system, Frame.UV), [a, 0.0], 0.0, period)
    times = np.linspace(0.0, period, 512)
    states = trajectory.sample(times)
    return PeriodicOrbit(
        system=system,
        a=a,
        tau0=period,
        trajectory=trajectory,
        closure_residual=float(np.max(np.abs(trajectory.final_state - [a, 0.0]))),
        max_radius=float(np.max(np.hypot(states[:, 0], states[:, 1]))),
        return_derivative=1.0,
        newton_steps=0,
        times=times,
        states=states,
    )
