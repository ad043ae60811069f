"""Sup-norm constants and the existence certificate for the perturbed system.

Constants are taken over the disk S of radius r around the origin of the
(u, u') plane, written in the farkas frame as
x2^2 + (-x1 - F(x2))^2 < r^2. They are computed by dense sampling with local
refinement and are converged rather than rigorous.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar

from .const import (
    DEFAULT_ATOL,
    DEFAULT_RADIUS,
    DEFAULT_RTOL,
    PERIOD_WINDOW_DELTA,
    Q_GRID_PHASES,
    Q_GRID_STATES,
    SUP_NORM_SAMPLES,
)
from .floquet import FloquetData, matrix_max_norm, variational_along_orbit
from .functions import PerturbationKind, ScalarFunction
from .limit_cycle import PeriodicOrbit, inside_s, orbit_geometry
from .system import LienardSystem

_LOGGER = logging.getLogger(__name__)

REASON_AMPLITUDE = "amplitude inequality"
REASON_PERIOD = "period window"
REASON_PHASE = "phase bound"
REASON_MULTIPLIER = "multiplier condition"

CERTIFICATE_CSV_HEADER = (
    "epsilon",
    "h",
    "tau",
    "phi",
    "lhs",
    "rhs",
    "lhs_q0",
    "epsilon0",
    "verdict",
    "reasons",
)

# local maxima refined per sup norm
_REFINED_MAXIMA = 8


def sup_norm(
    func: Callable[[NDArray[np.float64]], Any],
    lower: float,
    upper: float,
    n_samples: int = SUP_NORM_SAMPLES,
) -> float:
    """max |func| on [lower, upper] by sampling plus bounded refinement."""
    xs = np.linspace(lower, upper, n_samples)
    values = np.abs(np.asarray(func(xs), dtype=float))
    best = float(np.max(values))
    interior = np.flatnonzero(
        (values[1:-1] >= values[:-2]) & (values[1:-1] >= values[2:])
    ) + 1
    ranked = interior[np.argsort(values[interior])[::-1][:_REFINED_MAXIMA]]
    for i in ranked:
        result = minimize_scalar(
            lambda x: -float(np.max(np.abs(np.asarray(func(np.asarray(x)), dtype=float)))),
            bounds=(float(xs[i - 1]), float(xs[i + 1])),
            method="bounded",
            options={"xatol": 1e-12},
        )
        best = max(best, -float(result.fun))
    return best


@dataclass(frozen=True)
class EstimateConstants:
    """Sup-norm constants over S and along the cycle."""

    g0: float
    g1: float
    g2: float
    f1: float
    f2: float
    q0: float
    q1: float
    q2: float
    K: float
    K_inv: float
    P: float
    r: float
    sigma: float
    tau0: float
    a: float
    rho2: float
    closed_form_q: dict[str, float] | None = field(default=None, compare=False)

    @property
    def K_half(self) -> float:
        """K / 2, reported next to P."""
        return 0.5 * self.K

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready view."""
        data: dict[str, Any] = {
            item.name: getattr(self, item.name)
            for item in fields(self)
            if item.name != "closed_form_q"
        }
        data["K_half"] = self.K_half
        if self.closed_form_q is not None:
            data["closed_form_q"] = dict(self.closed_form_q)
        return data


@dataclass(frozen=True)
class ExistenceCertificate:
    """Verdict of the existence inequality with every intermediate number."""

    constants: EstimateConstants
    epsilon: float
    h: float
    tau: float
    phi: float
    lhs: float
    rhs: float
    lhs_q0: float
    epsilon0: float
    tau1: float
    tau_window: tuple[float, float]
    phi_bound: float
    condition10: bool
    verdict: bool
    reasons: tuple[str, ...]

    def inequality_lhs(self, epsilon: float, h: float) -> float:
        """Left side (3/2) g0 |eps| + |h| for another (eps, h)."""
        return 1.5 * self.constants.g0 * abs(epsilon) + abs(h)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready view."""
        return {
            "constants": self.constants.to_dict(),
            "epsilon": self.epsilon,
            "h": self.h,
            "tau": self.tau,
            "phi": self.phi,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "lhs_q0": self.lhs_q0,
            "epsilon0": self.epsilon0,
            "tau1": self.tau1,
            "tau_window": list(self.tau_window),
            "phi_bound": self.phi_bound,
            "condition10": self.condition10,
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "P": self.constants.P,
            "K_half": self.constants.K_half,
        }


def _state_grid(system: LienardSystem, r: float) -> tuple[NDArray[np.float64], ...]:
    """(x1, x2, u, v) points of a square grid over [-r, r]^2 restricted to S."""
    axis = np.linspace(-r, r, Q_GRID_STATES)
    u, v = np.meshgrid(axis, axis, indexing="ij")
    u, v = u.ravel(), v.ravel()
    x1 = -v - system.F(u)
    x2 = u
    mask = inside_s(system, x1, x2, r)
    return x1[mask], x2[mask], u[mask], v[mask]


def q_constants(system: LienardSystem, r: float) -> tuple[float, float, float]:
    """(q0, q1, q2) for q = (q1(s, x), 0), q1 = -gamma(s, x2, -x1 - F(x2)).

    q1 is the 2 * max-entry norm of the x-derivative; q2 bounds |dq1/ds|.
    """
    gamma = system.perturbation
    if gamma is None:
        return 0.0, 0.0, 0.0
    _, x2, u, v = _state_grid(system, r)
    f_x2 = system.f(x2)
    q0 = q1 = q2 = 0.0
    for theta in np.arange(Q_GRID_PHASES) / Q_GRID_PHASES:
        phase = np.full_like(u, theta)
        value = np.asarray(gamma(phase, u, v), dtype=float)
        d_theta, d_u, d_udot = (np.asarray(d, dtype=float) for d in gamma.gradient(phase, u, v))
        dq_dx1 = d_udot
        dq_dx2 = -d_u + f_x2 * d_udot
        q0 = max(q0, float(np.max(np.abs(value))))
        q1 = max(q1, 2.0 * float(np.max(np.maximum(np.abs(dq_dx1), np.abs(dq_dx2)))))
        q2 = max(q2, float(np.max(np.abs(d_theta))))
    return q0, q1, q2


def closed_form_q(forcing: ScalarFunction) -> dict[str, float]:
    """q constants of a time-only perturbation: sup|e|, 0, sup|e'| over one period."""
    derivative = forcing.derivative()
    return {
        "q0": sup_norm(forcing, 0.0, 1.0),
        "q1": 0.0,
        "q2": sup_norm(derivative, 0.0, 1.0),
    }


def _path_norms(
    system: LienardSystem,
    orbit: PeriodicOrbit,
    fd: FloquetData,
    rtol: float,
    atol: float,
) -> tuple[float, float]:
    """K and K_inv over [-tau0/2, tau0]."""
    backward = variational_along_orbit(system, orbit, -0.5 * orbit.tau0, rtol, atol)
    negative = np.linspace(-0.5 * orbit.tau0, 0.0, len(fd.times) // 2 + 1)
    Y_back = np.array([backward.fundamental(float(t)) for t in negative])
    Y_all = np.concatenate((Y_back, fd.Y))
    K = max(matrix_max_norm(Y) for Y in Y_all)
    K_inv = max(matrix_max_norm(Y) for Y in np.linalg.inv(Y_all))
    return K, K_inv


def _p_dot_max(system: LienardSystem, orbit: PeriodicOrbit) -> float:
    """max |(g(u0), u0')| over one period."""

    def speed(t: NDArray[np.float64]) -> NDArray[np.float64]:
        times = np.atleast_1d(t)
        states = orbit.trajectory.sample(np.clip(times, 0.0, orbit.tau0))
        return np.hypot(system.g(states[:, 0]), states[:, 1])

    return sup_norm(speed, 0.0, orbit.tau0)


def compute_constants(
    system: LienardSystem,
    orbit: PeriodicOrbit,
    fd: FloquetData,
    r: float = DEFAULT_RADIUS,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> EstimateConstants:
    """Compute every constant of the existence inequality.

    Raises:
        ValueError: If r is not positive.
        OrbitOutsideS: If the orbit does not fit inside S.

    """
    geometry = orbit_geometry(orbit, r)
    g0 = sup_norm(system.g, -r, r)
    g1 = sup_norm(system.g_prime, -r, r)
    g2 = sup_norm(system.g_second, -r, r)
    f1 = sup_norm(system.f, -r, r)
    f2 = sup_norm(system.f_prime, -r, r)
    q0, q1, q2 = q_constants(system, r)

    closed = None
    perturbation = system.perturbation
    if (
        perturbation is not None
        and perturbation.kind is PerturbationKind.TIME_ONLY
        and perturbation.custom is None
        and perturbation.forcing is not None
    ):
        closed = closed_form_q(perturbation.forcing)

    K, K_inv = _path_norms(system, orbit, fd, rtol, atol)
    P = _p_dot_max(system, orbit)
    rho2 = fd.rho2 if fd.rho2 is not None else math.exp(-fd.damping_integral)
    constants = EstimateConstants(
        g0=g0,
        g1=g1,
        g2=g2,
        f1=f1,
        f2=f2,
        q0=q0,
        q1=q1,
        q2=q2,
        K=K,
        K_inv=K_inv,
        P=P,
        r=r,
        sigma=geometry.sigma,
        tau0=orbit.tau0,
        a=orbit.a,
        rho2=rho2,
        closed_form_q=closed,
    )
    _LOGGER.debug("Estimate constants: %s", constants.to_dict())
    return constants


def epsilon_bound(constants: EstimateConstants) -> float:
    """Largest admissible |eps| at h = 0: 2 sigma exp(-3/2 g1 tau0) / (3 g0)."""
    if constants.g0 == 0.0:
        return math.inf
    rhs = constants.sigma * math.exp(-1.5 * constants.g1 * constants.tau0)
    return 2.0 * rhs / (3.0 * constants.g0)


def certify(
    constants: EstimateConstants,
    epsilon: float,
    h_shift: float,
    tau: float,
    phi: float,
    condition10: bool,
) -> ExistenceCertificate:
    """Evaluate the existence conditions for (eps, h, tau, phi).

    The verdict is false with reasons when any condition fails; nothing is
    raised.
    """
    tau0 = constants.tau0
    rhs = constants.sigma * math.exp(-1.5 * constants.g1 * tau0)
    lhs = 1.5 * constants.g0 * abs(epsilon) + abs(h_shift)
    lhs_q0 = 1.5 * constants.q0 * abs(epsilon) + abs(h_shift)
    tau1 = 0.5 * tau0 - PERIOD_WINDOW_DELTA
    phi_bound = 0.5 * tau0

    reasons: list[str] = []
    if not lhs < rhs:
        reasons.append(REASON_AMPLITUDE)
    if not abs(tau - tau0) < 0.5 * tau0:
        reasons.append(REASON_PERIOD)
    if not phi < phi_bound:
        reasons.append(REASON_PHASE)
    if not condition10:
        reasons.append(REASON_MULTIPLIER)

    certificate = ExistenceCertificate(
        constants=constants,
        epsilon=epsilon,
        h=h_shift,
        tau=tau,
        phi=phi,
        lhs=lhs,
        rhs=rhs,
        lhs_q0=lhs_q0,
        epsilon0=epsilon_bound(constants),
        tau1=tau1,
        tau_window=(tau0 - tau1, tau0 + tau1),
        phi_bound=phi_bound,
        condition10=condition10,
        verdict=not reasons,
        reasons=tuple(reasons),
    )
    _LOGGER.info(
        "Certificate verdict=%s eps0=%.6e lhs=%.6e rhs=%.6e failed=%s",
        certificate.verdict,
        certificate.epsilon0,
        lhs,
        rhs,
        ", ".join(reasons) or "none",
    )
    return certificate


def certificate_to_csv_row(certificate: ExistenceCertificate) -> tuple[Any, ...]:
    """Row matching CERTIFICATE_CSV_HEADER."""
    return (
        float(certificate.epsilon),
        float(certificate.h),
        float(certificate.tau),
        float(certificate.phi),
        float(certificate.lhs),
        float(certificate.rhs),
        float(certificate.lhs_q0),
        float(certificate.epsilon0),
        str(certificate.verdict).lower(),
        ";".join(certificate.reasons),
    )
