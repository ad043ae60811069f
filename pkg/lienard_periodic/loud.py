"""First-order bifurcation function of a time-periodic forcing along the cycle.

For a forcing e(t) with the cycle's period tau0,

    F(s) = integral over one period of u0'(t + s) e(t) dt.

Simple zeros of F mark phases where a periodic solution of the weakly forced
system is expected to persist. On a uniform grid the periodic trapezoid rule
turns F into a circular cross-correlation, evaluated with the FFT.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq, minimize_scalar

from .const import (
    DEFAULT_LOUD_SAMPLES,
    LOUD_DEGENERATE_TOL,
    LOUD_IDENTICALLY_ZERO_TOL,
    LOUD_MIN_SAMPLES,
    LOUD_PERIODICITY_TOL,
    LOUD_ZERO_MIN_SAMPLES,
    LOUD_ZERO_TOL,
)
from .exceptions import NonPeriodicForcing
from .limit_cycle import PeriodicOrbit
from .reports import write_csv

_LOGGER = logging.getLogger(__name__)

BIFURCATION_CSV_HEADER = ("s", "F", "Fprime")

# forcing samples compared against their one-period shift
_PERIODICITY_PROBES = 64


@dataclass(frozen=True)
class BifurcationFunction:
    """Samples of F on a uniform grid over [0, tau0) with their spectrum."""

    tau0: float
    s_grid: NDArray[np.float64] = field(repr=False)
    values: NDArray[np.float64] = field(repr=False)
    derivative_samples: NDArray[np.float64] = field(repr=False)
    coefficients: NDArray[np.complex128] = field(repr=False)

    @property
    def n_samples(self) -> int:
        """Grid size."""
        return len(self.s_grid)

    @property
    def integral(self) -> float:
        """Integral of F over one period."""
        return float(self.tau0 * np.mean(self.values))

    @property
    def periodicity_gap(self) -> float:
        """|F(0) - F(tau0)| from the interpolant."""
        return abs(float(self.value(self.tau0)) - float(self.values[0]))

    def _wavenumbers(self) -> NDArray[np.float64]:
        n = self.n_samples
        return np.fft.fftfreq(n, d=1.0 / n) * (2 * np.pi / self.tau0)

    def value(self, s: ArrayLike) -> NDArray[np.float64]:
        """Trigonometric interpolant of F at ``s``."""
        points = np.asarray(s, dtype=float)
        phases = np.exp(1j * np.multiply.outer(points, self._wavenumbers()))
        return np.asarray((phases @ self.coefficients).real)

    def derivative(self, s: ArrayLike) -> NDArray[np.float64]:
        """Derivative of the trigonometric interpolant at ``s``."""
        points = np.asarray(s, dtype=float)
        k = self._wavenumbers()
        if self.n_samples % 2 == 0:
            k = k.copy()
            k[self.n_samples // 2] = 0.0
        phases = np.exp(1j * np.multiply.outer(points, self._wavenumbers()))
        return np.asarray((phases @ (1j * k * self.coefficients)).real)

    @classmethod
    def from_samples(cls, values: ArrayLike, tau0: float) -> BifurcationFunction:
        """Build from samples of F at s_k = k tau0 / n, k = 0..n-1."""
        samples = np.asarray(values, dtype=float)
        n = len(samples)
        if n < LOUD_ZERO_MIN_SAMPLES:
            raise ValueError(f"Need at least {LOUD_ZERO_MIN_SAMPLES} samples, got {n}")
        if not tau0 > 0:
            raise ValueError(f"tau0 must be positive, got {tau0!r}")
        coefficients = np.fft.fft(samples) / n
        k = np.fft.fftfreq(n, d=1.0 / n) * (2 * np.pi / tau0)
        if n % 2 == 0:
            k[n // 2] = 0.0
        derivative = np.fft.ifft(1j * k * np.fft.fft(samples)).real
        return cls(
            tau0=tau0,
            s_grid=np.arange(n) * tau0 / n,
            values=samples,
            derivative_samples=derivative,
            coefficients=coefficients,
        )


@dataclass(frozen=True)
class BifurcationZero:
    """Zero s0 of F with F'(s0)."""

    s0: float
    value: float
    derivative: float
    simple: bool


@dataclass(frozen=True)
class ZeroSearch:
    """Zeros of F split into simple and degenerate ones."""

    simple: tuple[BifurcationZero, ...]
    degenerate: tuple[BifurcationZero, ...]
    identically_zero: bool

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready view."""

        def row(zero: BifurcationZero) -> dict[str, float]:
            return {"s0": zero.s0, "F": zero.value, "Fprime": zero.derivative}

        return {
            "identically_zero": self.identically_zero,
            "simple": [row(z) for z in self.simple],
            "degenerate": [row(z) for z in self.degenerate],
        }


def check_periodic_forcing(
    e: Callable[[NDArray[np.float64]], Any], tau0: float
) -> float:
    """Max |e(t + tau0) - e(t)| on probe points.

    Raises:
        NonPeriodicForcing: If the forcing is not tau0-periodic.

    """
    probes = np.linspace(0.0, tau0, _PERIODICITY_PROBES, endpoint=False)
    base = np.asarray(e(probes), dtype=float)
    shifted = np.asarray(e(probes + tau0), dtype=float)
    gap = float(np.max(np.abs(shifted - base)))
    scale = max(1.0, float(np.max(np.abs(base))))
    if not gap <= LOUD_PERIODICITY_TOL * scale:
        raise NonPeriodicForcing(
            f"Forcing is not periodic with tau0={tau0:.12g} (gap {gap:.3e})"
        )
    return gap


def bifurcation_function(
    orbit: PeriodicOrbit,
    e: Callable[[NDArray[np.float64]], Any],
    n_samples: int = DEFAULT_LOUD_SAMPLES,
) -> BifurcationFunction:
    """Sample F(s) on n uniform phases by FFT cross-correlation.

    Raises:
        ValueError: If n_samples is below 1024.
        NonPeriodicForcing: If e is not tau0-periodic.

    """
    if n_samples < LOUD_MIN_SAMPLES:
        raise ValueError(f"n_samples must be at least {LOUD_MIN_SAMPLES}, got {n_samples}")
    tau0 = orbit.tau0
    check_periodic_forcing(e, tau0)
    grid = np.arange(n_samples) * tau0 / n_samples
    udot = orbit.trajectory.sample(grid)[:, 1]
    forcing = np.asarray(e(grid), dtype=float) * np.ones_like(grid)
    values = tau0 / n_samples * np.fft.ifft(np.fft.fft(udot) * np.conj(np.fft.fft(forcing))).real
    bf = BifurcationFunction.from_samples(values, tau0)
    _LOGGER.debug(
        "Bifurcation function: n=%d max|F|=%.3e integral=%.3e",
        n_samples,
        float(np.max(np.abs(values))),
        bf.integral,
    )
    return bf


def _candidate_roots(bf: BifurcationFunction) -> list[float]:
    values = bf.values
    n = bf.n_samples
    spacing = bf.tau0 / n
    roots: list[float] = []

    def scalar(s: float) -> float:
        return float(bf.value(s))

    for k in range(n):
        s_lo = float(bf.s_grid[k])
        s_hi = s_lo + spacing
        lo, hi = values[k], values[(k + 1) % n]
        if lo == 0.0:
            roots.append(s_lo)
        elif lo * hi < 0:
            roots.append(float(brentq(scalar, s_lo, s_hi, xtol=1e-14, maxiter=200)))
        else:
            # local minimum of |F| without a sign change: possible even-order root
            prev = abs(values[k - 1])
            here, after = abs(lo), abs(hi)
            if here <= prev and here <= after:
                result = minimize_scalar(
                    lambda s: abs(scalar(s)),
                    bounds=(s_lo - spacing, s_hi),
                    method="bounded",
                    options={"xatol": 1e-13},
                )
                if float(result.fun) < LOUD_ZERO_TOL:
                    roots.append(float(result.x))

    unique: list[float] = []
    for root in sorted(np.mod(roots, bf.tau0)):
        distance = min(
            (min(abs(root - u), bf.tau0 - abs(root - u)) for u in unique), default=np.inf
        )
        if distance > 0.5 * spacing:
            unique.append(float(root))
    return unique


def find_simple_zeros(bf: BifurcationFunction) -> ZeroSearch:
    """Locate zeros of F and classify them by |F'(s0)|.

    Zeros with |F'(s0)| < 1e-6 are degenerate and kept out of ``simple``.
    """
    if bf.n_samples < LOUD_ZERO_MIN_SAMPLES:
        raise ValueError(f"Need at least {LOUD_ZERO_MIN_SAMPLES} samples")
    if float(np.max(np.abs(bf.values))) < LOUD_IDENTICALLY_ZERO_TOL:
        _LOGGER.info("Bifurcation function vanishes identically")
        return ZeroSearch(simple=(), degenerate=(), identically_zero=True)

    simple: list[BifurcationZero] = []
    degenerate: list[BifurcationZero] = []
    for s0 in _candidate_roots(bf):
        value = float(bf.value(s0))
        slope = float(bf.derivative(s0))
        if abs(value) > LOUD_ZERO_TOL:
            _LOGGER.debug("Dropping root candidate s=%.12g with F=%.3e", s0, value)
            continue
        zero = BifurcationZero(s0, value, slope, abs(slope) >= LOUD_DEGENERATE_TOL)
        (simple if zero.simple else degenerate).append(zero)
    _LOGGER.info(
        "Bifurcation zeros: %d simple, %d degenerate", len(simple), len(degenerate)
    )
    return ZeroSearch(tuple(simple), tuple(degenerate), identically_zero=False)


def bifurcation_rows(bf: BifurcationFunction) -> list[tuple[float, float, float]]:
    """Rows (s, F, F') for export."""
    return [
        (float(s), float(v), float(d))
        for s, v, d in zip(bf.s_grid, bf.values, bf.derivative_samples, strict=True)
    ]


def bifurcation_to_csv(bf: BifurcationFunction, path: Path | str) -> Path:
    """Write the F(s) table as CSV columns s, F, Fprime."""
    return write_csv(path, BIFURCATION_CSV_HEADER, bifurcation_rows(bf))
