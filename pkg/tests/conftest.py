"""Shared test fixtures for the Liénard periodic-orbit toolkit."""

from __future__ import annotations

import json
import math
from pathlib import Path

import pytest

from lienard_periodic.floquet import FloquetData, floquet_analysis
from lienard_periodic.limit_cycle import PeriodicOrbit, find_limit_cycle
from lienard_periodic.system import LienardSystem

from .helpers import cosine_forcing, harmonic, surrogate_orbit, vdp

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def vdp_system() -> LienardSystem:
    """Van der Pol, mu = 1."""
    return vdp(1.0)


@pytest.fixture(scope="session")
def forced_vdp_system(vdp_system: LienardSystem) -> LienardSystem:
    """Van der Pol, mu = 1, with the cosine forcing attached at eps = 0."""
    return vdp_system.with_perturbation(cosine_forcing(), 0.0)


@pytest.fixture(scope="session")
def vdp_orbit(vdp_system: LienardSystem) -> PeriodicOrbit:
    """Limit cycle of Van der Pol, mu = 1."""
    return find_limit_cycle(vdp_system, 2.0)


@pytest.fixture(scope="session")
def vdp_floquet(vdp_system: LienardSystem, vdp_orbit: PeriodicOrbit) -> FloquetData:
    """Full Floquet analysis along the mu = 1 cycle."""
    return floquet_analysis(vdp_system, vdp_orbit)


@pytest.fixture(scope="session")
def harmonic_system() -> LienardSystem:
    """Center u'' + u = 0."""
    return harmonic()


@pytest.fixture(scope="session")
def harmonic_orbit(harmonic_system: LienardSystem) -> PeriodicOrbit:
    """Orbit u0 = cos t of the center, amplitude 1."""
    return surrogate_orbit(harmonic_system, 1.0, 2 * math.pi)


@pytest.fixture
def scenario_document() -> dict:
    """Bundled Van der Pol scenario as a dict."""
    return json.loads((REPO_ROOT / "scenarios" / "vdp_mu1.json").read_text())


@pytest.fixture
def write_scenario(tmp_path: Path):
    """Write a scenario dict to a temporary file and return its path."""

    def _write(document: dict, name: str = "scenario.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document))
        return path

    return _write
