"""Periodic orbits of Liénard systems, their Floquet data and perturbations."""

from .certificate import EstimateConstants, ExistenceCertificate, certify, compute_constants
from .const import PACKAGE_VERSION
from .floquet import FloquetData, floquet_analysis
from .functions import Perturbation, PerturbationKind, ScalarFunction
from .limit_cycle import PeriodicOrbit, find_limit_cycle, orbit_geometry
from .loud import bifurcation_function, find_simple_zeros
from .moser import MoserSystem, build_moser, nonexistence_scan
from .perturbed import PerturbedSolution, solve_perturbed, sweep_epsilon
from .system import Frame, LienardSystem, hypothesis_check, system_from_json

__version__ = PACKAGE_VERSION

__all__ = [
    "EstimateConstants",
    "ExistenceCertificate",
    "FloquetData",
    "Frame",
    "LienardSystem",
    "MoserSystem",
    "PeriodicOrbit",
    "Perturbation",
    "PerturbationKind",
    "PerturbedSolution",
    "ScalarFunction",
    "__version__",
    "bifurcation_function",
    "build_moser",
    "certify",
    "compute_constants",
    "find_limit_cycle",
    "find_simple_zeros",
    "floquet_analysis",
    "hypothesis_check",
    "nonexistence_scan",
    "orbit_geometry",
    "solve_perturbed",
    "sweep_epsilon",
    "system_from_json",
]
