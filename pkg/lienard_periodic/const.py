"""Constants for the Liénard periodic-orbit toolkit."""

from __future__ import annotations

from importlib import metadata
from typing import Final


def _get_version_from_metadata() -> str:
    """Read version from installed package metadata."""
    try:
        return metadata.version("lienard-periodic")
    except metadata.PackageNotFoundError:
        return "0.0.0"


# Package identity
PACKAGE_VERSION: Final = _get_version_from_metadata()

# Integrator defaults for every reported computation
DEFAULT_RTOL: Final = 1e-10
DEFAULT_ATOL: Final = 1e-12
MIN_TOLERANCE: Final = 1e-14
MAX_TOLERANCE: Final = 1e-2

# Step control
MAX_REJECTIONS_PER_STEP: Final = 50
MAX_STEPS: Final = 2_000_000
STEP_SAFETY: Final = 0.9
STEP_MIN_FACTOR: Final = 0.2
STEP_MAX_FACTOR: Final = 10.0

# Section events
EVENT_MAX_ITERATIONS: Final = 80
EVENT_RESIDUAL_TOL: Final = 1e-10

# Limit cycle shooting
CYCLE_NEWTON_MAX_STEPS: Final = 20
CYCLE_UPDATE_TOL: Final = 1e-10
CYCLE_CLOSURE_TOL: Final = 1e-8
CYCLE_SINGULAR_TOL: Final = 1e-8
CYCLE_FD_STEP: Final = 1e-6
CYCLE_RETURN_HORIZON: Final = 50.0
CYCLE_MIN_SAMPLES: Final = 512

# Floquet checks
LIOUVILLE_TOL: Final = 1e-7
MULTIPLIER_REL_TOL: Final = 1e-5
TRIANGULAR_TOL: Final = 1e-6
SIMPLE_MULTIPLIER_TOL: Final = 1e-8
DEGENERATE_AMPLITUDE_TOL: Final = 1e-12

# Certificate grids
SUP_NORM_SAMPLES: Final = 4096
Q_GRID_PHASES: Final = 128
Q_GRID_STATES: Final = 64
PERIOD_WINDOW_DELTA: Final = 1e-6
DEFAULT_RADIUS: Final = 3.0

# Perturbed solver
PERTURBED_RTOL: Final = 1e-12
PERTURBED_ATOL: Final = 1e-13
PERTURBED_MAX_ITERATIONS: Final = 25
PERTURBED_RESIDUAL_TOL: Final = 1e-10
PERTURBED_STEP_TOL: Final = 1e-10
PERTURBED_MAX_HALVINGS: Final = 8
PERTURBED_FD_STEP: Final = 1e-6
PERTURBED_MAX_CONDITION: Final = 1e12
EPSILON_CAP: Final = 10.0

# Hypothesis probing
SYMMETRY_SAMPLES: Final = 101
SYMMETRY_TOL: Final = 1e-10
ZERO_SCAN_SAMPLES: Final = 4096

# Loud bifurcation function
LOUD_MIN_SAMPLES: Final = 1024
LOUD_ZERO_MIN_SAMPLES: Final = 256
LOUD_ZERO_TOL: Final = 1e-10
LOUD_DEGENERATE_TOL: Final = 1e-6
LOUD_IDENTICALLY_ZERO_TOL: Final = 1e-9
LOUD_PERIODICITY_TOL: Final = 1e-8

# Moser example
MOSER_MAX_EPSILON: Final = 0.5
MOSER_CHECK_SAMPLES: Final = 10_000
MOSER_MIN_PERIODS: Final = 20
MOSER_MONOTONE_TOL: Final = 1e-9
MOSER_STRICT_DECAY: Final = 1e-12
MOSER_SCAN_SAMPLES: Final = 4000
MOSER_RTOL: Final = 1e-12
MOSER_ATOL: Final = 1e-14
MOSER_RATE_GAP_TOL: Final = 1e-6
MOSER_FD_STEP: Final = 1e-3
MOSER_PERIOD: Final = 1.0

# Scenario defaults
DEFAULT_A_GUESS: Final = 2.0
DEFAULT_TAU: Final = 6.283185307179586
DEFAULT_LOUD_SAMPLES: Final = 1024
DEFAULT_MOSER_EPSILON: Final = 0.2
DEFAULT_MOSER_TRAJECTORIES: Final = 100
DEFAULT_MOSER_T_FINAL: Final = 20.0
DEFAULT_SEED: Final = 0
DEFAULT_JOBS: Final = 1
DEFAULT_OUTPUT_DIR: Final = "out"

# CLI exit codes
EXIT_OK: Final = 0
EXIT_VALIDATION_ERROR: Final = 2
EXIT_NUMERICAL_ERROR: Final = 3

# Artifacts
CSV_FLOAT_FORMAT: Final = "%.12e"
DIAGNOSTICS_FILE: Final = "diagnostics.json"
RESOLVED_SCENARIO_FILE: Final = "scenario.resolved.json"
