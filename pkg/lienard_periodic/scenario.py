"""Scenario documents: validation, defaults and overrides."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path
from typing import Any

import voluptuous as vol

from .const import (
    DEFAULT_A_GUESS,
    DEFAULT_ATOL,
    DEFAULT_JOBS,
    DEFAULT_LOUD_SAMPLES,
    DEFAULT_MOSER_EPSILON,
    DEFAULT_MOSER_T_FINAL,
    DEFAULT_MOSER_TRAJECTORIES,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_RADIUS,
    DEFAULT_RTOL,
    DEFAULT_SEED,
    LOUD_MIN_SAMPLES,
    MAX_TOLERANCE,
    MIN_TOLERANCE,
    MOSER_MAX_EPSILON,
    MOSER_MIN_PERIODS,
    MOSER_PERIOD,
    PERTURBED_ATOL,
    PERTURBED_RTOL,
)
from .exceptions import ScenarioError, ValidationError
from .functions import ScalarFunction
from .system import (
    FUNCTION_SCHEMA,
    SYSTEM_SCHEMA,
    LienardSystem,
    finite_float,
    positive_float,
    system_from_json,
)

_LOGGER = logging.getLogger(__name__)


_RTOL = vol.All(vol.Coerce(float), vol.Range(min=MIN_TOLERANCE, max=MAX_TOLERANCE))
_ATOL = vol.All(
    vol.Coerce(float), vol.Range(min=0.0, max=MAX_TOLERANCE, min_included=False)
)
_OPTIONAL_FLOAT = vol.Any(None, finite_float)

# e(t) = cos(2 pi t / tau0) when read in the phase domain
_DEFAULT_LOUD_FORCING: dict[str, Any] = {"catalog": "cos", "params": [1.0, 2 * math.pi, 0.0]}

CERTIFY_SCHEMA = vol.Schema(
    {
        vol.Optional("epsilon", default=0.0): finite_float,
        vol.Optional("h", default=0.0): finite_float,
        vol.Optional("tau", default=None): vol.Any(None, positive_float),
        vol.Optional("phi", default=0.0): finite_float,
    },
    extra=vol.PREVENT_EXTRA,
)

PERTURB_SCHEMA = vol.Schema(
    {
        vol.Optional("epsilon", default=None): _OPTIONAL_FLOAT,
        vol.Optional("phi", default=0.0): finite_float,
        vol.Optional("tau_guess", default=None): vol.Any(None, positive_float),
        vol.Optional("h_guess", default=0.0): finite_float,
        vol.Optional("rtol", default=PERTURBED_RTOL): _RTOL,
        vol.Optional("atol", default=PERTURBED_ATOL): _ATOL,
    },
    extra=vol.PREVENT_EXTRA,
)

SWEEP_SCHEMA = vol.Schema(
    {
        vol.Optional("eps_grid", default=[0.0, 0.01, 0.02, 0.05, 0.1]): vol.All(
            [finite_float], vol.Length(min=1)
        ),
        vol.Optional("phis", default=[0.0]): vol.All([finite_float], vol.Length(min=1)),
    },
    extra=vol.PREVENT_EXTRA,
)

LOUD_SCHEMA = vol.Schema(
    {
        vol.Optional("forcing", default=_DEFAULT_LOUD_FORCING): FUNCTION_SCHEMA,
        vol.Optional("time_domain", default=False): bool,
        vol.Optional("n_samples", default=DEFAULT_LOUD_SAMPLES): vol.All(
            vol.Coerce(int), vol.Range(min=LOUD_MIN_SAMPLES)
        ),
    },
    extra=vol.PREVENT_EXTRA,
)

MOSER_SCHEMA = vol.Schema(
    {
        vol.Optional("epsilon", default=DEFAULT_MOSER_EPSILON): vol.All(
            vol.Coerce(float),
            vol.Range(min=0.0, max=MOSER_MAX_EPSILON, min_included=False),
        ),
        vol.Optional("trajectories", default=DEFAULT_MOSER_TRAJECTORIES): vol.All(
            vol.Coerce(int), vol.Range(min=1)
        ),
        vol.Optional("t_final", default=DEFAULT_MOSER_T_FINAL): vol.All(
            vol.Coerce(float), vol.Range(min=MOSER_MIN_PERIODS * MOSER_PERIOD)
        ),
        vol.Optional("box", default=None): vol.Any(None, positive_float),
    },
    extra=vol.PREVENT_EXTRA,
)

SCENARIO_SCHEMA = vol.Schema(
    {
        vol.Required("system"): SYSTEM_SCHEMA,
        vol.Optional("r", default=DEFAULT_RADIUS): positive_float,
        vol.Optional("rtol", default=DEFAULT_RTOL): _RTOL,
        vol.Optional("atol", default=DEFAULT_ATOL): _ATOL,
        vol.Optional("a_guess", default=DEFAULT_A_GUESS): positive_float,
        vol.Optional("certify", default=dict): CERTIFY_SCHEMA,
        vol.Optional("perturb", default=dict): PERTURB_SCHEMA,
        vol.Optional("sweep", default=dict): SWEEP_SCHEMA,
        vol.Optional("loud", default=dict): LOUD_SCHEMA,
        vol.Optional("moser", default=dict): MOSER_SCHEMA,
        vol.Optional("seed", default=DEFAULT_SEED): vol.All(vol.Coerce(int), vol.Range(min=0)),
        vol.Optional("out", default=DEFAULT_OUTPUT_DIR): str,
        vol.Optional("jobs", default=DEFAULT_JOBS): vol.All(vol.Coerce(int), vol.Range(min=1)),
    },
    extra=vol.PREVENT_EXTRA,
)


@dataclass(frozen=True)
class Scenario:
    """Validated scenario with every default filled in."""

    document: dict[str, Any]
    system: LienardSystem = field(repr=False)
    forcing: ScalarFunction = field(repr=False)

    def __getitem__(self, key: str) -> Any:
        """Access a top-level scenario value."""
        return self.document[key]

    @property
    def output_dir(self) -> Path:
        """Directory receiving every artifact."""
        return Path(self.document["out"])

    def section(self, name: str) -> dict[str, Any]:
        """Return one command's parameter block."""
        return dict(self.document[name])


def validate_scenario(document: Any) -> Scenario:
    """Validate a scenario document and resolve defaults.

    Raises:
        ScenarioError: With the offending key path when validation fails.

    """
    if not isinstance(document, Mapping):
        raise ScenarioError("Scenario must be a JSON object", [])
    try:
        resolved = SCENARIO_SCHEMA(dict(document))
    except vol.Invalid as err:
        path = [str(part) for part in err.path]
        raise ScenarioError(f"Invalid scenario at '{'/'.join(path)}': {err.msg}", path) from err

    try:
        system = system_from_json(document["system"])
    except ScenarioError as err:
        raise ScenarioError(str(err), ["system", *err.path]) from err
    try:
        forcing = ScalarFunction.from_json(resolved["loud"]["forcing"])
    except ValidationError as err:
        raise ScenarioError(f"Invalid loud forcing: {err}", ["loud", "forcing"]) from err
    return Scenario(document=resolved, system=system, forcing=forcing)


def load_scenario(path: Path | str) -> Scenario:
    """Read and validate a scenario file.

    Raises:
        ScenarioError: If the file is missing, not JSON, or invalid.

    """
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except OSError as err:
        raise ScenarioError(f"Cannot read scenario {source}: {err}", []) from err
    try:
        document = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(
            f"Scenario {source} is not valid JSON (line {err.lineno}, column {err.colno})",
            [],
        ) from err
    scenario = validate_scenario(document)
    _LOGGER.debug("Loaded scenario %s", source)
    return scenario


def apply_overrides(scenario: Scenario, **overrides: Any) -> Scenario:
    """Return a copy with non-None top-level values replaced and re-validated."""
    changes = {key: value for key, value in overrides.items() if value is not None}
    if not changes:
        return scenario
    document = dict(scenario.document)
    document.update(changes)
    return validate_scenario(document)
