"""Command-line front end: run scenario stages and write their artifacts."""

from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
import logging
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .certificate import (
    CERTIFICATE_CSV_HEADER,
    certificate_to_csv_row,
    certify,
    compute_constants,
)
from .const import (
    DEFAULT_OUTPUT_DIR,
    DIAGNOSTICS_FILE,
    EXIT_NUMERICAL_ERROR,
    EXIT_OK,
    EXIT_VALIDATION_ERROR,
    PACKAGE_VERSION,
    RESOLVED_SCENARIO_FILE,
)
from .exceptions import NumericalError, OrbitOutsideS, ScenarioError, ValidationError
from .floquet import (
    FLOQUET_CSV_HEADER,
    FloquetData,
    floquet_analysis,
    floquet_report,
    floquet_rows,
)
from .functions import Perturbation, PerturbationKind
from .limit_cycle import (
    ORBIT_CSV_HEADER,
    PeriodicOrbit,
    find_limit_cycle,
    orbit_geometry,
    orbit_rows,
)
from .loud import (
    BIFURCATION_CSV_HEADER,
    bifurcation_function,
    bifurcation_rows,
    find_simple_zeros,
)
from .moser import SCAN_CSV_HEADER, build_moser, nonexistence_scan, scan_rows
from .perturbed import (
    SOLUTION_CSV_HEADER,
    SWEEP_CSV_HEADER,
    check_periodicity,
    solution_rows,
    solve_autonomous,
    solve_perturbed,
    sweep_phases,
)
from .reports import (
    bifurcation_snapshot,
    build_diagnostics,
    hypothesis_snapshot,
    orbit_snapshot,
    perturbed_snapshot,
    scan_snapshot,
    sweep_snapshot,
    write_csv,
    write_json,
)
from .scenario import Scenario, apply_overrides, load_scenario
from .system import hypothesis_check

_LOGGER = logging.getLogger(__name__)

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_SKIPPED = "skipped"


class RunContext:
    """Scenario, output directory and results shared by the stages of one run."""

    def __init__(self, scenario: Scenario, out: Path) -> None:
        """Initialize with a validated scenario."""
        self.scenario = scenario
        self.out = out
        self.stages: dict[str, str] = {}
        self.current_stage: str | None = None
        self._orbit: PeriodicOrbit | None = None
        self._floquet: FloquetData | None = None

    @property
    def rtol(self) -> float:
        """Integrator relative tolerance of the run."""
        return float(self.scenario["rtol"])

    @property
    def atol(self) -> float:
        """Integrator absolute tolerance of the run."""
        return float(self.scenario["atol"])

    def stage(self, name: str) -> None:
        """Mark ``name`` as the running stage."""
        self.current_stage = name
        self.stages[name] = STATUS_FAILED

    def done(self, name: str, status: str = STATUS_OK) -> None:
        """Record the outcome of a stage."""
        self.stages[name] = status
        if self.current_stage == name:
            self.current_stage = None

    def orbit(self) -> PeriodicOrbit:
        """Limit cycle of the unperturbed system, computed once."""
        if self._orbit is None:
            self.stage("cycle")
            self._orbit = find_limit_cycle(
                self.scenario.system.unperturbed(),
                float(self.scenario["a_guess"]),
                self.rtol,
                self.atol,
            )
            self.done("cycle")
        return self._orbit

    def floquet(self) -> FloquetData:
        """Floquet analysis along the cycle, computed once."""
        if self._floquet is None:
            orbit = self.orbit()
            self.stage("floquet")
            self._floquet = floquet_analysis(
                self.scenario.system.unperturbed(), orbit, self.rtol, self.atol
            )
            self.done("floquet")
        return self._floquet

    def path(self, name: str) -> Path:
        """Artifact path inside the output directory."""
        return self.out / name


def _find_cycle(ctx: RunContext) -> None:
    orbit = ctx.orbit()
    ctx.stage("hypotheses")
    system = ctx.scenario.system.unperturbed()
    hypotheses = hypothesis_check(system, float(ctx.scenario["r"]))
    try:
        geometry = orbit_geometry(orbit, float(ctx.scenario["r"]))
    except OrbitOutsideS as err:
        _LOGGER.warning("%s", err)
        geometry = None
    ctx.done("hypotheses")
    write_json(
        ctx.path("find-cycle.json"),
        {"orbit": orbit_snapshot(orbit, geometry), "hypotheses": hypothesis_snapshot(hypotheses)},
    )
    write_csv(ctx.path("find-cycle.csv"), ORBIT_CSV_HEADER, orbit_rows(orbit))


def _floquet(ctx: RunContext) -> None:
    fd = ctx.floquet()
    write_json(ctx.path("floquet.json"), floquet_report(fd))
    write_csv(ctx.path("floquet.csv"), FLOQUET_CSV_HEADER, floquet_rows(fd))


def _certify(ctx: RunContext) -> None:
    orbit, fd = ctx.orbit(), ctx.floquet()
    params = ctx.scenario.section("certify")
    ctx.stage("certificate")
    constants = compute_constants(
        ctx.scenario.system, orbit, fd, float(ctx.scenario["r"]), ctx.rtol, ctx.atol
    )
    tau = params["tau"] if params["tau"] is not None else orbit.tau0
    certificate = certify(
        constants,
        params["epsilon"],
        params["h"],
        tau,
        params["phi"],
        bool(fd.condition10),
    )
    ctx.done("certificate")
    write_json(ctx.path("certify.json"), certificate.to_dict())
    write_csv(
        ctx.path("certify.csv"), CERTIFICATE_CSV_HEADER, [certificate_to_csv_row(certificate)]
    )


def _require_perturbation(ctx: RunContext, command: str) -> Perturbation:
    perturbation = ctx.scenario.system.perturbation
    if perturbation is None:
        raise ScenarioError(
            f"'{command}' needs a perturbation in the system block",
            ["system", "perturbation"],
        )
    return perturbation


def _perturb(ctx: RunContext) -> None:
    perturbation = _require_perturbation(ctx, "perturb")
    orbit, fd = ctx.orbit(), ctx.floquet()
    params = ctx.scenario.section("perturb")
    system = ctx.scenario.system
    epsilon = params["epsilon"] if params["epsilon"] is not None else system.epsilon
    ctx.stage("perturbed")
    solution = solve_perturbed(
        system,
        orbit,
        fd,
        epsilon,
        params["phi"],
        params["tau_guess"],
        params["h_guess"],
        params["rtol"],
        params["atol"],
    )
    payload: dict[str, Any] = {
        "solution": perturbed_snapshot(solution),
        "periodicity_residual": check_periodicity(solution, params["rtol"], params["atol"]),
    }
    if perturbation.kind is PerturbationKind.AUTONOMOUS:
        report = solve_autonomous(
            system,
            orbit,
            fd,
            epsilon,
            ctx.scenario.section("sweep")["phis"],
            int(ctx.scenario["jobs"]),
            params["rtol"],
            params["atol"],
        )
        payload["autonomous"] = {
            "phis": [item.phi for item in report.solutions],
            "tau_spread": report.tau_spread,
            "h_spread": report.h_spread,
        }
    ctx.done("perturbed")
    write_json(ctx.path("perturb.json"), payload)
    write_csv(ctx.path("perturb.csv"), SOLUTION_CSV_HEADER, solution_rows(solution))


def _sweep(ctx: RunContext) -> None:
    gamma = _require_perturbation(ctx, "sweep")
    orbit, fd = ctx.orbit(), ctx.floquet()
    params = ctx.scenario.section("sweep")
    perturb = ctx.scenario.section("perturb")
    ctx.stage("sweep")
    rows = sweep_phases(
        ctx.scenario.system,
        orbit,
        fd,
        gamma,
        params["eps_grid"],
        params["phis"],
        int(ctx.scenario["jobs"]),
        perturb["rtol"],
        perturb["atol"],
    )
    ctx.done("sweep")
    write_json(ctx.path("sweep.json"), sweep_snapshot(rows))
    write_csv(ctx.path("sweep.csv"), SWEEP_CSV_HEADER, [row.as_row() for row in rows])


def _loud(ctx: RunContext) -> None:
    orbit = ctx.orbit()
    params = ctx.scenario.section("loud")
    forcing = ctx.scenario.forcing
    tau0 = orbit.tau0

    def phase_forcing(t: NDArray[np.float64]) -> Any:
        return forcing(np.asarray(t) / tau0)

    e: Callable[[NDArray[np.float64]], Any] = forcing if params["time_domain"] else phase_forcing
    ctx.stage("loud")
    bf = bifurcation_function(orbit, e, int(params["n_samples"]))
    zeros = find_simple_zeros(bf)
    ctx.done("loud")
    write_json(ctx.path("loud.json"), bifurcation_snapshot(bf, zeros))
    write_csv(ctx.path("loud.csv"), BIFURCATION_CSV_HEADER, bifurcation_rows(bf))


def _moser(ctx: RunContext) -> None:
    params = ctx.scenario.section("moser")
    seed = int(ctx.scenario["seed"])
    ctx.stage("moser")
    system = build_moser(params["epsilon"], seed)
    report = nonexistence_scan(
        system,
        n_trajectories=int(params["trajectories"]),
        t_final=float(params["t_final"]),
        seed=seed,
        box=params["box"],
        jobs=int(ctx.scenario["jobs"]),
    )
    ctx.done("moser")
    payload = scan_snapshot(report)
    payload["construction_checks"] = dict(system.checks)
    write_json(ctx.path("moser.json"), payload)
    write_csv(ctx.path("moser.csv"), SCAN_CSV_HEADER, scan_rows(report))


def _pipeline(ctx: RunContext) -> None:
    _find_cycle(ctx)
    _floquet(ctx)
    _certify(ctx)
    if ctx.scenario.system.perturbation is None:
        _LOGGER.info("No perturbation in the scenario; skipping perturb and sweep")
        ctx.done("perturbed", STATUS_SKIPPED)
        ctx.done("sweep", STATUS_SKIPPED)
    else:
        _perturb(ctx)
        _sweep(ctx)
    _loud(ctx)
    _moser(ctx)
    write_json(ctx.path("pipeline.json"), {"stages": dict(ctx.stages)})
    write_csv(ctx.path("pipeline.csv"), ("stage", "status"), list(ctx.stages.items()))


COMMANDS: dict[str, Callable[[RunContext], None]] = {
    "find-cycle": _find_cycle,
    "floquet": _floquet,
    "certify": _certify,
    "perturb": _perturb,
    "sweep": _sweep,
    "loud": _loud,
    "moser": _moser,
    "pipeline": _pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per stage."""
    parser = argparse.ArgumentParser(
        prog="lienard-periodic",
        description="Periodic orbits of Liénard systems and their perturbations.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {PACKAGE_VERSION}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, type=Path, help="Scenario JSON file")
    common.add_argument("--out", type=str, default=None, help="Output directory")
    common.add_argument("--jobs", type=int, default=None, help="Worker processes")
    common.add_argument("--rtol", type=float, default=None, help="Relative tolerance")
    common.add_argument("--atol", type=float, default=None, help="Absolute tolerance")
    common.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        subparsers.add_parser(name, parents=[common], help=f"Run the {name} stage")
    return parser


def run(command: str, scenario_path: Path | str, **overrides: Any) -> int:
    """Run one subcommand and return its exit code.

    ``overrides`` replaces top-level scenario values (out, jobs, rtol, atol)
    when not None. ``diagnostics.json`` is written in every case.
    """
    ctx: RunContext | None = None
    out = Path(overrides.get("out") or DEFAULT_OUTPUT_DIR)
    stages: dict[str, str] = {"scenario": STATUS_FAILED}
    error: BaseException | None = None
    failed_stage: str | None = "scenario"
    key_path: list[str] | None = None
    code = EXIT_OK

    try:
        scenario = apply_overrides(load_scenario(scenario_path), **overrides)
        out = scenario.output_dir
        stages["scenario"] = STATUS_OK
        write_json(out / RESOLVED_SCENARIO_FILE, scenario.document, timestamp=False)
        ctx = RunContext(scenario, out)
        ctx.stages = stages
        failed_stage = command
        COMMANDS[command](ctx)
        failed_stage = None
    except (ValidationError, ValueError) as err:
        error, code = err, EXIT_VALIDATION_ERROR
        key_path = getattr(err, "path", None) or None
        _LOGGER.error("Validation error: %s", err)
    except NumericalError as err:
        error, code = err, EXIT_NUMERICAL_ERROR
        _LOGGER.error("%s: %s", type(err).__name__, err)

    if error is not None and ctx is not None and ctx.current_stage is not None:
        failed_stage = ctx.current_stage
    write_json(
        out / DIAGNOSTICS_FILE,
        build_diagnostics(command, stages, error, failed_stage, key_path),
    )
    return code


def main(argv: Sequence[str] | None = None) -> int:
    """Console entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return run(
        args.command,
        args.scenario,
        out=args.out,
        jobs=args.jobs,
        rtol=args.rtol,
        atol=args.atol,
    )
