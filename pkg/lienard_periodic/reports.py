"""Report snapshots and atomic artifact writers."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import fields, is_dataclass
from datetime import UTC, datetime
import io
import json
import logging
import math
import os
from pathlib import Path
import tempfile
from typing import TYPE_CHECKING, Any

import numpy as np

from .const import CSV_FLOAT_FORMAT, PACKAGE_VERSION

if TYPE_CHECKING:
    from .limit_cycle import OrbitGeometry, PeriodicOrbit
    from .loud import BifurcationFunction, ZeroSearch
    from .moser import ScanReport
    from .perturbed import PerturbedSolution, SweepRow
    from .system import HypothesisReport

_LOGGER = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Convert numpy values, tuples and non-finite floats for JSON output."""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        number = float(value)
        if math.isnan(number):
            return "nan"
        if math.isinf(number):
            return "inf" if number > 0 else "-inf"
        return number
    return value


def format_float(value: float) -> str:
    """Render a float the way every CSV artifact does."""
    return CSV_FLOAT_FORMAT % float(value)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def write_json(path: Path | str, payload: Mapping[str, Any], timestamp: bool = True) -> Path:
    """Write a JSON artifact atomically with sorted keys."""
    target = Path(path)
    document = dict(to_jsonable(payload))
    if timestamp:
        document["generated_at"] = datetime.now(UTC).isoformat()
    _atomic_write(target, json.dumps(document, sort_keys=True, indent=2) + "\n")
    _LOGGER.info("Wrote %s", target)
    return target


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render CSV with LF line endings and fixed float formatting."""
    lines: list[list[str]] = [list(header)]
    for row in rows:
        lines.append(
            [
                format_float(cell)
                if isinstance(cell, (float, np.floating))
                else str(cell)
                for cell in row
            ]
        )
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerows(lines)
    return buffer.getvalue()


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a CSV artifact atomically."""
    target = Path(path)
    _atomic_write(target, csv_text(header, rows))
    _LOGGER.info("Wrote %s", target)
    return target


def _dataclass_snapshot(obj: Any, skip: set[str] | None = None) -> dict[str, Any]:
    """Return the scalar fields of a dataclass instance."""
    if not is_dataclass(obj):
        return {}
    skip = skip or set()
    snapshot: dict[str, Any] = {}
    for item in fields(obj):
        if item.name in skip:
            continue
        value = getattr(obj, item.name, None)
        if isinstance(value, (int, float, bool, str, np.floating, np.integer)) or value is None:
            snapshot[item.name] = value
    return snapshot


def hypothesis_snapshot(report: HypothesisReport) -> dict[str, Any]:
    """Return the hypothesis probes as a JSON-ready dict."""
    return {
        "probe_radius": report.probe_radius,
        "passed": report.passed,
        "failed": report.failed,
        "positive_zero_of_F": report.positive_zero_of_F,
        "checks": {
            check.name: {
                "passed": check.passed,
                "witness": check.witness,
                "detail": check.detail,
            }
            for check in report.checks
        },
    }


def orbit_snapshot(
    orbit: PeriodicOrbit, geometry: OrbitGeometry | None = None
) -> dict[str, Any]:
    """Return the scalar data of a periodic orbit, with its placement in S."""
    snapshot = _dataclass_snapshot(orbit)
    snapshot["initial_state"] = orbit.initial_state
    snapshot["integrator"] = {
        "steps": orbit.trajectory.n_steps,
        "rejected_steps": orbit.trajectory.rejected_steps,
        "rtol": orbit.trajectory.rtol,
        "atol": orbit.trajectory.atol,
    }
    if geometry is not None:
        snapshot["geometry"] = _dataclass_snapshot(geometry)
    return snapshot


def perturbed_snapshot(solution: PerturbedSolution) -> dict[str, Any]:
    """Return the scalar data of a perturbed solve."""
    snapshot = _dataclass_snapshot(solution)
    snapshot["initial_state"] = solution.initial_state
    return snapshot


def sweep_snapshot(rows: Sequence[SweepRow]) -> dict[str, Any]:
    """Return a sweep as rows plus its stopping point."""
    failures = [row for row in rows if not row.converged]
    converged = [row for row in rows if row.converged]
    return {
        "rows": [_dataclass_snapshot(row) for row in rows],
        "n_converged": len(converged),
        "last_converged_epsilon": converged[-1].epsilon if converged else None,
        "breakdown": _dataclass_snapshot(failures[0]) if failures else None,
    }


def bifurcation_snapshot(bf: BifurcationFunction, zeros: ZeroSearch) -> dict[str, Any]:
    """Return the summary of a bifurcation function and its zeros."""
    return {
        "tau0": bf.tau0,
        "n_samples": bf.n_samples,
        "max_abs_F": float(np.max(np.abs(bf.values))),
        "integral": bf.integral,
        "periodicity_gap": bf.periodicity_gap,
        "zeros": zeros.to_dict(),
    }


def scan_snapshot(report: ScanReport) -> dict[str, Any]:
    """Return the Moser scan report."""
    return report.to_dict()


def build_diagnostics(
    command: str,
    stages: Mapping[str, str],
    error: BaseException | None = None,
    stage: str | None = None,
    key_path: Sequence[Any] | None = None,
) -> dict[str, Any]:
    """Return the diagnostics document written by every CLI run."""
    diagnostics: dict[str, Any] = {
        "package_version": PACKAGE_VERSION,
        "command": command,
        "stages": dict(stages),
        "stages_completed": [name for name, status in stages.items() if status == "ok"],
        "error": None,
    }
    if error is not None:
        diagnostics["error"] = {
            "class": type(error).__name__,
            "message": str(error),
            "stage": stage,
            "key_path": [str(part) for part in key_path] if key_path else None,
        }
    return diagnostics
