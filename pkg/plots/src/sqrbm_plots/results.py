"""Load and cross-check an exported results directory.

The training package writes results directories with this layout:

    manifest.json            sqrbm-experiment v1
    summary.json             sqrbm-summary v1
    runs/<run-id>/
      trace.csv              iteration,cumulative_quantum_samples,
                             cumulative_classical_samples,kl,nll,learning_rate
      manifest.json          sqrbm-run v1

This module reads those files and nothing else; it never imports the
training package. Group statistics (median and population standard
deviation of the final KL) are recomputed here from the raw traces and
compared against summary.json, so a drifting exporter fails loudly instead
of producing a figure that silently disagrees with its inputs.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EXPERIMENT_SCHEMA = "sqrbm-experiment v1"
SUMMARY_SCHEMA = "sqrbm-summary v1"
RUN_SCHEMA = "sqrbm-run v1"
TRACE_HEADER = ("iteration,cumulative_quantum_samples,cumulative_classical_samples,"
                "kl,nll,learning_rate")
STATS_TOLERANCE = 1e-12

_SWEEP_ID = re.compile(r"^(?P<kind>[A-Za-z0-9]+)_m(?P<m>\d+)_seed(?P<seed>\d+)$")


class PlotDataError(ValueError):
    """The results directory cannot back a figure; message says why."""


class MissingRuns(PlotDataError):
    """Runs named by the experiment manifest are absent on disk."""

    def __init__(self, missing: list):
        self.missing = missing
        listing = ", ".join(str(item) for item in missing)
        super().__init__(f"{len(missing)} run(s) missing from the results "
                         f"directory: {listing}")


class StatsMismatch(PlotDataError):
    """summary.json disagrees with statistics recomputed from the traces."""


def run_identity(run_id: str):
    """(kind, m, seed) for sweep-style run ids, the raw id otherwise."""
    match = _SWEEP_ID.match(run_id)
    if match:
        return (match["kind"], int(match["m"]), int(match["seed"]))
    return run_id


@dataclass
class TraceRow:
    iteration: int
    quantum_samples: int
    classical_samples: int
    kl: float
    nll: float
    learning_rate: float


@dataclass
class RunData:
    """One run's trace plus the manifest fields the figures need."""

    run_id: str
    kind: str
    m: int
    trainer: str
    shots: int | None
    rows: list

    @property
    def final_kl(self) -> float:
        return self.rows[-1].kl

    @property
    def cumulative_samples(self) -> np.ndarray:
        """Quantum plus classical samples consumed, per trace row."""
        return np.array([r.quantum_samples + r.classical_samples for r in self.rows],
                        dtype=np.float64)

    @property
    def kl_trace(self) -> np.ndarray:
        return np.array([r.kl for r in self.rows])


@dataclass
class GroupStats:
    """Recomputed final-KL statistics for one (kind, m) sweep group."""

    kind: str
    m: int
    median: float
    std: float
    finals: list = field(default_factory=list)


@dataclass
class ResultSet:
    experiment: str
    runs: dict            # run_id -> RunData
    summary: dict         # parsed summary.json
    sweep_stats: list     # GroupStats, empty unless experiment == "sweep"


def _read_json(path: Path, schema: str) -> dict:
    if not path.is_file():
        raise PlotDataError(f"{path}: missing")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PlotDataError(f"{path}: not valid JSON ({exc})") from exc
    found = data.get("schema")
    if found != schema:
        raise PlotDataError(f"{path}: schema {found!r}, expected {schema!r}")
    return data


def load_trace(path: Path) -> list:
    if not path.is_file():
        raise PlotDataError(f"{path}: missing")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise PlotDataError(f"{path}: empty trace") from None
        if header != TRACE_HEADER.split(","):
            raise PlotDataError(f"{path}: unrecognized trace header")
        rows = [TraceRow(int(it), int(qs), int(cs), float(kl), float(nll), float(lr))
                for it, qs, cs, kl, nll, lr in reader]
    if not rows:
        raise PlotDataError(f"{path}: trace has a header but no rows")
    return rows


def _load_run(run_dir: Path) -> RunData:
    manifest = _read_json(run_dir / "manifest.json", RUN_SCHEMA)
    rows = load_trace(run_dir / "trace.csv")
    config = manifest.get("config", {})
    trainer = str(config.get("trainer", "cd"))
    final = manifest.get("final", {})
    if not math.isclose(rows[-1].kl, float(final.get("kl", rows[-1].kl)),
                        rel_tol=0.0, abs_tol=STATS_TOLERANCE):
        raise StatsMismatch(f"{run_dir}: manifest final kl {final.get('kl')} "
                            f"vs trace {rows[-1].kl}")
    totals = manifest.get("totals", {})
    if totals.get("quantum_samples") != rows[-1].quantum_samples \
            or totals.get("classical_samples") != rows[-1].classical_samples:
        raise StatsMismatch(f"{run_dir}: manifest totals {totals} vs trace "
                            f"({rows[-1].quantum_samples}, {rows[-1].classical_samples})")
    return RunData(run_id=manifest["run_id"], kind=manifest["kind"],
                   m=int(manifest["m"]), trainer=trainer,
                   shots=int(config["shots"]) if trainer == "nll" else None,
                   rows=rows)


def _check_sweep_summary(summary: dict, runs: dict) -> list:
    stats = []
    for group in summary.get("groups", []):
        ids = group.get("runs", [])
        absent = [run_identity(i) for i in ids if i not in runs]
        if absent:
            raise MissingRuns(absent)
        finals = [runs[i].final_kl for i in ids]
        median = float(np.median(finals))
        std = float(np.std(finals))
        for name, ours, theirs in (("final_kl_median", median, group.get("final_kl_median")),
                                   ("final_kl_std", std, group.get("final_kl_std"))):
            if theirs is None or not math.isclose(ours, float(theirs), rel_tol=0.0,
                                                  abs_tol=STATS_TOLERANCE):
                raise StatsMismatch(
                    f"group {group.get('label')}: recomputed {name} {ours!r} vs "
                    f"summary {theirs!r} (tolerance {STATS_TOLERANCE:g})")
        stats.append(GroupStats(kind=group["kind"], m=int(group["m"]),
                                median=median, std=std, finals=finals))
    return stats


def _check_budget_summary(summary: dict, runs: dict) -> None:
    for group in summary.get("groups", []):
        run_id = group.get("label")
        if run_id not in runs:
            raise MissingRuns([run_identity(run_id)])
        run = runs[run_id]
        if not math.isclose(run.final_kl, float(group.get("final_kl")),
                            rel_tol=0.0, abs_tol=STATS_TOLERANCE):
            raise StatsMismatch(f"{run_id}: recomputed final kl {run.final_kl!r} vs "
                                f"summary {group.get('final_kl')!r}")
        last = run.rows[-1]
        if group.get("quantum_total") != last.quantum_samples \
                or group.get("classical_total") != last.classical_samples:
            raise StatsMismatch(f"{run_id}: summary totals "
                                f"({group.get('quantum_total')}, "
                                f"{group.get('classical_total')}) vs trace "
                                f"({last.quantum_samples}, {last.classical_samples})")


def load_results(input_dir) -> ResultSet:
    """Read, validate, and cross-check one exported results directory."""
    root = Path(input_dir)
    if not root.is_dir():
        raise PlotDataError(f"{root}: not a directory")
    manifest = _read_json(root / "manifest.json", EXPERIMENT_SCHEMA)
    if manifest.get("partial"):
        failures = manifest.get("failures", [])
        raise PlotDataError(f"{root}: experiment is marked partial "
                            f"({len(failures)} failed run(s)); refusing to render")
    expected = list(manifest.get("runs", []))
    if not expected:
        raise PlotDataError(f"{root}: experiment manifest names no runs")

    missing = [run_identity(run_id) for run_id in expected
               if not (root / "runs" / run_id / "trace.csv").is_file()
               or not (root / "runs" / run_id / "manifest.json").is_file()]
    if missing:
        raise MissingRuns(missing)

    runs = {}
    for run_id in expected:
        run = _load_run(root / "runs" / run_id)
        if run.run_id != run_id:
            raise PlotDataError(f"{root}: run directory {run_id!r} holds manifest "
                                f"for {run.run_id!r}")
        runs[run_id] = run

    summary = _read_json(root / "summary.json", SUMMARY_SCHEMA)
    experiment = str(manifest.get("experiment", summary.get("experiment", "train")))
    sweep_stats = []
    if experiment == "sweep":
        sweep_stats = _check_sweep_summary(summary, runs)
    elif experiment == "budget":
        _check_budget_summary(summary, runs)
    return ResultSet(experiment=experiment, runs=runs, summary=summary,
                     sweep_stats=sweep_stats)
