"""Render the two standard figures from a results directory.

Sweep: median final KL against hidden-layer size, one line per model kind
with a band of one standard deviation across seeds. Budget: KL against
cumulative samples consumed (quantum plus classical) on a log x-axis, one
line per run. Both figures are deterministic functions of the input files:
fixed ids for SVG output, no timestamps, and statistics taken from the
cross-checked load stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "sqrbm-plots"

import matplotlib.pyplot as plt  # noqa: E402

from .results import PlotDataError, ResultSet, load_results  # noqa: E402

KINDS = ("sweep", "budget")
FORMATS = (".png", ".svg")


@dataclass
class FigureSpec:
    """What to draw: which results directory, which figure, where to put it.

    log_x/log_y default per kind when left as None (sweep: linear x, log y;
    budget: log x, log y).
    """

    input_dir: Path
    kind: str
    out_path: Path
    band_alpha: float = 0.25
    log_x: bool | None = None
    log_y: bool | None = None

    def __post_init__(self):
        self.input_dir = Path(self.input_dir)
        self.out_path = Path(self.out_path)
        if self.kind not in KINDS:
            raise PlotDataError(f"figure kind must be one of {KINDS}, got {self.kind!r}")
        if self.out_path.suffix.lower() not in FORMATS:
            raise PlotDataError(f"output must end in one of {FORMATS}, "
                                f"got {self.out_path.name!r}")
        if not 0.0 < self.band_alpha <= 1.0:
            raise PlotDataError("band_alpha must be in (0, 1]")

    def resolved_axes(self) -> tuple[bool, bool]:
        log_x = (self.kind == "budget") if self.log_x is None else self.log_x
        log_y = True if self.log_y is None else self.log_y
        return log_x, log_y


def _sweep_figure(spec: FigureSpec, rs: ResultSet):
    if not rs.sweep_stats:
        raise PlotDataError(f"{spec.input_dir}: no sweep groups to plot "
                            f"(experiment {rs.experiment!r})")
    log_x, log_y = spec.resolved_axes()
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    kinds = sorted({g.kind for g in rs.sweep_stats})
    report = {"bands": 0, "groups": []}
    for kind in kinds:
        groups = sorted((g for g in rs.sweep_stats if g.kind == kind),
                        key=lambda g: g.m)
        x = [g.m for g in groups]
        median = [g.median for g in groups]
        std = [g.std for g in groups]
        lower = [max(md - sd, 0.0) for md, sd in zip(median, std)]
        upper = [md + sd for md, sd in zip(median, std)]
        ax.fill_between(x, lower, upper, alpha=spec.band_alpha)
        ax.plot(x, median, marker="o", label=kind)
        report["bands"] += 1
        report["groups"].extend({"kind": g.kind, "m": g.m, "median": g.median,
                                 "std": g.std} for g in groups)
        report["x"] = x
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_xticks(report["x"])
    ax.set_xticklabels([str(v) for v in report["x"]])
    ax.set_xlabel("hidden units")
    ax.set_ylabel("final KL divergence")
    ax.set_title("Median final KL vs hidden-layer size")
    ax.legend()
    fig.tight_layout()
    return fig, report


def _budget_sort_key(run):
    # CD runs first, then shot-based runs by shot count
    return (run.trainer != "cd", run.shots or 0, run.run_id)


def _budget_figure(spec: FigureSpec, rs: ResultSet):
    if rs.experiment != "budget":
        raise PlotDataError(f"{spec.input_dir}: experiment {rs.experiment!r} "
                            f"does not back a budget figure")
    log_x, log_y = spec.resolved_axes()
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    report = {"lines": 0, "log_x": log_x, "runs": []}
    for run in sorted(rs.runs.values(), key=_budget_sort_key):
        x = run.cumulative_samples
        y = run.kl_trace
        if log_x:
            keep = x > 0
            x, y = x[keep], y[keep]
        ax.plot(x, y, label=run.run_id)
        report["lines"] += 1
        report["runs"].append({"run_id": run.run_id, "final_kl": run.final_kl,
                               "samples": float(run.cumulative_samples[-1])})
    if log_x:
        ax.set_xscale("log")
    if log_y:
        ax.set_yscale("log")
    ax.set_xlabel("cumulative samples consumed")
    ax.set_ylabel("KL divergence")
    ax.set_title("KL vs sample budget")
    ax.legend()
    fig.tight_layout()
    return fig, report


def build_figure(spec: FigureSpec):
    """Validate the inputs and build the matplotlib figure; returns
    (figure, report) where the report carries the plotted statistics."""
    rs = load_results(spec.input_dir)
    if spec.kind == "sweep":
        return _sweep_figure(spec, rs)
    return _budget_figure(spec, rs)


def render(spec: FigureSpec) -> Path:
    """Render the figure to spec.out_path and return that path."""
    fig, _ = build_figure(spec)
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    try:
        if spec.out_path.suffix.lower() == ".svg":
            # drop the creation date so identical inputs give identical bytes
            fig.savefig(spec.out_path, metadata={"Date": None})
        else:
            fig.savefig(spec.out_path, dpi=150)
    finally:
        plt.close(fig)
    return spec.out_path
