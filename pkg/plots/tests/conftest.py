import json

import numpy as np
import pytest

TRACE_HEADER = ("iteration,cumulative_quantum_samples,cumulative_classical_samples,"
                "kl,nll,learning_rate")


def synth_rows(seed_value: float, points: int = 6, step: int = 50,
               q_rate: int = 300, c_rate: int = 336):
    """Deterministic positive KL trace decaying toward a floor."""
    rows = [(0, 0, 0, 4.0 + seed_value, 5.0 + seed_value, 0.01)]
    for j in range(1, points):
        it = j * step
        kl = (4.0 + seed_value) * float(np.exp(-it / 120.0)) + 0.05 + 0.01 * seed_value
        nll = kl + 1.5
        rows.append((it, it * q_rate, it * c_rate, kl, nll, 0.01 * 0.9 ** j))
    return rows


def write_run(root, run_id, kind, m, rows, trainer="cd", shots=1):
    run_dir = root / "runs" / run_id
    run_dir.mkdir(parents=True)
    lines = [TRACE_HEADER]
    lines += [f"{it},{q},{c},{kl!r},{nll!r},{lr!r}" for it, q, c, kl, nll, lr in rows]
    (run_dir / "trace.csv").write_text("\n".join(lines) + "\n")
    last = rows[-1]
    manifest = {
        "schema": "sqrbm-run v1",
        "run_id": run_id,
        "kind": kind,
        "m": m,
        "stream": {"seed": 0, "path": [0]},
        "config": {"trainer": trainer, "shots": shots, "iterations": last[0]},
        "dataset": {"name": "synthetic", "meta": {}, "support_size": 12},
        "totals": {"quantum_samples": last[1], "classical_samples": last[2]},
        "final": {"kl": last[3], "nll": last[4]},
        "trace_rows": len(rows),
        "wall_time_s": 1.0,
        "software": {"package": "sqrbm", "version": "0.1.0"},
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return last[3]


def write_experiment_manifest(root, experiment, run_ids, partial=False, failures=()):
    manifest = {"schema": "sqrbm-experiment v1", "experiment": experiment,
                "master_seed": 0, "runs": sorted(run_ids), "partial": partial,
                "failures": [list(f) for f in failures], "wall_time_s": 1.0,
                "software": {"package": "sqrbm", "version": "0.1.0"}}
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def make_sweep_dir(root, kinds=("rbm", "sqrbm"), sizes=(1, 2, 3, 4, 5), seeds=3):
    """A complete synthetic sweep export; summary statistics use the same
    numpy calls as the real exporter, so recomputation drift is zero."""
    root.mkdir(parents=True, exist_ok=True)
    groups = []
    run_ids = []
    for kind in kinds:
        offset = 0.0 if kind == "sqrbm" else 0.7
        for m in sizes:
            finals, ids = [], []
            for s in range(seeds):
                run_id = f"{kind}_m{m}_seed{s}"
                rows = synth_rows(offset + 0.31 * s + 0.11 * m)
                finals.append(write_run(root, run_id, kind, m, rows))
                ids.append(run_id)
                run_ids.append(run_id)
            groups.append({"kind": kind, "m": m, "label": f"{kind} m={m}",
                           "runs": ids, "final_kl": finals,
                           "final_kl_median": float(np.median(finals)),
                           "final_kl_std": float(np.std(finals))})
    write_experiment_manifest(root, "sweep", run_ids)
    summary = {"schema": "sqrbm-summary v1", "experiment": "sweep",
               "std_ddof": 0, "groups": groups}
    (root / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return root


def make_budget_dir(root, shot_grid=(1, 10, 100, 1000, 10000)):
    root.mkdir(parents=True, exist_ok=True)
    groups = []
    run_ids = ["cd_k10"]
    final = write_run(root, "cd_k10", "sqrbm", 3, synth_rows(0.2), trainer="cd")
    last = synth_rows(0.2)[-1]
    groups.append({"label": "cd_k10", "trainer": "cd", "shots": None,
                   "kind": "sqrbm", "m": 3, "final_kl": final,
                   "quantum_total": last[1], "classical_total": last[2]})
    for i, shots in enumerate(shot_grid):
        run_id = f"nll_s{shots}"
        rows = synth_rows(0.4 + 0.17 * i, q_rate=576 * shots, c_rate=0)
        final = write_run(root, run_id, "sqrbm", 3, rows, trainer="nll", shots=shots)
        groups.append({"label": run_id, "trainer": "nll", "shots": shots,
                       "kind": "sqrbm", "m": 3, "final_kl": final,
                       "quantum_total": rows[-1][1], "classical_total": rows[-1][2]})
        run_ids.append(run_id)
    write_experiment_manifest(root, "budget", run_ids)
    summary = {"schema": "sqrbm-summary v1", "experiment": "budget",
               "std_ddof": 0, "groups": groups}
    (root / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return root


@pytest.fixture
def sweep_dir(tmp_path):
    return make_sweep_dir(tmp_path / "sweep")


@pytest.fixture
def budget_dir(tmp_path):
    return make_budget_dir(tmp_path / "budget")
