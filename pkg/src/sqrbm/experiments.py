"""Experiment orchestration: runs, sample ledgers, KL traces, exports.

A run trains one model on one dataset and records a trace row every
eval_every iterations: iteration, cumulative quantum/classical samples, KL
against the exact target, NLL against the empirical training distribution,
and the current learning rate. The two canned experiments are

* run_hidden_unit_sweep: classical vs semi-quantum machines on 3x3
  bars-and-stripes across hidden-layer sizes, several seeds each;
* run_budget_comparison: one CD run against shot-based likelihood runs at
  several shot counts on the discretized Gaussian, to compare KL reached
  per simulated sample consumed.

Sample accounting is checked as an identity every iteration: CD charges
|pool|*k*chains quantum samples per update, the shot trainer
|pool|*(support+1)*shots. A violated identity is a bug, so it raises.

Exports under a results directory:
  manifest.json, summary.json, runs/<run-id>/{trace.csv, manifest.json, model.txt}
CSV numbers are written with repr(), so identical configs and seeds
reproduce byte-identical files.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .datasets import Dataset, gen_bas, gen_gaussian
from .model import (
    CLASSICAL_POOL,
    QUANTUM_POOL,
    ModelParams,
    _require,
    save_checkpoint,
    visible_marginal,
)
from .sampling import ChainSet, RngStream, init_chains
from .training import (
    AdamState,
    TrainConfig,
    adam_step,
    generalized_cd_update,
    initialize_params,
    learning_rate,
    nll_shot_update,
    shot_cost,
)

KINDS = {"rbm": CLASSICAL_POOL, "sqrbm": QUANTUM_POOL}


class LedgerMismatch(RuntimeError):
    """Per-iteration sample accounting failed an exact identity."""


class PartialExperiment(RuntimeError):
    """Some runs of an experiment failed; carries the ones that finished."""

    def __init__(self, records: list, failures: list):
        self.records = records
        self.failures = failures
        names = ", ".join(run_id for run_id, _ in failures)
        super().__init__(f"{len(failures)} run(s) failed: {names}")


@dataclass
class SampleLedger:
    """Running totals of simulated sample consumption. Counts never decrease."""

    quantum: int = 0
    classical: int = 0
    log: list = field(default_factory=list)

    def add_quantum(self, k: int) -> None:
        _require(k >= 0, "ledger increments must be nonnegative")
        self.quantum += int(k)

    def add_classical(self, k: int) -> None:
        _require(k >= 0, "ledger increments must be nonnegative")
        self.classical += int(k)

    def snapshot(self, iteration: int) -> None:
        self.log.append((int(iteration), self.quantum, self.classical))


def kl_divergence(target: np.ndarray, model: np.ndarray) -> float:
    """KL(target || model) in nats over the target's support.

    Returns inf when the model assigns zero probability somewhere the target
    is positive; a Gibbs-state marginal is strictly positive, so that only
    happens for degenerate hand-built inputs.
    """
    target = np.asarray(target, dtype=np.float64)
    model = np.asarray(model, dtype=np.float64)
    _require(target.shape == model.shape, "distributions must share a sample space")
    supp = target > 0
    if not (model[supp] > 0).all():
        return float("inf")
    return float((target[supp] * np.log(target[supp] / model[supp])).sum())


def nll_against(model: np.ndarray, q: np.ndarray) -> float:
    """-sum q log model over q's support; inf if the model misses any of it."""
    supp = q > 0
    if not (model[supp] > 0).all():
        return float("inf")
    return float(-(q[supp] * np.log(model[supp])).sum())


@dataclass
class TraceRow:
    iteration: int
    quantum_samples: int
    classical_samples: int
    kl: float
    nll: float
    learning_rate: float


@dataclass
class RunRecord:
    """Everything one run produced; sufficient to re-execute it."""

    run_id: str
    kind: str
    m: int
    stream_seed: int
    stream_path: tuple
    config: TrainConfig
    dataset_name: str
    dataset_meta: dict
    support_size: int
    rows: list = field(default_factory=list)
    params: ModelParams | None = None
    adam: AdamState | None = None
    quantum_total: int = 0
    classical_total: int = 0
    wall_time_s: float = 0.0

    @property
    def final_kl(self) -> float:
        return self.rows[-1].kl

    @property
    def final_nll(self) -> float:
        return self.rows[-1].nll


def run_single(kind: str, m: int, dataset: Dataset, config: TrainConfig,
               rng: RngStream, run_id: str | None = None,
               run_dir: Path | None = None) -> RunRecord:
    """Train one model and return its record.

    The rng's (seed, path) pair is the run's full stochastic identity:
    replaying with the same pair, config, and dataset reproduces every draw.
    """
    _require(kind in KINDS, f"kind must be one of {sorted(KINDS)}")
    config = replace(config, seed=rng.seed)
    pool = KINDS[kind]
    n = dataset.n
    target = dataset.exact_target
    _require(target is not None, "dataset must carry an exact target for KL traces")
    q_emp = dataset.empirical()
    supp_size = int((q_emp > 0).sum())
    npool = len(pool)

    init_rng, chain_rng, step_rng, batch_rng = (rng.spawn(i) for i in range(4))
    params = initialize_params(n, m, pool, dataset.samples, config, init_rng)
    adam = AdamState.for_params(params)
    ledger = SampleLedger()
    chains: ChainSet | None = None
    if config.trainer == "cd" and config.persistent:
        chains = init_chains(params, dataset.samples, config.chains, chain_rng)

    def evaluate(t: int) -> TraceRow:
        p = visible_marginal(params)
        return TraceRow(iteration=t, quantum_samples=ledger.quantum,
                        classical_samples=ledger.classical,
                        kl=kl_divergence(target, p), nll=nll_against(p, q_emp),
                        learning_rate=learning_rate(t, config) if t else config.eta_start)

    started = time.perf_counter()
    ledger.snapshot(0)
    rows = [evaluate(0)]
    for t in range(1, config.iterations + 1):
        q_before, c_before = ledger.quantum, ledger.classical
        if config.trainer == "cd":
            if config.batch_size is None:
                batch = dataset.samples
            else:
                pick = batch_rng.integers(0, len(dataset.samples), size=config.batch_size)
                batch = dataset.samples[pick]
            estimate = generalized_cd_update(
                params, batch, chains, config.cd_steps, step_rng, ledger,
                statistics=config.statistics, estimator=config.estimator,
                visible_accumulation=config.visible_accumulation)
            walkers = chains.chains if chains is not None else len(batch)
            expected_q = npool * config.cd_steps * walkers
        else:
            estimate = nll_shot_update(params, q_emp, config.shots, step_rng, ledger)
            expected_q = shot_cost(params, supp_size, config.shots)
        if ledger.quantum - q_before != expected_q:
            raise LedgerMismatch(
                f"iteration {t}: quantum delta {ledger.quantum - q_before}, "
                f"expected {expected_q}")
        params = adam_step(params, estimate, adam, config)
        if t % config.eval_every == 0 or t == config.iterations:
            ledger.snapshot(t)
            rows.append(evaluate(t))
        if run_dir is not None and config.checkpoint_every and t % config.checkpoint_every == 0:
            _write_checkpoint(run_dir, t, params, adam)

    return RunRecord(
        run_id=run_id or f"{kind}_m{m}", kind=kind, m=m,
        stream_seed=rng.seed, stream_path=rng.path, config=config,
        dataset_name=dataset.name, dataset_meta=dict(dataset.meta),
        support_size=supp_size, rows=rows, params=params, adam=adam,
        quantum_total=ledger.quantum, classical_total=ledger.classical,
        wall_time_s=time.perf_counter() - started)


def _write_checkpoint(run_dir: Path, t: int, params: ModelParams, adam: AdamState) -> None:
    ckpt = Path(run_dir) / "checkpoints"
    ckpt.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, ckpt / f"step_{t}.model.txt")
    sidecar = {"schema": "sqrbm-adam v1", "t": adam.t,
               "mom1": adam.mom1.tolist(), "mom2": adam.mom2.tolist()}
    (ckpt / f"step_{t}.adam.json").write_text(json.dumps(sidecar))


# ---------------------------------------------------------------------------
# canned experiments


@dataclass(frozen=True)
class RunSpec:
    """Picklable description of one run inside an experiment."""

    run_id: str
    kind: str
    m: int
    stream_seed: int
    stream_path: tuple
    dataset: Dataset
    config: TrainConfig


def _execute_spec(spec: RunSpec) -> RunRecord:
    rng = RngStream(spec.stream_seed, spec.stream_path)
    return run_single(spec.kind, spec.m, spec.dataset, spec.config, rng,
                      run_id=spec.run_id)


def _run_all(specs: list[RunSpec], jobs: int) -> list[RunRecord]:
    """Execute all specs; raises PartialExperiment if any of them fail."""
    records, failures = [], []
    if jobs <= 1 or len(specs) <= 1:
        for spec in specs:
            try:
                records.append(_execute_spec(spec))
            except Exception as exc:
                failures.append((spec.run_id, f"{type(exc).__name__}: {exc}"))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(spec.run_id, pool.submit(_execute_spec, spec)) for spec in specs]
            for run_id, future in futures:
                try:
                    records.append(future.result())
                except Exception as exc:
                    failures.append((run_id, f"{type(exc).__name__}: {exc}"))
    if failures:
        raise PartialExperiment(records, failures)
    return records


def bas_train_config(**overrides) -> TrainConfig:
    """Bars-and-stripes defaults: full batch, final learning rate 1e-3,
    coupling init variance 10/(n+m)."""
    base = dict(iterations=5000, trainer="cd", cd_steps=10, chains=10,
                eta_start=0.01, eta_end=1e-3, init_scale=10.0, eval_every=50)
    base.update(overrides)
    return TrainConfig(**base)


def gaussian_train_config(**overrides) -> TrainConfig:
    """Discretized-Gaussian defaults: final learning rate 1e-4, init variance
    1/(n+m)."""
    base = dict(iterations=5000, trainer="cd", cd_steps=10, chains=10,
                eta_start=0.01, eta_end=1e-4, init_scale=1.0, eval_every=50)
    base.update(overrides)
    return TrainConfig(**base)


def run_hidden_unit_sweep(hidden_sizes=(1, 2, 3, 4, 5), seeds: int = 10,
                          kinds=("rbm", "sqrbm"), dataset: Dataset | None = None,
                          config: TrainConfig | None = None, master_seed: int = 0,
                          out_dir=None, jobs: int = 1) -> list[RunRecord]:
    """Classical vs semi-quantum KL across hidden-layer sizes (full grid)."""
    dataset = dataset or gen_bas()
    config = config or bas_train_config()
    specs = []
    for kind in kinds:
        kind_tag = sorted(KINDS).index(kind)
        for m in hidden_sizes:
            for s in range(seeds):
                specs.append(RunSpec(
                    run_id=f"{kind}_m{m}_seed{s}", kind=kind, m=m,
                    stream_seed=master_seed, stream_path=(kind_tag, m, s),
                    dataset=dataset, config=config))
    records = _run_all(specs, jobs)
    if out_dir is not None:
        export_results(records, out_dir, experiment="sweep", master_seed=master_seed)
    return records


def run_budget_comparison(shot_grid=(1, 10, 100, 1000, 10000), m: int = 3,
                          dataset: Dataset | None = None,
                          cd_config: TrainConfig | None = None,
                          nll_config: TrainConfig | None = None,
                          master_seed: int = 0, out_dir=None,
                          jobs: int = 1) -> list[RunRecord]:
    """One CD run vs shot-based likelihood runs on the Gaussian target.

    The CD run defaults to 100 persistent chains and the conditional-mean
    estimator: with ten chains and sampled bitstrings (the hidden-unit
    sweep's settings), few-chain gradient noise puts a floor under the final
    KL more than an order of magnitude above the best shot-based run, and
    the extra chains still keep the total quantum-sample count two orders of
    magnitude inside the budget claim.
    """
    dataset = dataset or gen_gaussian(seed=master_seed)
    cd_config = cd_config or gaussian_train_config(chains=100,
                                                   estimator="rao-blackwell")
    nll_base = nll_config or gaussian_train_config(trainer="nll")
    specs = [RunSpec(run_id=f"cd_k{cd_config.cd_steps}", kind="sqrbm", m=m,
                     stream_seed=master_seed, stream_path=(100,),
                     dataset=dataset, config=cd_config)]
    for i, shots in enumerate(shot_grid):
        cfg_kwargs = asdict(nll_base)
        cfg_kwargs.update(trainer="nll", shots=int(shots))
        specs.append(RunSpec(run_id=f"nll_s{shots}", kind="sqrbm", m=m,
                             stream_seed=master_seed, stream_path=(101, i),
                             dataset=dataset, config=TrainConfig(**cfg_kwargs)))
    records = _run_all(specs, jobs)
    if out_dir is not None:
        export_results(records, out_dir, experiment="budget", master_seed=master_seed)
    return records


# ---------------------------------------------------------------------------
# export


def _trace_csv_lines(rows: list) -> list[str]:
    header = ("iteration,cumulative_quantum_samples,cumulative_classical_samples,"
              "kl,nll,learning_rate")
    out = [header]
    for r in rows:
        out.append(f"{r.iteration},{r.quantum_samples},{r.classical_samples},"
                   f"{r.kl!r},{r.nll!r},{r.learning_rate!r}")
    return out


def _run_manifest(rec: RunRecord) -> dict:
    return {
        "schema": "sqrbm-run v1",
        "run_id": rec.run_id,
        "kind": rec.kind,
        "m": rec.m,
        "stream": {"seed": rec.stream_seed, "path": list(rec.stream_path)},
        "config": asdict(rec.config),
        "dataset": {"name": rec.dataset_name, "meta": rec.dataset_meta,
                    "support_size": rec.support_size},
        "totals": {"quantum_samples": rec.quantum_total,
                   "classical_samples": rec.classical_total},
        "final": {"kl": rec.final_kl, "nll": rec.final_nll},
        "trace_rows": len(rec.rows),
        "wall_time_s": rec.wall_time_s,
        "software": {"package": "sqrbm", "version": __version__},
    }


def _summary(records: list[RunRecord], experiment: str) -> dict:
    groups = []
    if experiment == "sweep":
        keys = sorted({(r.kind, r.m) for r in records})
        for kind, m in keys:
            finals = [r.final_kl for r in records if (r.kind, r.m) == (kind, m)]
            ids = [r.run_id for r in records if (r.kind, r.m) == (kind, m)]
            groups.append({"kind": kind, "m": m, "label": f"{kind} m={m}",
                           "runs": ids, "final_kl": finals,
                           "final_kl_median": float(np.median(finals)),
                           "final_kl_std": float(np.std(finals))})
    else:
        for r in records:
            groups.append({"label": r.run_id, "trainer": r.config.trainer,
                           "shots": r.config.shots if r.config.trainer == "nll" else None,
                           "kind": r.kind, "m": r.m, "final_kl": r.final_kl,
                           "quantum_total": r.quantum_total,
                           "classical_total": r.classical_total})
    return {"schema": "sqrbm-summary v1", "experiment": experiment,
            "std_ddof": 0, "groups": groups}


def export_results(records: list[RunRecord], path, experiment: str = "train",
                   master_seed: int | None = None, partial: bool = False,
                   failures: list | None = None) -> Path:
    """Write the results directory for a list of runs; returns its path.

    partial=True marks the experiment manifest as incomplete (some runs
    missing), with the failure list alongside.
    """
    _require(len(records) > 0, "nothing to export")
    ids = [r.run_id for r in records]
    _require(len(set(ids)) == len(ids), "run ids must be unique")
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    for rec in records:
        run_dir = out / "runs" / rec.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "trace.csv").write_text("\n".join(_trace_csv_lines(rec.rows)) + "\n")
        (run_dir / "manifest.json").write_text(
            json.dumps(_run_manifest(rec), indent=2, sort_keys=True) + "\n")
        if rec.params is not None:
            save_checkpoint(rec.params, run_dir / "model.txt")
        if rec.adam is not None:
            sidecar = {"schema": "sqrbm-adam v1", "t": rec.adam.t,
                       "mom1": rec.adam.mom1.tolist(), "mom2": rec.adam.mom2.tolist()}
            (run_dir / "adam.json").write_text(json.dumps(sidecar) + "\n")
    manifest = {"schema": "sqrbm-experiment v1", "experiment": experiment,
                "master_seed": master_seed, "runs": sorted(ids),
                "partial": bool(partial),
                "failures": [list(f) for f in (failures or [])],
                "wall_time_s": float(sum(r.wall_time_s for r in records)),
                "software": {"package": "sqrbm", "version": __version__}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    (out / "summary.json").write_text(
        json.dumps(_summary(records, experiment), indent=2, sort_keys=True) + "\n")
    return out


def load_trace(path) -> list:
    """Parse a trace.csv back into TraceRow objects (exact float round-trip)."""
    lines = Path(path).read_text().splitlines()
    expected = _trace_csv_lines([])[0]
    if not lines or lines[0] != expected:
        raise ValueError(f"{path}: unrecognized trace header")
    rows = []
    for line in lines[1:]:
        it, qs, cs, kl, nll, lr = line.split(",")
        rows.append(TraceRow(int(it), int(qs), int(cs),
                             float(kl), float(nll), float(lr)))
    return rows


def load_run_dir(run_dir) -> RunRecord:
    """Reconstruct a RunRecord from an exported run directory."""
    from .model import load_checkpoint

    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    if manifest.get("schema") != "sqrbm-run v1":
        raise ValueError(f"{run_dir}: unsupported run manifest schema")
    rows = load_trace(run_dir / "trace.csv")
    params = None
    if (run_dir / "model.txt").exists():
        params = load_checkpoint(run_dir / "model.txt")
    adam = None
    sidecar_path = run_dir / "adam.json"
    if sidecar_path.exists():
        sidecar = json.loads(sidecar_path.read_text())
        adam = AdamState(mom1=np.asarray(sidecar["mom1"], dtype=np.float64),
                         mom2=np.asarray(sidecar["mom2"], dtype=np.float64),
                         t=int(sidecar["t"]))
    return RunRecord(
        run_id=manifest["run_id"], kind=manifest["kind"], m=manifest["m"],
        stream_seed=manifest["stream"]["seed"],
        stream_path=tuple(manifest["stream"]["path"]),
        config=TrainConfig(**manifest["config"]),
        dataset_name=manifest["dataset"]["name"],
        dataset_meta=manifest["dataset"]["meta"],
        support_size=manifest["dataset"]["support_size"],
        rows=rows, params=params, adam=adam,
        quantum_total=manifest["totals"]["quantum_samples"],
        classical_total=manifest["totals"]["classical_samples"],
        wall_time_s=manifest["wall_time_s"])
