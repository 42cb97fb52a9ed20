"""Command-line entry point.

Verbs: gen-data, train, sweep, budget, validate, export. Experiment
definitions live in key=value config files (see docs/); flags carry only
paths and overrides. Every failure prints a single "error: ..." line on
stderr and exits nonzero, so callers can script against it.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

from .datasets import gen_bas, gen_gaussian, load_dataset, save_dataset
from .experiments import (
    PartialExperiment,
    export_results,
    load_run_dir,
    run_budget_comparison,
    run_hidden_unit_sweep,
    run_single,
)
from .sampling import RngStream
from .training import TrainConfig
from .validate import ALL_CHECKS, CHECKS_BY_NAME, run_validation

TRAIN_KEYS = {f.name for f in fields(TrainConfig)}

VERB_KEYS = {
    "gen-data": {"datasets", "bas_size", "bins", "mu", "sigma", "count",
                 "dataset_seed", "out"},
    "train": TRAIN_KEYS | {"kind", "m", "dataset", "dataset_seed", "out"},
    "sweep": TRAIN_KEYS | {"hidden_sizes", "seeds", "kinds", "dataset",
                           "dataset_seed", "out"},
    "budget": TRAIN_KEYS | {"shot_grid", "m", "dataset", "dataset_seed", "out"},
    "validate": {"checks"},
    "export": {"input", "experiment", "out"},
}


class CliError(Exception):
    """User-facing configuration or usage problem; message fits one line."""


def _coerce(text: str):
    """Best-effort typing for config values: bool, int, float, list, string."""
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if "," in text:
        return tuple(_coerce(part.strip()) for part in text.split(","))
    return text


def parse_config(path: Path) -> dict:
    """key = value lines; # starts a comment; blank lines ignored."""
    table = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise CliError(f"{path}:{lineno}: empty key")
        table[key] = _coerce(value)
    return table


def _apply_overrides(table: dict, overrides: list, verb: str) -> dict:
    known = VERB_KEYS[verb]
    for item in overrides:
        if "=" not in item:
            raise CliError(f"override {item!r} is not key=value")
        key, value = (part.strip() for part in item.split("=", 1))
        if key not in known:
            raise CliError(f"override references unknown key {key!r} for {verb}")
        table[key] = _coerce(value)
    for key in table:
        if key not in known:
            raise CliError(f"config key {key!r} is not recognized for {verb}")
    return table


def _train_config(table: dict, seed: int | None) -> TrainConfig:
    kwargs = {k: v for k, v in table.items() if k in TRAIN_KEYS}
    if seed is not None:
        kwargs["seed"] = seed
    try:
        return TrainConfig(**kwargs)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _as_int_tuple(value, key: str) -> tuple:
    if isinstance(value, int):
        return (value,)
    if isinstance(value, tuple) and all(isinstance(v, int) for v in value):
        return value
    raise CliError(f"{key} must be an integer or comma list of integers")


def _dataset(table: dict, default: str):
    name = table.get("dataset", default)
    seed = int(table.get("dataset_seed", 0))
    if name == "bas":
        return gen_bas()
    if name == "gaussian":
        return gen_gaussian(seed=seed)
    path = Path(str(name))
    if not path.exists():
        raise CliError(f"dataset {name!r} is neither bas, gaussian, nor a file")
    return load_dataset(path)


def _out_dir(args, table: dict, default: str) -> Path:
    if args.out is not None:
        return Path(args.out)
    if "out" in table:
        return Path(str(table["out"]))
    return Path(default)


def _cmd_gen_data(args, table: dict) -> int:
    out = _out_dir(args, table, "data")
    out.mkdir(parents=True, exist_ok=True)
    wanted = table.get("datasets", ("bas", "gaussian"))
    if isinstance(wanted, str):
        wanted = (wanted,)
    seed = args.seed if args.seed is not None else int(table.get("dataset_seed", 0))
    for name in wanted:
        if name == "bas":
            ds = gen_bas(size=int(table.get("bas_size", 3)))
        elif name == "gaussian":
            ds = gen_gaussian(bins=int(table.get("bins", 512)),
                              mu=float(table.get("mu", 255.5)),
                              sigma=float(table.get("sigma", 32.0)),
                              count=int(table.get("count", 10000)),
                              seed=seed)
        else:
            raise CliError(f"unknown dataset {name!r} (expected bas or gaussian)")
        save_dataset(ds, out / f"{name}.txt")
        print(f"wrote {out / f'{name}.txt'} ({ds.samples.shape[0]} samples, n={ds.n})")
    return 0


def _cmd_train(args, table: dict) -> int:
    for key in ("kind", "m"):
        if key not in table:
            raise CliError(f"train needs {key!r} in the config")
    kind = str(table["kind"])
    m = int(table["m"])
    config = _train_config(table, args.seed)
    dataset = _dataset(table, "bas")
    out = _out_dir(args, table, "results/train")
    rng = RngStream(config.seed)
    run_dir = out / "runs" / f"{kind}_m{m}"
    run_dir.mkdir(parents=True, exist_ok=True)
    record = run_single(kind, m, dataset, config, rng,
                        run_id=f"{kind}_m{m}", run_dir=run_dir)
    export_results([record], out, experiment="train", master_seed=config.seed)
    print(f"{record.run_id}: final kl {record.final_kl:.6f}, "
          f"nll {record.final_nll:.6f}, "
          f"{record.quantum_total} quantum / {record.classical_total} classical samples")
    print(f"results in {out}")
    return 0


def _cmd_sweep(args, table: dict) -> int:
    seed = args.seed if args.seed is not None else int(table.get("seed", 0))
    train_table = {k: v for k, v in table.items()
                   if k in TRAIN_KEYS and k != "trainer"}
    config = _train_config(train_table, None) if train_table else None
    kinds = table.get("kinds", ("rbm", "sqrbm"))
    if isinstance(kinds, str):
        kinds = (kinds,)
    out = _out_dir(args, table, "results/sweep")
    try:
        records = run_hidden_unit_sweep(
            hidden_sizes=_as_int_tuple(table.get("hidden_sizes", (1, 2, 3, 4, 5)),
                                       "hidden_sizes"),
            seeds=int(table.get("seeds", 10)), kinds=tuple(kinds),
            dataset=_dataset(table, "bas"), config=config,
            master_seed=seed, out_dir=None, jobs=args.jobs)
    except PartialExperiment as exc:
        if exc.records:
            export_results(exc.records, out, experiment="sweep", master_seed=seed,
                           partial=True, failures=exc.failures)
        raise
    export_results(records, out, experiment="sweep", master_seed=seed)
    print(f"{len(records)} runs complete; results in {out}")
    return 0


def _cmd_budget(args, table: dict) -> int:
    seed = args.seed if args.seed is not None else int(table.get("seed", 0))
    train_table = {k: v for k, v in table.items()
                   if k in TRAIN_KEYS and k != "trainer"}
    config = _train_config(train_table, None) if train_table else None
    out = _out_dir(args, table, "results/budget")
    try:
        records = run_budget_comparison(
            shot_grid=_as_int_tuple(table.get("shot_grid", (1, 10, 100, 1000, 10000)),
                                    "shot_grid"),
            m=int(table.get("m", 3)), dataset=_dataset(table, "gaussian"),
            cd_config=config, master_seed=seed, out_dir=None, jobs=args.jobs)
    except PartialExperiment as exc:
        if exc.records:
            export_results(exc.records, out, experiment="budget", master_seed=seed,
                           partial=True, failures=exc.failures)
        raise
    export_results(records, out, experiment="budget", master_seed=seed)
    print(f"{len(records)} runs complete; results in {out}")
    return 0


def _cmd_validate(args, table: dict) -> int:
    chosen = table.get("checks")
    checks = ALL_CHECKS
    if chosen:
        if isinstance(chosen, str):
            chosen = (chosen,)
        names = [str(name).replace("_", "-") for name in chosen]
        missing = [name for name in names if name not in CHECKS_BY_NAME]
        if missing:
            raise CliError(f"unknown checks: {', '.join(missing)} "
                           f"(known: {', '.join(CHECKS_BY_NAME)})")
        checks = tuple(CHECKS_BY_NAME[name] for name in names)
    results = run_validation(checks)
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def _cmd_export(args, table: dict) -> int:
    source = table.get("input") or args.input
    if source is None:
        raise CliError("export needs an input results directory "
                       "(positional argument or 'input' config key)")
    source = Path(str(source))
    run_dirs = sorted(p for p in (source / "runs").glob("*") if p.is_dir()) \
        if (source / "runs").is_dir() else []
    if not run_dirs:
        raise CliError(f"{source}: no runs/<id>/ directories found")
    records = [load_run_dir(p) for p in run_dirs]
    experiment = str(table.get("experiment", "train"))
    out = _out_dir(args, table, str(source))
    export_results(records, out, experiment=experiment)
    print(f"re-exported {len(records)} runs to {out}")
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "budget": _cmd_budget,
    "validate": _cmd_validate,
    "export": _cmd_export,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqrbm",
        description="Train and validate classical and semi-quantum RBMs.")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in _COMMANDS:
        p = sub.add_parser(verb)
        p.add_argument("--config", type=Path, default=None,
                       help="key=value config file")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed override")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes")
        p.add_argument("--out", type=Path, default=None,
                       help="output directory")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        if verb == "export":
            p.add_argument("input", nargs="?", default=None,
                           help="results directory to re-aggregate")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        table = parse_config(args.config) if args.config else {}
        table = _apply_overrides(table, args.override, args.verb)
        return _COMMANDS[args.verb](args, table)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PartialExperiment as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
