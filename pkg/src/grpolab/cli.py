"""Command-line front end.

Exit codes are a stable contract: 0 success, 1 check failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, RunConfig, load_run_config, load_suite, parse_run_config
from .diagnostics import (
    EMA_FACTOR,
    MetricsRecord,
    accuracy_label,
    binned_covariance_from_records,
    ema_smooth,
    read_metrics,
    write_metrics,
)
from .env import TaskGenerationError, build_task_set
from .svg import bar_chart, line_chart
from .trainer import NumericalFailure, train

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
WORKERS_ENV = "GRPOLAB_WORKERS"


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"grpolab: error: {msg}", file=sys.stderr)


def _run(run: RunConfig, out: Path) -> list[MetricsRecord]:
    task_set = build_task_set(run.task, run.task_seed)
    _, records = train(task_set, run.train)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_metrics(records, out, run.format, run.train.group_size, header=run.header())
    return records


def cmd_train(config_path: str, seed: int | None, out_path: str, fmt: str | None = None) -> int:
    try:
        run = load_run_config(config_path)
        if seed is not None:
            run = run.with_seed(seed)
        if fmt is not None:
            run = replace(run, format=fmt)
        build_task_set(run.task, run.task_seed)
    except (ConfigError, TaskGenerationError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    try:
        _run(run, Path(out_path))
    except NumericalFailure as exc:
        _err(str(exc))
        return EXIT_FAIL
    return EXIT_OK


def _compare_job(args: tuple[dict, str, int, str]) -> tuple[str, int, float | None, float]:
    base, variant, seed, out = args
    run = parse_run_config({**base, "variant": variant}).with_seed(seed)
    records = _run(run, Path(out))
    val = [r.ema_validation_accuracy for r in records if r.ema_validation_accuracy is not None]
    entropy = float(np.mean([r.mean_token_entropy for r in records]))
    return variant, seed, (val[-1] if val else None), entropy


def _worker_count(requested: int | None, n_jobs: int) -> int:
    if requested is None:
        env = os.environ.get(WORKERS_ENV)
        if env is not None:
            try:
                requested = int(env)
            except ValueError:
                raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}")
        else:
            requested = os.cpu_count() or 1
    if requested < 1:
        raise UsageError("worker count must be >= 1")
    return min(requested, n_jobs)


def cmd_compare(suite_path: str, seeds: Sequence[int], out_dir: str, workers: int | None = None) -> int:
    try:
        variants, base = load_suite(suite_path)
        if not seeds:
            raise UsageError("at least one seed is required")
        if len(set(seeds)) != len(seeds):
            raise UsageError("duplicate seeds")
        fmt = base.get("format", "csv")
        build_task_set(parse_run_config({**base, "variant": variants[0]}).task, base.get("task_seed", 0))
        jobs = [
            (base, v, s, str(Path(out_dir) / f"{v}_seed{s}.{fmt}")) for v in variants for s in seeds
        ]
        n_workers = _worker_count(workers, len(jobs))
    except (ConfigError, TaskGenerationError, UsageError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    try:
        if n_workers == 1:
            results = [_compare_job(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                results = list(pool.map(_compare_job, jobs))
    except NumericalFailure as exc:
        _err(str(exc))
        return EXIT_FAIL
    with open(Path(out_dir) / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variant", "seed", "final_ema_validation_accuracy", "mean_token_entropy"])
        for variant, seed, val, ent in results:
            w.writerow([variant, seed, "" if val is None else repr(val), repr(ent)])
    return EXIT_OK


def cmd_check(fault: str | None = None) -> int:
    from .checks import format_table, run_checks

    results = run_checks(fault)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _series(runs, attr: str):
    out = []
    for label, records in runs:
        pts = [(r.step, getattr(r, attr)) for r in records if getattr(r, attr) is not None]
        if pts:
            xs, ys = zip(*pts)
            out.append((label, list(xs), list(ys)))
    return out


def cmd_report(files: Sequence[str], out_dir: str) -> int:
    runs = []
    sizes = set()
    try:
        if not files:
            raise UsageError("at least one metrics file is required")
        for f in files:
            meta, records = read_metrics(f)
            if not records:
                raise UsageError(f"{f}: no metric rows")
            runs.append((Path(f).stem, records))
            sizes.add(int(meta.get("group_size", 8)))
    except (OSError, ValueError, KeyError, UsageError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    notes = []

    line_chart(_series(runs, "mean_token_entropy"), out / "entropy.svg",
               "Mean token entropy", "step", "entropy (nats)")

    val = []
    for label, records in runs:
        pts = [(r.step, r.validation_accuracy) for r in records if r.validation_accuracy is not None]
        if pts:
            xs, ys = zip(*pts)
            val.append((label, list(xs), ema_smooth(ys, EMA_FACTOR)))
    if val:
        line_chart(val, out / "validation_accuracy.svg",
                   f"Validation accuracy (EMA {EMA_FACTOR})", "step", "greedy solve rate")
    else:
        notes.append("validation_accuracy.svg omitted: no validation column in the inputs")

    solved = []
    for label, records in runs:
        xs = [r.step for r in records]
        solved.append((f"{label} all solved", xs, [r.solved_all_fraction for r in records]))
        solved.append((f"{label} none solved", xs, [r.solved_none_fraction for r in records]))
    line_chart(solved, out / "solved_proportions.svg",
               "Prompts solved by all / none of the group", "step", "fraction of prompts",
               dashed_pairs=True)

    inc = _series(runs, "pos_logprob_increment")
    if inc:
        line_chart(inc, out / "pos_logprob_increment.svg",
                   "Log-prob increment on positive rollouts", "step", "mean increment (nats)")
    else:
        notes.append("pos_logprob_increment.svg omitted: no positive rollouts recorded")

    if len(sizes) == 1:
        (G,) = sizes
        cats = [accuracy_label(k, G) for k in range(1, G)]
        bars = []
        for label, records in runs:
            bins = binned_covariance_from_records(records, G)
            bars.append((label, [bins.get(k / G) for k in range(1, G)]))
        if any(v is not None for _, ys in bars for v in ys):
            bar_chart(cats, bars, out / "covariance.svg",
                      "Covariance of log-prob and advantage by group accuracy", "group accuracy",
                      "mean covariance")
        else:
            notes.append("covariance.svg omitted: no non-degenerate groups in the window")
    else:
        notes.append("covariance.svg omitted: inputs use different group sizes")

    if notes:
        (out / "NOTES.txt").write_text("\n".join(notes) + "\n")
        for n in notes:
            print(n)
    return EXIT_OK


def _seed_list(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="grpolab", description="Group-relative policy optimization lab.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run one experiment and write its metrics")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", required=True)
    t.add_argument("--format", choices=("csv", "jsonl"), default=None)

    c = sub.add_parser("compare", help="run every variant of a suite over several seeds")
    c.add_argument("--suite", required=True)
    c.add_argument("--seeds", type=_seed_list, required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--workers", type=int, default=None,
                   help=f"parallel runs (default: ${WORKERS_ENV} or the CPU count)")

    k = sub.add_parser("check", help="run the oracle and invariant suites")
    k.add_argument("--inject-fault", choices=("standardized",), default=None, help=argparse.SUPPRESS)

    r = sub.add_parser("report", help="render metric files to SVG charts")
    r.add_argument("files", nargs="+")
    r.add_argument("--out", required=True)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.command == "train":
        return cmd_train(args.config, args.seed, args.out, args.format)
    if args.command == "compare":
        return cmd_compare(args.suite, args.seeds, args.out, args.workers)
    if args.command == "check":
        return cmd_check(args.inject_fault)
    return cmd_report(args.files, args.out)


if __name__ == "__main__":
    sys.exit(main())
