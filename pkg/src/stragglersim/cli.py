"""Command line interface for running and inspecting simulations.

Subcommands:
  simulate        run the trials of one experiment config, one JSONL log per
                  trial plus a manifest
  sweep           grid-sweep parameters over a base config, ranked CSV out
  verify          run the numerical verification suite
  report          aggregate trial logs into a summary CSV
  latency-report  percentile table of the configured latency scenario
  data-report     per-client and per-class tables of the generated dataset

Exit codes: 0 success, 1 failed verification, 2 bad input (missing file,
malformed or unknown config keys).

Trial seeds are base_seed + trial_index. --jobs (or STRAGGLERSIM_JOBS) runs
trials in separate processes; each trial writes its own file, so outputs are
byte-identical regardless of parallelism.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__, metrics, rng
from .config import (
    ConfigError,
    ExperimentConfig,
    SweepConfig,
    config_hash,
    config_to_dict,
    load_config,
    load_sweep,
    sweep_points,
)
from .data import build_dataset, class_report_rows, shard_report_rows
from .engine import Simulation
from .latency import latency_percentiles
from .verify import CHECKS, run_suite


def _resolve_jobs(arg_jobs: int | None) -> int:
    if arg_jobs is not None:
        return max(1, arg_jobs)
    env = os.environ.get("STRAGGLERSIM_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"STRAGGLERSIM_JOBS={env!r} is not an integer") from exc
    return 1


def _run_trial_to_file(config: ExperimentConfig, seed: int, out_path: str) -> str:
    """Worker: run one trial and write its JSONL log (used across processes)."""
    result = Simulation(config, seed).run()
    header = {
        "tool_version": __version__,
        "config_hash": config_hash(config),
        "experiment": config.name,
        "algo": config.algo.name,
        "seed": seed,
    }
    metrics.write_run_jsonl(
        out_path,
        header=header,
        records=result.records,
        summary={"seed": seed, **result.summary_dict()},
    )
    return out_path


def _run_trials(
    config: ExperimentConfig, out_dir: Path, jobs: int, file_prefix: str = "trial"
) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (config, config.base_seed + i, str(out_dir / f"{file_prefix}_{i:03d}.jsonl"))
        for i in range(config.trials)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_trial_to_file, *task) for task in tasks]
            for fut in futures:
                fut.result()
    else:
        for task in tasks:
            _run_trial_to_file(*task)
    return [Path(task[2]) for task in tasks]


def _write_manifest(out_dir: Path, config: ExperimentConfig, files: list[Path]) -> Path:
    manifest = {
        "tool_version": __version__,
        "config_hash": config_hash(config),
        "base_seed": config.base_seed,
        "trials": config.trials,
        "data_seed": config.effective_data_seed(),
        "files": sorted(f.name for f in files),
        "config": config_to_dict(config),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _final_records(files: list[Path]) -> list[dict]:
    finals = []
    for path in files:
        _, records, _ = metrics.read_run_jsonl(path)
        if not records:
            raise ValueError(f"{path}: no records")
        finals.append(records[-1])
    return finals


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.trials is not None:
        config = dataclasses.replace(config, trials=args.trials)
    if args.seed is not None:
        config = dataclasses.replace(config, base_seed=args.seed)
    out_dir = Path(args.out)
    files = _run_trials(config, out_dir, _resolve_jobs(args.jobs))
    _write_manifest(out_dir, config, files)
    finals = _final_records(files)
    for i, (path, final) in enumerate(zip(files, finals)):
        print(
            f"trial {i} seed={config.base_seed + i} "
            f"total_acc={final['total_acc']:.4f} "
            f"straggler_acc={final['straggler_acc']:.4f} "
            f"time_s={final['virtual_time_s']:.1f} -> {path.name}"
        )
    summary = metrics.summarize_trials(finals)
    print(
        f"median total_acc={summary['total_acc'].median:.4f} "
        f"straggler_acc={summary['straggler_acc'].median:.4f} "
        f"[{summary['straggler_acc'].lo:.4f}, {summary['straggler_acc'].hi:.4f}] "
        f"time_s={summary['virtual_time_s'].median:.1f}"
    )
    print(f"wrote {len(files)} trial logs and manifest.json to {out_dir}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    sweep = load_sweep(args.config)
    points = sweep_points(sweep)
    jobs = _resolve_jobs(args.jobs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    param_names = sorted(sweep.parameters)
    for idx, (assignment, config) in enumerate(points):
        point_dir = out_dir / f"point_{idx:03d}"
        files = _run_trials(config, point_dir, jobs)
        _write_manifest(point_dir, config, files)
        finals = _final_records(files)
        summary = metrics.summarize_trials(finals)
        objective = summary[sweep.objective]
        row = {"point": idx}
        for name in param_names:
            row[name] = assignment[name]
        row.update(
            objective_lo=round(objective.lo, 6),
            objective_median=round(objective.median, 6),
            objective_hi=round(objective.hi, 6),
            total_acc_median=round(summary["total_acc"].median, 6),
            straggler_acc_median=round(summary["straggler_acc"].median, 6),
            time_s_median=round(summary["virtual_time_s"].median, 2),
            best=0,
        )
        rows.append(row)
        print(
            f"point {idx} {assignment} -> {sweep.objective} "
            f"median={objective.median:.4f} [{objective.lo:.4f}, {objective.hi:.4f}]"
        )

    rows.sort(key=lambda r: (-r["objective_median"], r["point"]))
    if rows:
        rows[0]["best"] = 1
    fieldnames = ["point", *param_names, "objective_lo", "objective_median", "objective_hi",
                  "total_acc_median", "straggler_acc_median", "time_s_median", "best"]
    csv_path = out_dir / "sweep.csv"
    metrics.write_csv(csv_path, rows, fieldnames)
    if rows:
        best = rows[0]
        print(f"best point {best['point']}: {sweep.objective} median={best['objective_median']}")
    print(f"wrote {csv_path}")
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    if args.suite != "all" and args.suite not in CHECKS:
        raise ConfigError(
            f"unknown suite {args.suite!r}; options: all, {', '.join(CHECKS)}"
        )
    report = run_suite(args.suite, base_seed=args.seed)
    for check in report["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {check['name']} ({check['elapsed_s']:.2f}s): {check['detail']}")
        if not check["passed"]:
            print(f"     measured={check['measured']} bound={check['bound']}")
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    print("suite passed" if report["passed"] else "suite FAILED")
    return 0 if report["passed"] else 1


def cmd_report(args: argparse.Namespace) -> int:
    files: list[Path] = []
    for entry in args.inputs:
        path = Path(entry)
        if path.is_dir():
            files.extend(sorted(path.rglob("*.jsonl")))
        elif path.exists():
            files.append(path)
        else:
            raise FileNotFoundError(entry)
    if not files:
        raise FileNotFoundError(f"no .jsonl logs under {args.inputs}")

    by_hash: dict[str, dict] = {}
    for path in files:
        header, records, summary = metrics.read_run_jsonl(path)
        chash = header.get("config_hash", "")
        group = by_hash.setdefault(
            chash,
            {"experiment": header.get("experiment", ""), "algo": header.get("algo", ""),
             "finals": [], "seeds": []},
        )
        group["finals"].append(records[-1])
        group["seeds"].append(header.get("seed"))
    if len(by_hash) > 1 and not args.force_mixed:
        hashes = ", ".join(h[:12] for h in sorted(by_hash))
        raise ConfigError(
            f"inputs mix {len(by_hash)} config hashes ({hashes}); "
            "pass --force-mixed to aggregate anyway"
        )

    rows = []
    for chash in sorted(by_hash):
        group = by_hash[chash]
        summary = metrics.summarize_trials(group["finals"])
        rows.append(
            {
                "experiment": group["experiment"],
                "algo": group["algo"],
                "config_hash": chash[:12],
                "n_trials": len(group["finals"]),
                "total_acc_median": round(summary["total_acc"].median, 6),
                "total_acc_lo": round(summary["total_acc"].lo, 6),
                "total_acc_hi": round(summary["total_acc"].hi, 6),
                "straggler_acc_median": round(summary["straggler_acc"].median, 6),
                "straggler_acc_lo": round(summary["straggler_acc"].lo, 6),
                "straggler_acc_hi": round(summary["straggler_acc"].hi, 6),
                "time_s_median": round(summary["virtual_time_s"].median, 2),
            }
        )
    fieldnames = list(rows[0].keys())
    metrics.write_csv(args.out, rows, fieldnames)
    for row in rows:
        print(
            f"{row['experiment'] or row['algo']}: n={row['n_trials']} "
            f"total={row['total_acc_median']:.4f} "
            f"straggler={row['straggler_acc_median']:.4f} "
            f"[{row['straggler_acc_lo']:.4f}, {row['straggler_acc_hi']:.4f}] "
            f"time_s={row['time_s_median']}"
        )
    print(f"wrote {args.out}")
    return 0


def cmd_latency_report(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    dataset = build_dataset(config.dataset, config.effective_data_seed())
    gen = rng.stream(args.seed, rng.LATENCY)
    n_groups = max(1, len(dataset.shards))
    epochs = max(1, round(args.draws / n_groups))
    table = latency_percentiles(config.latency, dataset, gen, epochs)
    rows = [
        {"group": group, "percentile": pct, "seconds": round(seconds, 4)}
        for group, cols in sorted(table.items())
        for pct, seconds in sorted(cols.items())
    ]
    metrics.write_csv(args.out, rows, ["group", "percentile", "seconds"])
    for row in rows:
        print(f"{row['group']:>9} p{row['percentile']:<4} {row['seconds']:.2f}s")
    if "standard" in table and "straggler" in table:
        ratio = table["straggler"][50.0] / table["standard"][50.0]
        print(f"straggler/standard median ratio: {ratio:.2f}")
    print(f"wrote {args.out}")
    return 0


def cmd_data_report(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    dataset = build_dataset(config.dataset, config.effective_data_seed())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    clients_csv = out_dir / "clients.csv"
    classes_csv = out_dir / "classes.csv"
    metrics.write_csv(
        clients_csv, shard_report_rows(dataset), ["client_id", "group", "n_examples"]
    )
    metrics.write_csv(classes_csv, class_report_rows(dataset), ["group", "class", "n_examples"])
    n_straggler = len(dataset.straggler_client_ids)
    n_examples = sum(s.n_examples for s in dataset.shards)
    print(
        f"{dataset.n_clients} clients ({n_straggler} straggler, "
        f"{dataset.n_clients - n_straggler} standard), {n_examples} examples, "
        f"{len(dataset.dropped_clients)} shard(s) dropped"
    )
    print(f"eval: {len(dataset.eval_total)} total, {len(dataset.eval_straggler)} straggler-class")
    print(f"wrote {clients_csv} and {classes_csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stragglersim",
        description="Discrete-event simulator for federated learning with straggler clients.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment's trials")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override base seed")
    p.add_argument("--trials", type=int, default=None, help="override trial count")
    p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid-sweep parameters over a base config")
    p.add_argument("--config", required=True, help="sweep config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="numerical verification suite")
    p.add_argument("--suite", default="all",
                   help="all, gap_recursion, gap_zero_mean, local_grad_norm, "
                        "gap_norm_bound, or stationarity_schedule")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="aggregate trial logs into a CSV")
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   help="log directories or .jsonl files")
    p.add_argument("--out", required=True, help="summary CSV path")
    p.add_argument("--force-mixed", action="store_true",
                   help="aggregate logs with different config hashes")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("latency-report", help="latency percentiles by client group")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="CSV path")
    p.add_argument("--draws", type=int, default=1_000_000, help="total Monte Carlo draws")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_latency_report)

    p = sub.add_parser("data-report", help="dataset composition tables")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_data_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        missing = exc.filename if exc.filename else str(exc)
        print(f"error: file not found: {missing}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
