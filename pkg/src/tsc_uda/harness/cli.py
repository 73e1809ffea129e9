"""Command line: run, sweep, compare, gen-data."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from ..data import generate, write_csv
from ..trainer import METRIC_COLUMNS, TrainingDiverged, resolve_dataset, run
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .metrics import MetricsIOError, read_metrics, write_metrics
from .plots import emit_plots


def execute(config: ExperimentConfig, output_dir) -> dict:
    """One run with everything written to ``output_dir``: config echo, CSV, JSON summary, SVG."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = config.replace(output_dir=str(out))
    (out / "config.ini").write_text(dump_config(config))
    result = run(config)
    write_metrics(result, out / "metrics.csv")
    emit_plots(result, out / "curves.svg")
    return {"seed": config.seed, "output_dir": str(out),
            "final_teacher_acc": result.final_teacher_acc, "final_student_acc": result.final_student_acc}


def _fmt_acc(x: float) -> str:
    return "n/a" if np.isnan(x) else f"{x:.4f}"


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    out = execute(cfg, args.output_dir or cfg.output_dir)
    print(f"teacher_acc={_fmt_acc(out['final_teacher_acc'])} student_acc={_fmt_acc(out['final_student_acc'])} "
          f"output={out['output_dir']}")
    return 0


def _sweep_one(job):
    cfg, out = job
    return execute(cfg, out)


def aggregate(csv_paths) -> dict:
    """Per-metric median/min/max of the final logged row, recomputed from the CSVs alone."""
    finals = [{c: float(v[-1]) for c, v in read_metrics(p).items()} for p in csv_paths]
    agg = {}
    for col in METRIC_COLUMNS[1:]:
        vals = np.array([f[col] for f in finals])
        vals = vals[~np.isnan(vals)]
        agg[col] = ({"median": float(np.median(vals)), "min": float(vals.min()), "max": float(vals.max())}
                    if vals.size else None)
    return agg


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    root = Path(args.output_dir or cfg.output_dir)
    jobs = [(cfg.replace(seed=s), root / f"seed_{s}") for s in args.seeds]
    workers = max(1, min(args.jobs, len(jobs)))
    if workers == 1:
        runs = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_sweep_one, jobs))
    csvs = [Path(r["output_dir"]) / "metrics.csv" for r in runs]
    summary = {"seeds": list(args.seeds), "runs": [str(p) for p in csvs], "final": aggregate(csvs)}
    (root / "aggregate.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for r in runs:
        print(f"seed {r['seed']}: teacher_acc={_fmt_acc(r['final_teacher_acc'])} "
              f"student_acc={_fmt_acc(r['final_student_acc'])}")
    print(f"aggregate: {root / 'aggregate.json'}")
    return 0


def compare(a_path, b_path) -> dict:
    """Deltas ``b - a`` per metric: at the final row and the largest absolute one over shared steps."""
    a, b = read_metrics(a_path), read_metrics(b_path)
    shared, ia, ib = np.intersect1d(a["step"], b["step"], return_indices=True)
    if shared.size == 0:
        raise ValueError(f"{a_path} and {b_path} share no logged steps")
    out = {}
    for col in METRIC_COLUMNS[1:]:
        d = b[col][ib] - a[col][ia]
        both_nan = np.isnan(a[col][ia]) & np.isnan(b[col][ib])
        d = np.where(both_nan, 0.0, d)
        out[col] = {"final": float(d[-1]), "max_abs": float(np.max(np.abs(d)))}
    return {"steps_compared": int(shared.size), "deltas": out}


def cmd_compare(args) -> int:
    res = compare(args.a, args.b)
    if args.json:
        print(json.dumps(res, indent=2, sort_keys=True))
        return 0
    print(f"{'metric':<28} {'final delta':>12} {'max |delta|':>12}   ({res['steps_compared']} shared steps)")
    for col, d in res["deltas"].items():
        print(f"{col:<28} {d['final']:>12.6g} {d['max_abs']:>12.6g}")
    return 0


def cmd_gen_data(args) -> int:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    spec = resolve_dataset(cfg)
    source, target = generate(spec)
    write_csv(args.out, source, target)
    print(f"wrote {len(source)} source + {len(target)} target rows to {args.out} (dataset seed {spec.seed})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsc-uda", description="Teacher-student competition for domain adaptation.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train once and write metrics, summary and plot")
    r.add_argument("config", help="INI config file")
    r.add_argument("--seed", type=int, help="override [run] seed")
    r.add_argument("--output-dir", help="override [run] output_dir")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="one run per seed, in parallel, plus aggregate.json")
    s.add_argument("config")
    s.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--output-dir")
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("compare", help="per-metric deltas between two metric CSVs (second minus first)")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--json", action="store_true", help="print the deltas as JSON")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("gen-data", help="write the configured dataset to CSV")
    g.add_argument("config", nargs="?", help="INI config file (defaults if omitted)")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, help="master seed; the dataset seed derives from it unless set")
    g.set_defaults(func=cmd_gen_data)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TrainingDiverged, MetricsIOError, OSError, ValueError) as exc:
        print(f"tsc-uda {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
