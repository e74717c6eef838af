"""Command-line front end.

Subcommands: corrupt, detect, sweep, trace, print-config. Exit codes:
0 success, 2 configuration error, 3 runtime/numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import parse_config, render_config
from .corruption import corrupt, realized_rates
from .data import save_csv
from .errors import ConfigurationError
from .pipeline import build_dataset, run_detect, run_sweep, run_trace

JOBS_ENV_VAR = "MISLABEL_FORGE_JOBS"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mislabel-forge",
        description="Inject label errors, train with robust losses, and detect mislabelled samples.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, need_config=True):
        p.add_argument("--config", required=need_config, help="experiment config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="override the run seed list with one seed")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument(
            "--jobs",
            type=int,
            default=None,
            help=f"worker processes (default: ${JOBS_ENV_VAR} or the config value)",
        )

    add_common(sub.add_parser("corrupt", help="write a corrupted copy of the dataset"))
    add_common(sub.add_parser("detect", help="run the detection pipeline across seeds"))
    add_common(sub.add_parser("sweep", help="run the detection pipeline over a parameter grid"))
    add_common(sub.add_parser("trace", help="dump per-epoch probability/gradient/margin traces"))
    p = sub.add_parser("print-config", help="print the fully resolved configuration")
    add_common(p, need_config=False)
    return parser


def _load_config(args):
    overrides = {}
    if args.seed is not None:
        overrides["run.seeds"] = str(args.seed)
    jobs = args.jobs
    if jobs is None:
        env = os.environ.get(JOBS_ENV_VAR, "").strip()
        if env:
            try:
                jobs = int(env)
            except ValueError:
                raise ConfigurationError(f"${JOBS_ENV_VAR} must be an integer, got {env!r}") from None
    if jobs is not None:
        overrides["run.jobs"] = str(jobs)
    return parse_config(path=args.config, overrides=overrides)


def cmd_corrupt(args) -> int:
    cfg = _load_config(args)
    clean = build_dataset(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corrupted = corrupt(clean, cfg.corruption)
    path = out / "corrupted.csv"
    save_csv(corrupted, path, include_clean=True)
    overall, per_class, flips = realized_rates(corrupted)
    summary = {
        "output": str(path),
        "samples": len(corrupted),
        "realized_eta": overall,
        "per_class_eta": per_class.tolist(),
        "flip_counts": flips.tolist(),
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    report = run_detect(cfg, args.out)
    agg = report["aggregate"]

    def show(metric):
        entry = agg[metric]
        if entry["mean"] is None:
            return f"{metric}: n/a"
        return f"{metric}: {entry['mean']:.4f} (std {entry['std']:.4f}, sem {entry['sem']:.4f})"

    for metric in ("f1", "balanced_accuracy", "precision", "recall"):
        print(show(metric))
    print(f"report: {Path(args.out) / 'report.json'}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    summary = run_sweep(cfg, args.out)
    best = max(
        summary["cells"],
        key=lambda c: c["f1"]["mean"] if c["f1"]["mean"] is not None else float("-inf"),
    )
    print(
        f"best cell: {best['param_name']}={best['param_value']:g} at eta={best['eta']:g} "
        f"(mean F1 {best['f1']['mean']:.4f})"
    )
    print(f"rows: {Path(args.out) / 'sweep.csv'}")
    return 0


def cmd_trace(args) -> int:
    cfg = _load_config(args)
    summary = run_trace(cfg, args.out)
    agg = summary["aggregate"]
    d = agg["aum_cohens_d"]["mean"]
    w = agg["aum_wasserstein"]["mean"]
    print(f"margin separation: cohens_d {d if d is None else round(d, 4)}, wasserstein {w if w is None else round(w, 4)}")
    print(f"summary: {Path(args.out) / 'trace_summary.json'}")
    return 0


def cmd_print_config(args) -> int:
    if args.config:
        cfg = _load_config(args)
        sys.stdout.write(render_config(cfg))
    else:
        sys.stdout.write(render_config(None))
    return 0


COMMANDS = {
    "corrupt": cmd_corrupt,
    "detect": cmd_detect,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
    "print-config": cmd_print_config,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime / numeric failure
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
