"""Command-line entry point: train runs, zero-shot evaluation, level
inspection, suite generation, and metrics plotting."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import algos
from .configio import ConfigError, parse_config
from .levels import LevelError, block_count, load_level, shortest_path_len
from .metrics import EvalSuite, solved_rate, write_metrics_csv, read_metrics_csv
from .suites import generate_suite


def _cmd_train(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state = algos.train(cfg)
    write_metrics_csv(out / "metrics.csv", state.rows)
    algos.save_checkpoint(out / "checkpoint.pkl", state)
    print(f"trained {cfg.algorithm} for {state.iteration} iterations "
          f"({state.counter.steps} env steps); metrics -> {out / 'metrics.csv'}")
    return 0


def _cmd_eval(args) -> int:
    state = algos.load_checkpoint(args.checkpoint)
    suite = EvalSuite.from_manifest(args.suite, episodes_per_level=args.episodes)
    means, sds = solved_rate(state.agents["protagonist"].params, suite,
                             seeds=[args.seed], tmax=state.cfg.tmax)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "solved_rate_mean", "solved_rate_sd"])
        for name, m, s in zip(suite.names, means, sds):
            writer.writerow([name, repr(float(m)), repr(float(s))])
    print(f"evaluated {len(suite.levels)} levels -> {args.out} "
          f"(overall mean {means.mean():.3f})")
    return 0


def _cmd_inspect_level(args) -> int:
    level = load_level(args.file)
    path = shortest_path_len(level)
    print(level.ascii_render())
    print(f"blocks: {block_count(level)}")
    print(f"shortest path length: {path}" + (" (unsolvable)" if path == 0 else ""))
    return 0


def _cmd_gen_suite(args) -> int:
    suite = generate_suite(args.kind, args.seed, args.out)
    print(f"wrote {len(suite.levels)} levels to {args.out}")
    return 0


def _cmd_plot(args) -> int:
    rows = read_metrics_csv(args.metrics)
    if not rows:
        raise ValueError("metrics file has no rows")
    out = Path(args.out)
    if out.suffix == ".csv":
        fields = ("return_P", "return_A", "regret", "teacher_entropy",
                  "block_count_mean", "shortest_path_mean", "solved_rate_eval")
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["field", "first", "last", "mean"])
            for f in fields:
                vals = [getattr(r, f) for r in rows]
                writer.writerow([f, vals[0], vals[-1], float(np.mean(vals))])
    else:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        its = [r.iteration for r in rows]
        fig, axes = plt.subplots(2, 2, figsize=(10, 7))
        axes[0, 0].plot(its, [r.return_P for r in rows], label="protagonist")
        axes[0, 0].plot(its, [r.return_A for r in rows], label="antagonist")
        axes[0, 0].set_title("returns")
        axes[0, 0].legend()
        axes[0, 1].plot(its, [r.regret for r in rows])
        axes[0, 1].set_title("regret / score")
        axes[1, 0].plot(its, [r.teacher_entropy for r in rows], label="teacher")
        axes[1, 0].plot(its, [r.student_entropy for r in rows], label="students")
        axes[1, 0].set_title("policy entropy")
        axes[1, 0].legend()
        axes[1, 1].plot(its, [r.block_count_mean for r in rows], label="blocks")
        axes[1, 1].plot(its, [r.shortest_path_mean for r in rows], label="path len")
        axes[1, 1].set_title("level complexity")
        axes[1, 1].legend()
        fig.tight_layout()
        fig.savefig(out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uedlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run a training configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="zero-shot evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--suite", required=True, help="suite manifest.json")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("inspect-level", help="render a level file")
    p.add_argument("file")
    p.set_defaults(fn=_cmd_inspect_level)

    p = sub.add_parser("gen-suite", help="generate a held-out suite")
    p.add_argument("--kind", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen_suite)

    p = sub.add_parser("plot", help="plot or summarize a metrics CSV")
    p.add_argument("--metrics", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, LevelError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
