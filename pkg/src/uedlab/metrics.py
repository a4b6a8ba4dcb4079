"""Evaluation metrics and the metrics-stream schema.

Zero-shot evaluation runs episodes per level in sequence (never mixing
parallel early-exit bias into the sample), and aggregates with the
interquartile mean / optimality gap / percentile-bootstrap trio.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from .env import MazeSim
from .levels import load_level
from .rollout import rollout

METRICS_COLUMNS = (
    "iteration", "env_steps", "return_P", "return_A", "regret",
    "teacher_entropy", "student_entropy", "block_count_mean",
    "shortest_path_mean", "solved_rate_eval", "wallclock_s",
)


@dataclass
class MetricsRow:
    iteration: int
    env_steps: int
    return_P: float
    return_A: float
    regret: float
    teacher_entropy: float
    student_entropy: float
    block_count_mean: float
    shortest_path_mean: float
    solved_rate_eval: float
    wallclock_s: float

    def __post_init__(self):
        for f in fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise ValueError(f"non-finite metrics field {f.name}")

    def as_list(self) -> list:
        return [getattr(self, name) for name in METRICS_COLUMNS]


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_metrics_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in row.as_list()])


def read_metrics_csv(path) -> list[MetricsRow]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            out.append(MetricsRow(
                iteration=int(rec["iteration"]), env_steps=int(rec["env_steps"]),
                **{k: float(rec[k]) for k in METRICS_COLUMNS[2:]}))
    return out


@dataclass
class EvalSuite:
    """Named held-out levels plus the per-level episode budget."""

    names: list
    levels: list
    episodes_per_level: int = 100

    def __post_init__(self):
        if len(self.names) != len(self.levels):
            raise ValueError("names and levels length mismatch")
        if len(set(self.names)) != len(self.names):
            raise ValueError("suite names must be unique")
        for level in self.levels:
            level.validate()

    @classmethod
    def from_manifest(cls, manifest_path, episodes_per_level: int = 100) -> "EvalSuite":
        import json
        from pathlib import Path

        root = Path(manifest_path).parent
        with open(manifest_path) as fh:
            manifest = json.load(fh)
        names, levels = [], []
        for entry in manifest["levels"]:
            level = load_level(root / entry["file"])
            if level.level_hash() != int(entry["hash"]):
                raise ValueError(f"hash mismatch for suite level {entry['name']}")
            names.append(entry["name"])
            levels.append(level)
        return cls(names=names, levels=levels, episodes_per_level=episodes_per_level)


def solved_rate(params: dict, suite: EvalSuite, seeds, tmax: int = 250):
    """Per-level mean and standard deviation of the solved rate over seeds.

    Episodes within a level run in sequence for each seed. Returns
    (per-level means, per-level sds), aligned with suite.names.
    """
    if not suite.levels:
        raise ValueError("empty evaluation suite")
    per_level = np.zeros((len(suite.levels), len(seeds)))
    for j, seed in enumerate(seeds):
        rng = np.random.default_rng(seed)
        for i, level in enumerate(suite.levels):
            sim = MazeSim(level, tmax=tmax)
            solved = 0
            for _ in range(suite.episodes_per_level):
                traj = rollout(params, sim, tmax, rng)
                solved += 1 if traj.solved() else 0
            per_level[i, j] = solved / suite.episodes_per_level
    return per_level.mean(axis=1), per_level.std(axis=1)


def iqm(scores) -> float:
    """Interquartile mean: drop floor(n/4) scores from each end by count."""
    scores = np.sort(np.asarray(scores, dtype=np.float64))
    n = len(scores)
    if n < 4:
        raise ValueError(f"iqm needs at least 4 scores, got {n}")
    k = n // 4
    return float(scores[k:n - k].mean())


def optimality_gap(scores, ceiling: float = 1.0) -> float:
    """Mean shortfall below the ceiling; scores above the ceiling count 0."""
    scores = np.asarray(scores, dtype=np.float64)
    return float((ceiling - np.minimum(scores, ceiling)).mean())


def bootstrap_ci(scores, statistic, rng: np.random.Generator,
                 n_resamples: int = 2000, level: float = 0.95):
    """Percentile bootstrap interval for a statistic of the scores."""
    scores = np.asarray(scores, dtype=np.float64)
    stats = np.empty(n_resamples)
    n = len(scores)
    for i in range(n_resamples):
        stats[i] = statistic(scores[rng.integers(0, n, size=n)])
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(lo), float(hi)
