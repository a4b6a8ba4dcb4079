"""Procedurally generated held-out evaluation mazes.

These are deterministic analogues of the usual zero-shot transfer layouts
(rooms, labyrinth, random maze, corridors), each built from a named seed on
the 13x13 grid; plus a small-grid easy suite for learning smoke tests.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .env import random_level
from .levels import MazeLevel, is_solvable, save_level, shortest_path_len
from .metrics import EvalSuite


def _level(walls, agent, goal, size=13, agent_dir=0) -> MazeLevel:
    lvl = MazeLevel(width=size, height=size, walls=frozenset(walls),
                    agent_pos=agent, agent_dir=agent_dir, goal_pos=goal).validate()
    if not is_solvable(lvl):
        raise AssertionError("generated suite level is unsolvable")
    return lvl


def four_rooms(rng: np.random.Generator) -> MazeLevel:
    walls = {(6, c) for c in range(1, 12)} | {(r, 6) for r in range(1, 12)}
    for door in ((6, int(rng.integers(1, 6))), (6, int(rng.integers(7, 12))),
                 (int(rng.integers(1, 6)), 6), (int(rng.integers(7, 12)), 6)):
        walls.discard(door)
    return _level(walls, agent=(1, 1), goal=(11, 11))


def sixteen_rooms(rng: np.random.Generator) -> MazeLevel:
    lines = (3, 6, 9)
    bands = ((1, 2), (4, 5), (7, 8), (10, 11))
    walls = set()
    for line in lines:
        walls |= {(line, c) for c in range(1, 12)}
        walls |= {(r, line) for r in range(1, 12)}
    for line in lines:
        for lo, hi in bands:
            walls.discard((line, int(rng.integers(lo, hi + 1))))
            walls.discard((int(rng.integers(lo, hi + 1)), line))
    return _level(walls, agent=(1, 1), goal=(11, 11))


def labyrinth(rng: np.random.Generator) -> MazeLevel:
    walls = set()
    # concentric square rings with alternating gaps spiralling inwards
    for k, (lo, hi) in enumerate(((2, 10), (4, 8))):
        ring = {(lo, c) for c in range(lo, hi + 1)} | {(hi, c) for c in range(lo, hi + 1)}
        ring |= {(r, lo) for r in range(lo, hi + 1)} | {(r, hi) for r in range(lo, hi + 1)}
        gap = (lo, 6) if k % 2 else (hi, 6)
        ring.discard(gap)
        walls |= ring
    return _level(walls, agent=(1, 1), goal=(6, 6))


def random_maze(rng: np.random.Generator) -> MazeLevel:
    """Perfect maze carved by randomized depth-first search on a 6x6 lattice."""
    free = set()
    cells = [(r, c) for r in range(1, 12, 2) for c in range(1, 12, 2)]
    stack = [(1, 1)]
    visited = {(1, 1)}
    free.add((1, 1))
    while stack:
        r, c = stack[-1]
        nbrs = [(r + dr, c + dc) for dr, dc in ((0, 2), (2, 0), (0, -2), (-2, 0))
                if (r + dr, c + dc) in cells and (r + dr, c + dc) not in visited]
        if not nbrs:
            stack.pop()
            continue
        nr, nc = nbrs[int(rng.integers(len(nbrs)))]
        free.add((nr, nc))
        free.add(((r + nr) // 2, (c + nc) // 2))
        visited.add((nr, nc))
        stack.append((nr, nc))
    walls = {(r, c) for r in range(1, 12) for c in range(1, 12)} - free
    return _level(walls, agent=(1, 1), goal=(11, 11))


def _corridor(rng: np.random.Generator, tooth_len: int) -> MazeLevel:
    free = {(1, c) for c in range(1, 12)}
    teeth_cols = (1, 3, 5, 7, 9, 11)
    for c in teeth_cols:
        free |= {(r, c) for r in range(1, 1 + tooth_len)}
    goal_col = int(teeth_cols[int(rng.integers(1, len(teeth_cols)))])
    walls = {(r, c) for r in range(1, 12) for c in range(1, 12)} - free
    return _level(walls, agent=(1, 1), goal=(tooth_len, goal_col))


def small_corridor(rng: np.random.Generator) -> MazeLevel:
    return _corridor(rng, tooth_len=5)


def large_corridor(rng: np.random.Generator) -> MazeLevel:
    return _corridor(rng, tooth_len=11)


TEST13_BUILDERS = {
    "sixteen_rooms": sixteen_rooms,
    "labyrinth": labyrinth,
    "maze_a": random_maze,
    "maze_b": random_maze,
    "small_corridor": small_corridor,
    "large_corridor": large_corridor,
    "four_rooms": four_rooms,
}


def test13_suite(seed: int = 0, episodes_per_level: int = 100) -> EvalSuite:
    names, levels = [], []
    for i, (name, builder) in enumerate(sorted(TEST13_BUILDERS.items())):
        rng = np.random.default_rng([seed, i])
        names.append(name)
        levels.append(builder(rng))
    return EvalSuite(names=names, levels=levels,
                     episodes_per_level=episodes_per_level)


def easy_suite(seed: int = 0, n: int = 20, size: int = 7, max_budget: int = 8,
               episodes_per_level: int = 100) -> EvalSuite:
    """Small solvable random levels for learning smoke tests."""
    rng = np.random.default_rng([seed, 777])
    names, levels = [], []
    seen = set()
    while len(levels) < n:
        budget = int(rng.integers(0, max_budget + 1))
        level = random_level(budget, width=size, height=size, rng=rng)
        if not is_solvable(level) or level.level_hash() in seen:
            continue
        seen.add(level.level_hash())
        names.append(f"easy_{len(levels):02d}")
        levels.append(level)
    return EvalSuite(names=names, levels=levels,
                     episodes_per_level=episodes_per_level)


SUITE_KINDS = {
    "test13": test13_suite,
    "easy7": easy_suite,
}


def generate_suite(kind: str, seed: int, out_dir) -> EvalSuite:
    """Build a named suite and write one level file per maze plus a manifest."""
    if kind not in SUITE_KINDS:
        raise ValueError(f"unknown suite kind {kind!r}; choose from {sorted(SUITE_KINDS)}")
    suite = SUITE_KINDS[kind](seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"kind": kind, "seed": seed, "levels": []}
    for name, level in zip(suite.names, suite.levels):
        fname = f"{name}.json"
        save_level(level, out / fname)
        manifest["levels"].append({
            "name": name, "file": fname, "hash": str(level.level_hash()),
            "shortest_path": shortest_path_len(level),
        })
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return suite
