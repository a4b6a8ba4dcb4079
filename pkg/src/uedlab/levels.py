"""Maze level parameters: the free design vector of the underspecified maze POMDP.

A level is an immutable wall layout on a ``width x height`` grid whose outer
border is always wall, plus an agent start (position + heading) and a goal
cell. Levels carry a stable 64-bit hash of their canonical serialization so
they can be deduplicated inside replay buffers and manifests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

LEVEL_FORMAT_VERSION = 1

# Headings: 0=east, 1=south, 2=west, 3=north (row, col deltas).
DIR_VECS = ((0, 1), (1, 0), (0, -1), (-1, 0))
DIR_NAMES = ("east", "south", "west", "north")


class LevelError(ValueError):
    """Raised for malformed or invalid level parameters."""


@dataclass(frozen=True)
class MazeLevel:
    """One full assignment of the maze's free parameters."""

    width: int = 13
    height: int = 13
    walls: frozenset = field(default_factory=frozenset)  # interior (row, col) cells
    agent_pos: tuple = (1, 1)
    agent_dir: int = 0
    goal_pos: tuple = (11, 11)

    env_id = "maze"

    def is_border(self, cell) -> bool:
        r, c = cell
        return r == 0 or c == 0 or r == self.height - 1 or c == self.width - 1

    def in_grid(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def is_interior(self, cell) -> bool:
        return self.in_grid(cell) and not self.is_border(cell)

    def is_wall(self, cell) -> bool:
        """Border cells and out-of-grid cells block like walls."""
        if not self.in_grid(cell):
            return True
        return self.is_border(cell) or tuple(cell) in self.walls

    def interior_cells(self) -> Iterator[tuple]:
        for r in range(1, self.height - 1):
            for c in range(1, self.width - 1):
                yield (r, c)

    def validate(self) -> "MazeLevel":
        if self.width < 3 or self.height < 3:
            raise LevelError(f"grid too small: {self.width}x{self.height}")
        if not self.is_interior(self.agent_pos):
            raise LevelError(f"agent_pos {self.agent_pos} is not an interior cell")
        if not self.is_interior(self.goal_pos):
            raise LevelError(f"goal_pos {self.goal_pos} is not an interior cell")
        if self.agent_pos == self.goal_pos:
            raise LevelError(f"agent_pos equals goal_pos: {self.agent_pos}")
        if self.agent_dir not in (0, 1, 2, 3):
            raise LevelError(f"agent_dir {self.agent_dir} not in 0..3")
        for cell in self.walls:
            if not self.is_interior(cell):
                raise LevelError(f"wall cell {cell} is not an interior cell")
        if self.agent_pos in self.walls:
            raise LevelError(f"agent_pos {self.agent_pos} is a wall cell")
        if self.goal_pos in self.walls:
            raise LevelError(f"goal_pos {self.goal_pos} is a wall cell")
        return self

    def canonical_json(self) -> str:
        """Canonical serialization: sorted wall list, compact separators."""
        doc = {
            "version": LEVEL_FORMAT_VERSION,
            "width": self.width,
            "height": self.height,
            "walls": sorted([list(w) for w in self.walls]),
            "agent": [self.agent_pos[0], self.agent_pos[1], self.agent_dir],
            "goal": [self.goal_pos[0], self.goal_pos[1]],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def level_hash(self) -> int:
        """Stable 64-bit digest of the canonical serialization."""
        digest = hashlib.sha256(self.canonical_json().encode("ascii")).digest()
        return int.from_bytes(digest[:8], "big")

    def with_walls(self, walls) -> "MazeLevel":
        return replace(self, walls=frozenset(walls))

    def category_grid(self) -> np.ndarray:
        """Cell categories: 0=empty, 1=wall (incl. border), 2=goal."""
        grid = np.zeros((self.height, self.width), dtype=np.int64)
        grid[0, :] = grid[-1, :] = 1
        grid[:, 0] = grid[:, -1] = 1
        for r, c in self.walls:
            grid[r, c] = 1
        grid[self.goal_pos] = 2
        return grid

    def ascii_render(self) -> str:
        grid = self.category_grid()
        chars = {0: ".", 1: "#", 2: "G"}
        rows = []
        agent_char = ">v<^"[self.agent_dir]
        for r in range(self.height):
            row = []
            for c in range(self.width):
                if (r, c) == self.agent_pos:
                    row.append(agent_char)
                else:
                    row.append(chars[grid[r, c]])
            rows.append("".join(row))
        return "\n".join(rows)


def level_from_json(text: str) -> MazeLevel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LevelError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise LevelError("level document must be a JSON object")
    missing = {"version", "width", "height", "walls", "agent", "goal"} - doc.keys()
    if missing:
        raise LevelError(f"missing fields: {sorted(missing)}")
    if doc["version"] != LEVEL_FORMAT_VERSION:
        raise LevelError(f"unsupported level format version {doc['version']}")
    agent = doc["agent"]
    if len(agent) != 3:
        raise LevelError("agent must be [row, col, dir]")
    level = MazeLevel(
        width=int(doc["width"]),
        height=int(doc["height"]),
        walls=frozenset((int(r), int(c)) for r, c in doc["walls"]),
        agent_pos=(int(agent[0]), int(agent[1])),
        agent_dir=int(agent[2]),
        goal_pos=(int(doc["goal"][0]), int(doc["goal"][1])),
    )
    return level.validate()


def save_level(level: MazeLevel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(level.canonical_json())
        fh.write("\n")


def load_level(path) -> MazeLevel:
    with open(path, "r", encoding="ascii") as fh:
        return level_from_json(fh.read())


def block_count(level: MazeLevel) -> int:
    """Number of interior wall cells."""
    return len(level.walls)


def shortest_path_len(level: MazeLevel) -> int:
    """BFS distance in 4-connected moves from agent to goal; 0 if unreachable."""
    if level.agent_pos == level.goal_pos:
        return 0
    seen = {level.agent_pos}
    frontier = [level.agent_pos]
    dist = 0
    while frontier:
        dist += 1
        nxt = []
        for r, c in frontier:
            for dr, dc in DIR_VECS:
                cell = (r + dr, c + dc)
                if cell == level.goal_pos:
                    return dist
                if cell not in seen and not level.is_wall(cell):
                    seen.add(cell)
                    nxt.append(cell)
        frontier = nxt
    return 0


def is_solvable(level: MazeLevel) -> bool:
    return shortest_path_len(level) > 0
