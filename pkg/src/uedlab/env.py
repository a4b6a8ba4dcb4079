"""Maze simulators: the student navigation POMDP and the teacher design MDP.

The student sees a 7x7 egocentric window anchored on its own cell and
extending forward, one-hot over {empty, wall, goal, out-of-bounds}, plus a
heading one-hot. The teacher builds a level cell by cell: N wall placements,
then the goal, then the agent start.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .levels import DIR_VECS, LevelError, MazeLevel

# Student action indices.
TURN_LEFT, TURN_RIGHT, FORWARD = 0, 1, 2
N_STUDENT_ACTIONS = 3

VIEW_SIZE = 7
N_CELL_CATEGORIES = 4  # empty, wall, goal, out-of-bounds
STUDENT_OBS_DIM = VIEW_SIZE * VIEW_SIZE * N_CELL_CATEGORIES + 4

DEFAULT_TMAX = 250
NOISE_DIM = 16

_EYE4 = np.eye(N_CELL_CATEGORIES)


def student_obs_dim() -> int:
    return STUDENT_OBS_DIM


def designer_obs_dim(width: int, height: int, max_budget: int,
                     noise_dim: int = NOISE_DIM) -> int:
    return width * height * N_CELL_CATEGORIES + (max_budget + 2) + noise_dim


def padded_category_grid(level: MazeLevel) -> np.ndarray:
    """Category grid padded by 6 cells of out-of-bounds (category 3) per side."""
    pad = VIEW_SIZE - 1
    grid = np.full((level.height + 2 * pad, level.width + 2 * pad), 3, dtype=np.int64)
    grid[pad:pad + level.height, pad:pad + level.width] = level.category_grid()
    return grid


def encode_partial_obs(padded_grid: np.ndarray, pos, heading: int) -> np.ndarray:
    """7x7 forward-facing window, agent at the near edge center, one-hot encoded."""
    pad = VIEW_SIZE - 1
    r, c = pos[0] + pad, pos[1] + pad
    if heading == 3:    # north: forward is -row
        win = padded_grid[r - 6:r + 1, c - 3:c + 4]
    elif heading == 0:  # east
        win = np.rot90(padded_grid[r - 3:r + 4, c:c + 7], 1)
    elif heading == 1:  # south
        win = np.rot90(padded_grid[r:r + 7, c - 3:c + 4], 2)
    else:               # west
        win = np.rot90(padded_grid[r - 3:r + 4, c - 6:c + 1], 3)
    out = np.empty(STUDENT_OBS_DIM)
    out[:VIEW_SIZE * VIEW_SIZE * N_CELL_CATEGORIES] = _EYE4[win].ravel()
    head = np.zeros(4)
    head[heading] = 1.0
    out[VIEW_SIZE * VIEW_SIZE * N_CELL_CATEGORIES:] = head
    return out


class MazeSim:
    """Deterministic student POMDP for one fixed level.

    Episode ends either by reaching the goal (terminal, reward 1 - T/Tmax)
    or by truncation at Tmax steps (reward 0 overall).
    """

    n_actions = N_STUDENT_ACTIONS

    def __init__(self, level: MazeLevel, tmax: int = DEFAULT_TMAX, rng_seed: int = 0):
        level.validate()
        self.level = level
        self.tmax = tmax
        self.rng_seed = rng_seed  # kept for the instantiate() contract; dynamics are deterministic
        self._padded = padded_category_grid(level)
        self.reset()

    def reset(self) -> np.ndarray:
        self.pos = self.level.agent_pos
        self.heading = self.level.agent_dir
        self.t = 0
        self.terminal = False
        return self.observe()

    def observe(self) -> np.ndarray:
        return encode_partial_obs(self._padded, self.pos, self.heading)

    def step(self, action: int):
        if action not in (TURN_LEFT, TURN_RIGHT, FORWARD):
            raise ValueError(f"invalid student action {action}; expected 0, 1 or 2")
        if self.terminal:
            raise RuntimeError("step() called on a terminal episode")
        reward = 0.0
        done = False
        if action == TURN_LEFT:
            self.heading = (self.heading + 3) % 4
        elif action == TURN_RIGHT:
            self.heading = (self.heading + 1) % 4
        else:
            dr, dc = DIR_VECS[self.heading]
            target = (self.pos[0] + dr, self.pos[1] + dc)
            if not self.level.is_wall(target):
                self.pos = target
        self.t += 1
        if self.pos == self.level.goal_pos:
            reward = 1.0 - self.t / self.tmax
            done = True
            self.terminal = True
        return self.observe(), reward, done


@dataclass
class BudgetMode:
    """Wall budget distribution for the designer: fixed(n) or uniform(lo, hi)."""

    kind: str = "uniform"
    fixed: int = 25
    lo: int = 0
    hi: int = 60

    def max_budget(self) -> int:
        return self.fixed if self.kind == "fixed" else self.hi


def sample_budget(mode: BudgetMode, rng: np.random.Generator) -> int:
    if mode.kind == "fixed":
        return mode.fixed
    if mode.kind == "uniform":
        return int(rng.integers(mode.lo, mode.hi + 1))
    raise ValueError(f"unknown budget mode {mode.kind!r}")


class DesignerSim:
    """Teacher level-design MDP: N wall placements, then goal, then agent start.

    Actions index the full width*height grid. Wall placements on border or
    already-walled cells are no-ops. Goal/agent placement clears any wall on
    the chosen cell; border targets and an agent placed on the goal relocate
    to the first free interior cell in row-major order. All rewards are 0;
    the training loop patches the sparse regret reward onto the final step.
    """

    def __init__(self, budget: int, width: int = 13, height: int = 13,
                 max_budget: int | None = None, noise_dim: int = NOISE_DIM,
                 rng: np.random.Generator | None = None):
        if budget < 0:
            raise ValueError(f"negative budget {budget}")
        self.width = width
        self.height = height
        self.budget = budget
        self.max_budget = budget if max_budget is None else max_budget
        if self.budget > self.max_budget:
            raise ValueError(f"budget {budget} exceeds max_budget {self.max_budget}")
        self.noise_dim = noise_dim
        self.n_actions = width * height
        self._rng = rng if rng is not None else np.random.default_rng(0)
        self.reset()

    @property
    def episode_len(self) -> int:
        return self.budget + 2

    def reset(self) -> np.ndarray:
        self.t = 0
        self.walls = set()
        self.goal_pos = None
        self.agent_pos = None
        self.noise = self._rng.standard_normal(self.noise_dim)
        self.terminal = False
        return self.observe()

    def _is_interior(self, cell) -> bool:
        r, c = cell
        return 0 < r < self.height - 1 and 0 < c < self.width - 1

    def _first_free_interior(self, taken) -> tuple:
        for r in range(1, self.height - 1):
            for c in range(1, self.width - 1):
                cell = (r, c)
                if cell not in self.walls and cell not in taken:
                    return cell
        raise LevelError("no free interior cell available")

    def observe(self) -> np.ndarray:
        grid = np.zeros((self.height, self.width), dtype=np.int64)
        grid[0, :] = grid[-1, :] = 1
        grid[:, 0] = grid[:, -1] = 1
        for r, c in self.walls:
            grid[r, c] = 1
        if self.goal_pos is not None:
            grid[self.goal_pos] = 2
        if self.agent_pos is not None:
            grid[self.agent_pos] = 3
        onehot = np.eye(N_CELL_CATEGORIES)[grid].ravel()
        step = np.zeros(self.max_budget + 2)
        step[min(self.t, self.max_budget + 1)] = 1.0
        return np.concatenate([onehot, step, self.noise])

    def step(self, action: int):
        if not 0 <= action < self.n_actions:
            raise ValueError(
                f"invalid designer action {action}; expected 0..{self.n_actions - 1}")
        if self.terminal:
            raise RuntimeError("step() called on a terminal episode")
        cell = (action // self.width, action % self.width)
        if self.t < self.budget:
            if self._is_interior(cell):
                self.walls.add(cell)
        elif self.t == self.budget:
            if not self._is_interior(cell):
                cell = self._first_free_interior(taken=())
            self.walls.discard(cell)
            self.goal_pos = cell
        else:
            if not self._is_interior(cell) or cell == self.goal_pos:
                cell = self._first_free_interior(taken=(self.goal_pos,))
            else:
                self.walls.discard(cell)
            self.agent_pos = cell
        self.t += 1
        done = self.t >= self.episode_len
        if done:
            self.terminal = True
        return self.observe(), 0.0, done

    def level(self) -> MazeLevel:
        if not self.terminal:
            raise RuntimeError("level() requires a finished designer episode")
        return MazeLevel(
            width=self.width, height=self.height, walls=frozenset(self.walls),
            agent_pos=self.agent_pos, agent_dir=0, goal_pos=self.goal_pos,
        ).validate()


def random_level(budget: int, width: int = 13, height: int = 13,
                 rng: np.random.Generator | None = None) -> MazeLevel:
    """Level drawn by running the designer MDP with uniform-random actions."""
    rng = rng if rng is not None else np.random.default_rng(0)
    sim = DesignerSim(budget, width=width, height=height, rng=rng)
    done = False
    while not done:
        _, _, done = sim.step(int(rng.integers(sim.n_actions)))
    return sim.level()


# Environment registry: env-id tag -> simulator factory.
ENV_REGISTRY = {"maze": MazeSim}


def instantiate(level, rng_seed: int = 0, tmax: int = DEFAULT_TMAX):
    """Build a stepped simulation from registered level parameters."""
    env_id = getattr(level, "env_id", None)
    if env_id not in ENV_REGISTRY:
        raise LevelError(f"unknown environment id {env_id!r}")
    return ENV_REGISTRY[env_id](level, tmax=tmax, rng_seed=rng_seed)
