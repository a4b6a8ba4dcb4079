"""Curated level store with rank prioritization, staleness mixing, and
random level editing.

Replay sampling mixes two distributions: rank-based score weights
(1/rank)^(1/beta) and staleness proportional to steps since an entry was
last sampled. Insertion into a full buffer requires strictly beating the
current minimum score; duplicates (by level hash) refresh in place.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .levels import MazeLevel, level_from_json


@dataclass
class BufferConfig:
    capacity: int = 4000
    temperature: float = 0.3
    staleness_coef: float = 0.5
    replay_rate: float = 0.5

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {self.capacity}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 <= self.staleness_coef <= 1.0:
            raise ValueError(f"staleness_coef must be in [0,1], got {self.staleness_coef}")
        if not 0.0 <= self.replay_rate <= 1.0:
            raise ValueError(f"replay_rate must be in [0,1], got {self.replay_rate}")


@dataclass
class BufferEntry:
    level: MazeLevel
    score: float
    created_step: int
    last_sampled_step: int
    seq: int = 0  # insertion order, breaks score ties in ranking


def replay_decision(cfg: BufferConfig, rng: np.random.Generator) -> bool:
    """Bernoulli(replay_rate) coin for replay-vs-explore."""
    return bool(rng.random() < cfg.replay_rate)


class LevelBuffer:
    def __init__(self, cfg: BufferConfig):
        self.cfg = cfg
        self.entries: list[BufferEntry] = []
        self._by_hash: dict[int, BufferEntry] = {}
        self._seq = 0

    def __len__(self) -> int:
        return len(self.entries)

    def min_score(self) -> float:
        return min(e.score for e in self.entries)

    def maybe_insert(self, level: MazeLevel, score: float, step: int) -> bool:
        """Insert unless full with min score >= score; dedupe by level hash."""
        if not np.isfinite(score):
            raise ValueError(f"non-finite score {score}")
        h = level.level_hash()
        existing = self._by_hash.get(h)
        if existing is not None:
            existing.score = score
            existing.last_sampled_step = step
            return False
        if len(self.entries) >= self.cfg.capacity:
            victim = min(self.entries, key=lambda e: (e.score, -e.seq))
            if score <= victim.score:
                return False
            self.entries.remove(victim)
            del self._by_hash[victim.level.level_hash()]
        entry = BufferEntry(level=level, score=score, created_step=step,
                            last_sampled_step=step, seq=self._seq)
        self._seq += 1
        self.entries.append(entry)
        self._by_hash[h] = entry
        return True

    def _probabilities(self, global_step: int) -> np.ndarray:
        scores = np.array([e.score for e in self.entries])
        seqs = np.array([e.seq for e in self.entries])
        # rank 1 = highest score; ties broken by insertion order
        order = np.lexsort((seqs, -scores))
        ranks = np.empty(len(order), dtype=np.float64)
        ranks[order] = np.arange(1, len(order) + 1)
        w_score = ranks ** (-1.0 / self.cfg.temperature)
        p_score = w_score / w_score.sum()
        stale = np.array([global_step - e.last_sampled_step for e in self.entries],
                         dtype=np.float64)
        stale = np.maximum(stale, 0.0)
        if stale.sum() <= 0:
            p_stale = np.full(len(stale), 1.0 / len(stale))
        else:
            p_stale = stale / stale.sum()
        rho = self.cfg.staleness_coef
        return (1.0 - rho) * p_score + rho * p_stale

    def sample_level(self, global_step: int, rng: np.random.Generator) -> BufferEntry:
        if not self.entries:
            raise IndexError("cannot sample from an empty buffer")
        probs = self._probabilities(global_step)
        i = int(rng.choice(len(self.entries), p=probs))
        self.entries[i].last_sampled_step = global_step
        return self.entries[i]

    def sample_many(self, global_step: int, rng: np.random.Generator,
                    n: int) -> np.ndarray:
        """n draws from the current sampling distribution, without staleness
        updates; with staleness_coef 0 this equals n sequential samples."""
        if not self.entries:
            raise IndexError("cannot sample from an empty buffer")
        probs = self._probabilities(global_step)
        return rng.choice(len(self.entries), size=n, p=probs)

    def to_payload(self) -> dict:
        return {
            "seq": self._seq,
            "entries": [
                {
                    "level": e.level.canonical_json(),
                    "score": e.score,
                    "created_step": e.created_step,
                    "last_sampled_step": e.last_sampled_step,
                    "seq": e.seq,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_payload(cls, cfg: BufferConfig, payload: dict) -> "LevelBuffer":
        buf = cls(cfg)
        buf._seq = payload["seq"]
        for doc in payload["entries"]:
            entry = BufferEntry(
                level=level_from_json(doc["level"]),
                score=doc["score"],
                created_step=doc["created_step"],
                last_sampled_step=doc["last_sampled_step"],
                seq=doc["seq"],
            )
            buf.entries.append(entry)
            buf._by_hash[entry.level.level_hash()] = entry
        return buf


def edit_level(level: MazeLevel, n_edits: int, rng: np.random.Generator) -> MazeLevel:
    """Apply random edits: wall toggles, goal moves, agent moves.

    Each edit retries up to 10 times to keep the level valid, else it is
    skipped. Grid dimensions and border walls are never touched.
    """
    if n_edits < 1:
        raise ValueError(f"n_edits must be >= 1, got {n_edits}")
    interior = [(r, c) for r in range(1, level.height - 1)
                for c in range(1, level.width - 1)]
    walls = set(level.walls)
    agent_pos = level.agent_pos
    goal_pos = level.goal_pos
    for _ in range(n_edits):
        kind = int(rng.integers(3))
        for _ in range(10):
            cell = interior[int(rng.integers(len(interior)))]
            if kind == 0:  # toggle wall
                if cell in (agent_pos, goal_pos):
                    continue
                if cell in walls:
                    walls.discard(cell)
                else:
                    walls.add(cell)
                break
            if kind == 1:  # move goal
                if cell in walls or cell == agent_pos:
                    continue
                goal_pos = cell
                break
            if cell in walls or cell == goal_pos:  # move agent
                continue
            agent_pos = cell
            break
    edited = MazeLevel(width=level.width, height=level.height,
                       walls=frozenset(walls), agent_pos=agent_pos,
                       agent_dir=level.agent_dir, goal_pos=goal_pos)
    return edited.validate()
