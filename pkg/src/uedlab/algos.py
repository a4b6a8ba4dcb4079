"""The training loops: domain randomization, robust level-replay curation,
regret-driven adversarial generation (with optional distillation), and the
evolutionary curation variants.

Every loop advances one iteration at a time over a shared TrainState and
emits the same metrics schema, so runs are directly comparable.
"""

from __future__ import annotations

import pickle
import time
from dataclasses import dataclass, field

import numpy as np

from . import nets, regret
from .buffer import BufferConfig, LevelBuffer, edit_level, replay_decision
from .env import (BudgetMode, DesignerSim, MazeSim, designer_obs_dim, random_level,
                  sample_budget, student_obs_dim, N_STUDENT_ACTIONS, NOISE_DIM)
from .levels import block_count, shortest_path_len
from .metrics import MetricsRow
from .ppo import DistillConfig, PpoConfig, gae, ppo_update, td_errors
from .rollout import (StepCounter, Trajectory, batch_from_trajectories, rollout,
                      undiscounted_return)

CHECKPOINT_VERSION = 1

ALGORITHMS = ("dr", "plr", "paired", "paired_bc", "paired_evo", "flex_paired_evo")


@dataclass
class RunConfig:
    algorithm: str = "paired"
    seed: int = 0
    total_iterations: int = 100
    grid_width: int = 13
    grid_height: int = 13
    tmax: int = 250
    budget: BudgetMode = field(default_factory=BudgetMode)
    episodes_per_eval: int = 1
    hidden_size: int = 64
    noise_dim: int = NOISE_DIM
    n_edits: int = 3
    log_every: int = 1
    record_wallclock: bool = False
    protagonist: PpoConfig = field(default_factory=PpoConfig)
    antagonist: PpoConfig | None = None
    teacher: PpoConfig | None = None
    distill: DistillConfig | None = None
    buffer: BufferConfig | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.total_iterations < 1:
            raise ValueError("total_iterations must be >= 1")
        if self.episodes_per_eval < 1:
            raise ValueError("episodes_per_eval must be >= 1")
        needs_students = self.algorithm in ("paired", "paired_bc", "paired_evo",
                                            "flex_paired_evo")
        if needs_students and self.antagonist is None:
            self.antagonist = PpoConfig(**vars(self.protagonist))
        if self.algorithm in ("paired", "paired_bc") and self.teacher is None:
            self.teacher = PpoConfig(**vars(self.protagonist))
        if self.algorithm in ("plr", "paired_evo", "flex_paired_evo") and self.buffer is None:
            self.buffer = BufferConfig()
        if self.algorithm == "paired_bc" and self.distill is None:
            self.distill = DistillConfig()


@dataclass
class Agent:
    params: dict
    optim: nets.AdamState
    cfg: PpoConfig

    @classmethod
    def fresh(cls, obs_dim: int, n_actions: int, hidden: int, cfg: PpoConfig,
              rng: np.random.Generator) -> "Agent":
        params = nets.init_params(obs_dim, n_actions, hidden, rng)
        return cls(params=params, optim=nets.AdamState.for_params(params), cfg=cfg)


class TrainState:
    """Mutable state of one training run: agents, buffer, RNG, counters."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.counter = StepCounter()
        self.iteration = 0
        self.rows: list[MetricsRow] = []
        self.buffer = LevelBuffer(cfg.buffer) if cfg.buffer is not None else None
        obs_dim = student_obs_dim()
        self.agents: dict[str, Agent] = {
            "protagonist": Agent.fresh(obs_dim, N_STUDENT_ACTIONS, cfg.hidden_size,
                                       cfg.protagonist, self.rng)
        }
        if cfg.antagonist is not None:
            self.agents["antagonist"] = Agent.fresh(
                obs_dim, N_STUDENT_ACTIONS, cfg.hidden_size, cfg.antagonist, self.rng)
        if cfg.teacher is not None:
            t_obs = designer_obs_dim(cfg.grid_width, cfg.grid_height,
                                     cfg.budget.max_budget(), cfg.noise_dim)
            self.agents["teacher"] = Agent.fresh(
                t_obs, cfg.grid_width * cfg.grid_height, cfg.hidden_size,
                cfg.teacher, self.rng)

    # -- rollout helpers ---------------------------------------------------

    def collect_episodes(self, agent: Agent, level, n: int) -> list[Trajectory]:
        sims = MazeSim(level, tmax=self.cfg.tmax)
        return [rollout(agent.params, sims, self.cfg.tmax, self.rng, self.counter)
                for _ in range(n)]

    def evaluate(self, agent: Agent, level, n: int) -> list[Trajectory]:
        """Stop-gradient evaluation: rollouts only, never an update."""
        return self.collect_episodes(agent, level, n)

    def train_student(self, role: str, trajs, distill_target: str | None = None):
        agent = self.agents[role]
        batch = batch_from_trajectories(trajs, gae, agent.cfg.gamma, agent.cfg.lam)
        distill = None
        if distill_target is not None and self.cfg.distill is not None:
            distill = (self.agents[distill_target].params, self.cfg.distill)
        return ppo_update(agent.params, agent.optim, batch, agent.cfg, self.rng,
                          distill=distill)


def mean_return(trajs) -> float:
    return float(np.mean([undiscounted_return(t) for t in trajs]))


def solved_fraction(trajs) -> float:
    return float(np.mean([1.0 if t.solved() else 0.0 for t in trajs]))


def _level_stats(levels):
    if not levels:
        return 0.0, 0.0
    return (float(np.mean([block_count(l) for l in levels])),
            float(np.mean([shortest_path_len(l) for l in levels])))


def _random_level(state: TrainState):
    n = sample_budget(state.cfg.budget, state.rng)
    return random_level(n, width=state.cfg.grid_width,
                        height=state.cfg.grid_height, rng=state.rng)


def _score_fn(state: TrainState):
    if state.cfg.algorithm == "flex_paired_evo":
        return lambda ra, rp: regret.flexible_regret(ra, rp)[0]
    return regret.relative_regret


# -- iteration bodies ------------------------------------------------------


def domain_randomization_iteration(state: TrainState) -> dict:
    cfg = state.cfg
    level = _random_level(state)
    trajs = state.collect_episodes(state.agents["protagonist"], level,
                                   cfg.episodes_per_eval)
    report = state.train_student("protagonist", trajs)
    return {
        "return_P": mean_return(trajs), "return_A": 0.0, "regret": 0.0,
        "teacher_entropy": 0.0, "student_entropy": report.entropy,
        "levels": [level], "solved_rate": solved_fraction(trajs),
    }


def plr_robust_iteration(state: TrainState) -> dict:
    cfg = state.cfg
    agent = state.agents["protagonist"]
    d = replay_decision(state.buffer.cfg, state.rng) and len(state.buffer) > 0

    def pvl_score(trajs) -> float:
        vals = []
        for t in trajs:
            deltas = td_errors(t.rewards, t.values, t.done, agent.cfg.gamma)
            vals.append(regret.positive_value_loss(deltas, agent.cfg.gamma,
                                                   agent.cfg.lam))
        return float(np.mean(vals))

    if not d:
        level = _random_level(state)
        trajs = state.evaluate(agent, level, cfg.episodes_per_eval)
        score = pvl_score(trajs)
        state.buffer.maybe_insert(level, score, state.iteration)
        student_entropy = 0.0
    else:
        entry = state.buffer.sample_level(state.iteration, state.rng)
        level = entry.level
        trajs = state.collect_episodes(agent, level, cfg.episodes_per_eval)
        score = pvl_score(trajs)
        entry.score = score
        report = state.train_student("protagonist", trajs)
        student_entropy = report.entropy
    return {
        "return_P": mean_return(trajs), "return_A": 0.0, "regret": score,
        "teacher_entropy": 0.0, "student_entropy": student_entropy,
        "levels": [level], "solved_rate": solved_fraction(trajs),
    }


def _paired_body(state: TrainState, with_bc: bool) -> dict:
    cfg = state.cfg
    teacher = state.agents["teacher"]
    budget = sample_budget(cfg.budget, state.rng)
    dsim = DesignerSim(budget, width=cfg.grid_width, height=cfg.grid_height,
                       max_budget=cfg.budget.max_budget(),
                       noise_dim=cfg.noise_dim, rng=state.rng)
    teacher_traj = rollout(teacher.params, dsim, dsim.episode_len, state.rng,
                           state.counter)
    level = dsim.level()

    direction = cfg.distill.direction if (with_bc and cfg.distill) else "off"
    prot_trajs = state.collect_episodes(state.agents["protagonist"], level,
                                        cfg.episodes_per_eval)
    prot_report = state.train_student(
        "protagonist", prot_trajs,
        distill_target="antagonist" if direction in ("unidirectional",
                                                     "bidirectional") else None)
    ant_trajs = state.collect_episodes(state.agents["antagonist"], level,
                                       cfg.episodes_per_eval)
    ant_report = state.train_student(
        "antagonist", ant_trajs,
        distill_target="protagonist" if direction == "bidirectional" else None)

    ret_p = mean_return(prot_trajs)
    ret_a = mean_return(ant_trajs)
    level_regret = regret.relative_regret(ret_a, ret_p)
    if not np.isfinite(level_regret):
        raise RuntimeError(
            f"non-finite regret {level_regret} (return_A={ret_a}, return_P={ret_p})")

    # sparse teacher reward: regret at the final designer step, 0 elsewhere
    teacher_traj.rewards[-1] = level_regret
    t_batch = batch_from_trajectories([teacher_traj], gae, teacher.cfg.gamma,
                                      teacher.cfg.lam)
    teacher_report = ppo_update(teacher.params, teacher.optim, t_batch,
                                teacher.cfg, state.rng)
    return {
        "return_P": ret_p, "return_A": ret_a, "regret": level_regret,
        "teacher_entropy": teacher_report.entropy,
        "student_entropy": 0.5 * (prot_report.entropy + ant_report.entropy),
        "levels": [level], "solved_rate": solved_fraction(prot_trajs),
    }


def paired_iteration(state: TrainState) -> dict:
    return _paired_body(state, with_bc=False)


def paired_bc_iteration(state: TrainState) -> dict:
    return _paired_body(state, with_bc=True)


def paired_evo_iteration(state: TrainState) -> dict:
    cfg = state.cfg
    prot = state.agents["protagonist"]
    ant = state.agents["antagonist"]
    score_of = _score_fn(state)
    d = replay_decision(state.buffer.cfg, state.rng) and len(state.buffer) > 0

    if not d:
        # explore: evaluate a fresh random level with stop gradient
        level = _random_level(state)
        prot_trajs = state.evaluate(prot, level, cfg.episodes_per_eval)
        ant_trajs = state.evaluate(ant, level, cfg.episodes_per_eval)
        ret_p, ret_a = mean_return(prot_trajs), mean_return(ant_trajs)
        score = score_of(ret_a, ret_p)
        state.buffer.maybe_insert(level, score, state.iteration)
        levels = [level]
        student_entropy = 0.0
        solved = solved_fraction(prot_trajs)
    else:
        # replay: train both students, then edit and re-score
        entry = state.buffer.sample_level(state.iteration, state.rng)
        level = entry.level
        prot_trajs = state.collect_episodes(prot, level, cfg.episodes_per_eval)
        prot_report = state.train_student("protagonist", prot_trajs)
        ant_trajs = state.collect_episodes(ant, level, cfg.episodes_per_eval)
        ant_report = state.train_student("antagonist", ant_trajs)
        ret_p, ret_a = mean_return(prot_trajs), mean_return(ant_trajs)
        entry.score = score_of(ret_a, ret_p)

        edited = edit_level(level, cfg.n_edits, state.rng)
        e_prot = state.evaluate(prot, edited, cfg.episodes_per_eval)
        e_ant = state.evaluate(ant, edited, cfg.episodes_per_eval)
        score = score_of(mean_return(e_ant), mean_return(e_prot))
        state.buffer.maybe_insert(edited, score, state.iteration)
        levels = [level, edited]
        student_entropy = 0.5 * (prot_report.entropy + ant_report.entropy)
        solved = solved_fraction(prot_trajs)
    return {
        "return_P": ret_p, "return_A": ret_a, "regret": score,
        "teacher_entropy": 0.0, "student_entropy": student_entropy,
        "levels": levels, "solved_rate": solved,
    }


ITERATION_FNS = {
    "dr": domain_randomization_iteration,
    "plr": plr_robust_iteration,
    "paired": paired_iteration,
    "paired_bc": paired_bc_iteration,
    "paired_evo": paired_evo_iteration,
    "flex_paired_evo": paired_evo_iteration,
}


def run_iteration(state: TrainState) -> MetricsRow | None:
    """Advance one iteration; returns a metrics row on logging iterations."""
    t0 = time.perf_counter()
    info = ITERATION_FNS[state.cfg.algorithm](state)
    state.iteration += 1
    if state.iteration % state.cfg.log_every != 0:
        return None
    blocks, paths = _level_stats(info["levels"])
    wallclock = time.perf_counter() - t0 if state.cfg.record_wallclock else 0.0
    row = MetricsRow(
        iteration=state.iteration,
        env_steps=state.counter.steps,
        return_P=info["return_P"],
        return_A=info["return_A"],
        regret=info["regret"],
        teacher_entropy=info["teacher_entropy"],
        student_entropy=info["student_entropy"],
        block_count_mean=blocks,
        shortest_path_mean=paths,
        solved_rate_eval=info["solved_rate"],
        wallclock_s=wallclock,
    )
    state.rows.append(row)
    return row


def train(cfg: RunConfig, state: TrainState | None = None,
          iterations: int | None = None) -> TrainState:
    state = state if state is not None else TrainState(cfg)
    n = iterations if iterations is not None else cfg.total_iterations - state.iteration
    for _ in range(n):
        run_iteration(state)
    return state


# -- checkpointing ---------------------------------------------------------


def save_checkpoint(path, state: TrainState) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "cfg": state.cfg,
        "iteration": state.iteration,
        "env_steps": state.counter.steps,
        "rng_state": state.rng.bit_generator.state,
        "agents": {
            role: {"params": a.params, "adam_m": a.optim.m,
                   "adam_v": a.optim.v, "adam_t": a.optim.t}
            for role, a in state.agents.items()
        },
        "buffer": state.buffer.to_payload() if state.buffer is not None else None,
        "rows": state.rows,
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh)


def load_checkpoint(path) -> TrainState:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    state = TrainState(payload["cfg"])
    state.iteration = payload["iteration"]
    state.counter.steps = payload["env_steps"]
    state.rng.bit_generator.state = payload["rng_state"]
    for role, doc in payload["agents"].items():
        agent = state.agents[role]
        agent.params = doc["params"]
        agent.optim = nets.AdamState(m=doc["adam_m"], v=doc["adam_v"], t=doc["adam_t"])
    if payload["buffer"] is not None:
        state.buffer = LevelBuffer.from_payload(state.cfg.buffer, payload["buffer"])
    state.rows = payload["rows"]
    return state
