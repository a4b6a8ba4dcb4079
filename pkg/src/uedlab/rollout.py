"""Episode rollout engine and trajectory containers shared by every
algorithm and environment."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nets


@dataclass
class Trajectory:
    """One episode: per-step records plus a bootstrap value.

    ``values`` has length T+1; the trailing entry is the value estimate at
    the final observation (0 for terminal episodes). ``done`` is True only
    if the episode ended in a terminal state, not by truncation.
    """

    observations: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    done: bool = False

    @property
    def length(self) -> int:
        return len(self.actions)

    def solved(self) -> bool:
        return self.done and self.rewards and self.rewards[-1] > 0


def undiscounted_return(traj: Trajectory) -> float:
    return float(sum(traj.rewards))


class StepCounter:
    """Audited environment-step counter shared across one training run."""

    def __init__(self):
        self.steps = 0

    def add(self, n: int) -> None:
        self.steps += n


def sample_action(logits: np.ndarray, rng: np.random.Generator):
    """Categorical draw via inverse CDF; returns (action, log_prob)."""
    logp = nets.log_softmax(logits)
    probs = np.exp(logp)
    u = rng.random()
    action = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    action = min(action, len(probs) - 1)
    return action, float(logp[action])


def rollout(params: dict, sim, max_steps: int, rng: np.random.Generator,
            counter: StepCounter | None = None) -> Trajectory:
    """Collect one episode with the given policy; truncates at max_steps.

    Terminal episodes bootstrap with 0; truncated ones with the value head
    at the final observation.
    """
    if max_steps < 1:
        raise ValueError(f"max_steps must be >= 1, got {max_steps}")
    traj = Trajectory()
    obs = sim.reset()
    done = False
    for _ in range(max_steps):
        logits, values = nets.forward(params, obs)
        action, logp = sample_action(logits[0], rng)
        next_obs, reward, done = sim.step(action)
        traj.observations.append(obs)
        traj.actions.append(action)
        traj.log_probs.append(logp)
        traj.rewards.append(reward)
        traj.values.append(float(values[0]))
        obs = next_obs
        if done:
            break
    traj.done = done
    if done:
        traj.values.append(0.0)
    else:
        _, values = nets.forward(params, obs)
        traj.values.append(float(values[0]))
    if counter is not None:
        counter.add(traj.length)
    return traj


@dataclass
class RolloutBatch:
    """Flat concatenation of trajectories with learner-filled targets."""

    observations: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    advantages: np.ndarray
    returns: np.ndarray
    values_old: np.ndarray
    boundaries: list  # (start, end) half-open index ranges, one per trajectory

    def __len__(self) -> int:
        return len(self.actions)


def batch_from_trajectories(trajectories, gae_fn, gamma: float, lam: float) -> RolloutBatch:
    """Flatten trajectories, filling advantages/returns via the supplied GAE."""
    obs, acts, logps, advs, rets, vold = [], [], [], [], [], []
    boundaries = []
    start = 0
    for traj in trajectories:
        if traj.length == 0:
            continue
        adv, ret = gae_fn(np.asarray(traj.rewards), np.asarray(traj.values),
                          traj.done, gamma, lam)
        obs.extend(traj.observations)
        acts.extend(traj.actions)
        logps.extend(traj.log_probs)
        advs.append(adv)
        rets.append(ret)
        vold.extend(traj.values[:-1])
        boundaries.append((start, start + traj.length))
        start += traj.length
    if not obs:
        raise ValueError("cannot build a batch from empty trajectories")
    return RolloutBatch(
        observations=np.asarray(obs, dtype=np.float64),
        actions=np.asarray(acts, dtype=np.int64),
        log_probs=np.asarray(logps, dtype=np.float64),
        advantages=np.concatenate(advs),
        returns=np.concatenate(rets),
        values_old=np.asarray(vold, dtype=np.float64),
        boundaries=boundaries,
    )
