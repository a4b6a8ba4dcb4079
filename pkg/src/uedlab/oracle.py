"""Exact desk-scale solvers: optimal return, finite-horizon policy
evaluation, and brute-force references for GAE and positive value loss.

These are the ground truth that all regret machinery is tested against, so
they deliberately avoid sharing code paths with the fast implementations.
"""

from __future__ import annotations

import numpy as np

from . import nets
from .env import FORWARD, TURN_LEFT, TURN_RIGHT, encode_partial_obs, padded_category_grid
from .levels import DIR_VECS, MazeLevel

STATE_BUDGET = 2_000_000  # max states * horizon for one DP evaluation


class OracleBudgetError(RuntimeError):
    """Raised when a level's state space exceeds the exact-solver budget."""


def enumerate_states(level: MazeLevel):
    """All (row, col, heading) states on free non-goal cells, with index map."""
    states = []
    for r in range(1, level.height - 1):
        for c in range(1, level.width - 1):
            if level.is_wall((r, c)) or (r, c) == level.goal_pos:
                continue
            for d in range(4):
                states.append((r, c, d))
    index = {s: i for i, s in enumerate(states)}
    return states, index


def _transitions(level: MazeLevel):
    """next-state index and goal-arrival flag per (state, action)."""
    states, index = enumerate_states(level)
    S = len(states)
    nxt = np.zeros((S, 3), dtype=np.int64)
    goal = np.zeros((S, 3), dtype=bool)
    for i, (r, c, d) in enumerate(states):
        nxt[i, TURN_LEFT] = index[(r, c, (d + 3) % 4)]
        nxt[i, TURN_RIGHT] = index[(r, c, (d + 1) % 4)]
        dr, dc = DIR_VECS[d]
        target = (r + dr, c + dc)
        if target == level.goal_pos:
            goal[i, FORWARD] = True
            nxt[i, FORWARD] = i  # masked by the goal flag
        elif level.is_wall(target):
            nxt[i, FORWARD] = i
        else:
            nxt[i, FORWARD] = index[(target[0], target[1], d)]
    return states, index, nxt, goal


def optimal_steps(level: MazeLevel):
    """Minimum number of actions (turns count) to reach the goal, or None."""
    states, index, nxt, goal = _transitions(level)
    start = index[(level.agent_pos[0], level.agent_pos[1], level.agent_dir)]
    if goal[start].any():
        return 1
    seen = np.zeros(len(states), dtype=bool)
    seen[start] = True
    frontier = [start]
    dist = 0
    while frontier:
        dist += 1
        if goal[frontier].any():
            return dist
        succ = np.unique(nxt[frontier].ravel())
        succ = succ[~seen[succ]]
        seen[succ] = True
        frontier = list(succ)
    return None


def optimal_return(level: MazeLevel, tmax: int = 250) -> float:
    """Return of the optimal deterministic policy: 1 - T*/Tmax, else 0."""
    steps = optimal_steps(level)
    if steps is None or steps > tmax:
        return 0.0
    return 1.0 - steps / tmax


def state_observations(level: MazeLevel) -> np.ndarray:
    """Observation encoding (as seen in training) for every enumerated state."""
    states, _ = enumerate_states(level)
    padded = padded_category_grid(level)
    return np.stack([encode_partial_obs(padded, (r, c), d) for r, c, d in states])


def policy_action_probs(params: dict, level: MazeLevel) -> np.ndarray:
    """Action distribution of a feedforward policy at every enumerated state."""
    logits, _ = nets.forward(params, state_observations(level))
    return nets.softmax(logits)


def uniform_policy_probs(level: MazeLevel) -> np.ndarray:
    states, _ = enumerate_states(level)
    return np.full((len(states), 3), 1.0 / 3.0)


def _resolve_probs(level: MazeLevel, policy) -> np.ndarray:
    if isinstance(policy, dict):
        return policy_action_probs(policy, level)
    probs = np.asarray(policy, dtype=np.float64)
    states, _ = enumerate_states(level)
    if probs.shape != (len(states), 3):
        raise ValueError(f"policy probs shape {probs.shape} != ({len(states)}, 3)")
    return probs


def _finite_horizon_dp(level: MazeLevel, policy, tmax: int, gamma: float,
                       goal_reward) -> float:
    states, index, nxt, goal = _transitions(level)
    if len(states) * tmax > STATE_BUDGET:
        raise OracleBudgetError(
            f"{len(states)} states x horizon {tmax} exceeds the solver budget")
    probs = _resolve_probs(level, policy)
    start = (level.agent_pos[0], level.agent_pos[1], level.agent_dir)
    if start not in index:
        raise ValueError("agent start state is not a valid free cell")
    V = np.zeros(len(states))
    for t in range(tmax - 1, -1, -1):
        q = np.where(goal, goal_reward(t + 1), gamma * V[nxt])
        V = (probs * q).sum(axis=1)
    return float(V[index[start]])


def exact_policy_value(level: MazeLevel, policy, tmax: int = 250,
                       gamma: float = 1.0) -> float:
    """Expected return of a memoryless stochastic policy, exact to float.

    ``policy`` is either a parameter dict (evaluated through the training
    observation encoder) or an (S, 3) action-probability array over
    enumerate_states order.
    """
    return _finite_horizon_dp(level, policy, tmax, gamma,
                              lambda steps: 1.0 - steps / tmax)


def exact_solve_probability(level: MazeLevel, policy, tmax: int = 250) -> float:
    """Probability the policy reaches the goal within tmax steps."""
    return _finite_horizon_dp(level, policy, tmax, 1.0, lambda steps: 1.0)


def brute_force_gae(rewards, values, terminal: bool, gamma: float, lam: float):
    """Direct double-loop GAE reference; no recursion shortcuts."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = len(rewards)
    deltas = np.empty(T)
    for t in range(T):
        nonterminal = 0.0 if (terminal and t == T - 1) else 1.0
        deltas[t] = rewards[t] + gamma * values[t + 1] * nonterminal - values[t]
    advantages = np.empty(T)
    for t in range(T):
        total = 0.0
        for k in range(t, T):
            total += (gamma * lam) ** (k - t) * deltas[k]
        advantages[t] = total
    return advantages, advantages + values[:-1]


def brute_force_pvl(deltas, gamma: float, lam: float) -> float:
    """Direct O(T^2) positive-value-loss reference."""
    deltas = np.asarray(deltas, dtype=np.float64)
    T = len(deltas)
    if T == 0:
        return 0.0
    total = 0.0
    for t in range(T):
        inner = 0.0
        for k in range(t, T):
            inner += (gamma * lam) ** (k - t) * deltas[k]
        total += max(inner, 0.0)
    return total / T
