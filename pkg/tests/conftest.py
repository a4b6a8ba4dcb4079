import numpy as np
import pytest

from uedlab import nets, oracle
from uedlab.env import random_level
from uedlab.levels import MazeLevel


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def small_params(obs_dim=4, n_actions=3, hidden=4, seed=0):
    return nets.init_params(obs_dim, n_actions, hidden, np.random.default_rng(seed))


def open_room(size=5, agent=(1, 1), goal=None, agent_dir=0):
    goal = goal if goal is not None else (size - 2, size - 2)
    return MazeLevel(width=size, height=size, walls=frozenset(),
                     agent_pos=agent, agent_dir=agent_dir, goal_pos=goal).validate()


def random_small_level(rng, size=9, max_budget=20):
    budget = int(rng.integers(0, max_budget + 1))
    return random_level(budget, width=size, height=size, rng=rng)


def random_tabular_policy(level, rng, concentration=1.0):
    states, _ = oracle.enumerate_states(level)
    probs = rng.dirichlet(np.full(3, concentration), size=len(states))
    return probs


def mc_returns(level, probs, tmax, n_episodes, rng):
    """Vectorized Monte-Carlo returns for a tabular policy; independent of
    the rollout engine and of the DP oracle."""
    states, index, nxt, goal = oracle._transitions(level)
    start = index[(level.agent_pos[0], level.agent_pos[1], level.agent_dir)]
    cum = np.cumsum(probs, axis=1)
    state = np.full(n_episodes, start, dtype=np.int64)
    active = np.ones(n_episodes, dtype=bool)
    returns = np.zeros(n_episodes)
    for t in range(tmax):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        u = rng.random(len(idx))
        a = (u[:, None] > cum[state[idx]]).sum(axis=1)
        reached = goal[state[idx], a]
        returns[idx[reached]] = 1.0 - (t + 1) / tmax
        active[idx[reached]] = False
        move = idx[~reached]
        state[move] = nxt[state[move], a[~reached]]
    return returns
