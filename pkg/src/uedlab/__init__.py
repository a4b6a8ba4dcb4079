"""Desk-scale unsupervised environment design lab.

Regret-driven maze curricula (adversarial generation, replay curation,
online distillation) over a deterministic gridworld, with exact dynamic
programming oracles that make the regret machinery testable.
"""

from .buffer import BufferConfig, BufferEntry, LevelBuffer, edit_level, replay_decision
from .env import (BudgetMode, DesignerSim, MazeSim, instantiate, random_level,
                  sample_budget)
from .levels import MazeLevel, block_count, is_solvable, load_level, save_level, shortest_path_len
from .metrics import EvalSuite, MetricsRow, bootstrap_ci, iqm, optimality_gap, solved_rate
from .ppo import DistillConfig, PpoConfig, gae, kl_divergence, policy_entropy, ppo_update
from .regret import flexible_regret, positive_value_loss, relative_regret, true_regret
from .rollout import RolloutBatch, Trajectory, rollout, undiscounted_return

__version__ = "0.1.0"
