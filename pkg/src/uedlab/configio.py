"""Flat key=value run configuration files (INI sections per role).

Every hyperparameter of the training loops is settable here under its
familiar name; unknown sections or keys are hard errors that name the
offending key.
"""

from __future__ import annotations

import configparser

from .algos import RunConfig
from .buffer import BufferConfig
from .env import BudgetMode
from .ppo import DistillConfig, PpoConfig


class ConfigError(ValueError):
    pass


_RUN_KEYS = {
    "algorithm": str,
    "seed": int,
    "total_iterations": int,
    "grid_width": int,
    "grid_height": int,
    "tmax": int,
    "budget_mode": str,
    "budget_fixed": int,
    "budget_lo": int,
    "budget_hi": int,
    "episodes_per_eval": int,
    "hidden_size": int,
    "noise_dim": int,
    "n_edits": int,
    "log_every": int,
    "record_wallclock": bool,
}

# INI key -> PpoConfig field
_PPO_KEYS = {
    "gamma": ("gamma", float),
    "lambda_gae": ("lam", float),
    "ppo_rollout_length": ("rollout_length", int),
    "ppo_epochs": ("epochs", int),
    "ppo_minibatches_per_epoch": ("minibatches", int),
    "ppo_clip_range": ("clip_range", float),
    "ppo_number_of_workers": ("workers", int),
    "adam_learning_rate": ("learning_rate", float),
    "adam_eps": ("adam_eps", float),
    "ppo_max_gradient_norm": ("max_grad_norm", float),
    "ppo_value_clipping": ("value_clipping", bool),
    "return_normalization": ("return_normalization", bool),
    "value_loss_coefficient": ("value_loss_coef", float),
    "entropy_coefficient": ("entropy_coef", float),
}

_DISTILL_KEYS = {
    "kl_loss_coefficient": ("kl_coef", float),
    "kl_loss_interval": ("kl_interval", int),
    "kl_loss_direction": ("direction", str),
}

_BUFFER_KEYS = {
    "replay_rate": ("replay_rate", float),
    "buffer_size": ("capacity", int),
    "temperature": ("temperature", float),
    "staleness_coefficient": ("staleness_coef", float),
}

_SECTIONS = ("run", "ppo.protagonist", "ppo.antagonist", "ppo.teacher",
             "distill", "buffer")


def _convert(section: str, key: str, raw: str, typ):
    try:
        if typ is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "yes", "true", "on"):
                return True
            if lowered in ("0", "no", "false", "off"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def _section_dict(parser, section: str, keymap: dict) -> dict:
    out = {}
    for key, raw in parser.items(section):
        if key not in keymap:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        field, typ = keymap[key]
        out[field] = _convert(section, key, raw, typ)
    return out


def parse_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
    if not parser.has_section("run"):
        raise ConfigError("missing required section [run]")

    run = {}
    for key, raw in parser.items("run"):
        if key not in _RUN_KEYS:
            raise ConfigError(f"unknown key {key!r} in section [run]")
        run[key] = _convert("run", key, raw, _RUN_KEYS[key])

    budget = BudgetMode(
        kind=run.pop("budget_mode", "uniform"),
        fixed=run.pop("budget_fixed", 25),
        lo=run.pop("budget_lo", 0),
        hi=run.pop("budget_hi", 60),
    )
    if budget.kind not in ("fixed", "uniform"):
        raise ConfigError(f"[run] budget_mode: unknown mode {budget.kind!r}")

    def ppo_for(section: str):
        if not parser.has_section(section):
            return None
        try:
            return PpoConfig(**_section_dict(parser, section, _PPO_KEYS))
        except ValueError as exc:
            raise ConfigError(f"[{section}]: {exc}") from exc

    protagonist = ppo_for("ppo.protagonist") or PpoConfig()
    distill = None
    if parser.has_section("distill"):
        try:
            distill = DistillConfig(**_section_dict(parser, "distill", _DISTILL_KEYS))
        except ValueError as exc:
            raise ConfigError(f"[distill]: {exc}") from exc
    buffer = None
    if parser.has_section("buffer"):
        try:
            buffer = BufferConfig(**_section_dict(parser, "buffer", _BUFFER_KEYS))
        except ValueError as exc:
            raise ConfigError(f"[buffer]: {exc}") from exc

    try:
        return RunConfig(
            budget=budget,
            protagonist=protagonist,
            antagonist=ppo_for("ppo.antagonist"),
            teacher=ppo_for("ppo.teacher"),
            distill=distill,
            buffer=buffer,
            **run,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
