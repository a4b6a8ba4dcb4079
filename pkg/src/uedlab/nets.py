"""Small double-precision feedforward policy/value networks with manual
backprop, plus an Adam optimizer.

The analytic gradients are the point: every loss term used in training is
checkable against central finite differences, so the networks stay plain
numpy with an explicit forward cache instead of an autodiff framework.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PARAM_KEYS = ("W1", "b1", "W2", "b2", "Wp", "bp", "Wv", "bv")


def init_params(obs_dim: int, n_actions: int, hidden: int,
                rng: np.random.Generator) -> dict:
    """He-style scaled normal init; policy/value heads start small."""

    def dense(n_in, n_out, scale):
        return rng.standard_normal((n_in, n_out)) * (scale / np.sqrt(n_in))

    return {
        "W1": dense(obs_dim, hidden, np.sqrt(2.0)),
        "b1": np.zeros(hidden),
        "W2": dense(hidden, hidden, np.sqrt(2.0)),
        "b2": np.zeros(hidden),
        "Wp": dense(hidden, n_actions, 0.01),
        "bp": np.zeros(n_actions),
        "Wv": dense(hidden, 1, 1.0),
        "bv": np.zeros(1),
    }


def n_params(params: dict) -> int:
    return sum(p.size for p in params.values())


def forward(params: dict, obs: np.ndarray):
    """Batched forward pass: obs (n, d) -> logits (n, A), values (n,)."""
    logits, values, _ = forward_cache(params, obs)
    return logits, values


def forward_cache(params: dict, obs: np.ndarray):
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    if obs.shape[1] != params["W1"].shape[0]:
        raise ValueError(
            f"observation dim {obs.shape[1]} != expected {params['W1'].shape[0]}")
    h1 = np.tanh(obs @ params["W1"] + params["b1"])
    h2 = np.tanh(h1 @ params["W2"] + params["b2"])
    logits = h2 @ params["Wp"] + params["bp"]
    values = (h2 @ params["Wv"] + params["bv"])[:, 0]
    return logits, values, (obs, h1, h2)


def backward(params: dict, cache, dlogits: np.ndarray, dvalues: np.ndarray) -> dict:
    """Backprop given upstream gradients on logits and values."""
    obs, h1, h2 = cache
    grads = {
        "Wp": h2.T @ dlogits,
        "bp": dlogits.sum(axis=0),
        "Wv": h2.T @ dvalues[:, None],
        "bv": np.array([dvalues.sum()]),
    }
    dh2 = dlogits @ params["Wp"].T + dvalues[:, None] @ params["Wv"].T
    dz2 = dh2 * (1.0 - h2 * h2)
    grads["W2"] = h1.T @ dz2
    grads["b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ params["W2"].T
    dz1 = dh1 * (1.0 - h1 * h1)
    grads["W1"] = obs.T @ dz1
    grads["b1"] = dz1.sum(axis=0)
    return grads


def global_grad_norm(grads: dict) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_grads(grads: dict, max_norm: float) -> tuple[dict, float]:
    norm = global_grad_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        grads = {k: g * scale for k, g in grads.items()}
    return grads, norm


@dataclass
class AdamState:
    """First/second moment accumulators and the shared step counter."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            t=0,
        )


def adam_step(params: dict, grads: dict, state: AdamState, lr: float,
              eps: float = 1e-5, beta1: float = 0.9, beta2: float = 0.999) -> None:
    """In-place Adam update with bias correction."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for k, g in grads.items():
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        params[k] -= lr * (state.m[k] / bc1) / (np.sqrt(state.v[k] / bc2) + eps)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def params_checksum(params: dict) -> int:
    """Order-stable content hash, used by stop-gradient audits."""
    import hashlib

    h = hashlib.sha256()
    for k in sorted(params):
        h.update(k.encode())
        h.update(np.ascontiguousarray(params[k]).tobytes())
    return int.from_bytes(h.digest()[:8], "big")
