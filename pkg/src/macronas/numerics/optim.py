"""Decoupled weight-decay Adam (AdamW) over named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["OptimState", "adamw_step"]


@dataclass
class OptimState:
    """Per-parameter moments and hyperparameters for AdamW."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-5
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adamw_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimState,
) -> dict[str, np.ndarray]:
    """One AdamW update; returns new parameter arrays and advances state.

    Parameters missing from `grads` are treated as having zero gradient
    (weight decay still applies). Update order is sorted by name so the
    result is independent of dict insertion order.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    out: dict[str, np.ndarray] = {}
    for name in sorted(params):
        p = params[name]
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        elif g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for '{name}'")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        state.m[name] = m
        state.v[name] = v
        m_hat = m / bc1
        v_hat = v / bc2
        out[name] = p - state.lr * (m_hat / (np.sqrt(v_hat) + state.eps) + state.weight_decay * p)
    return out
