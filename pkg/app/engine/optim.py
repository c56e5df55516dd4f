"""
Adam with bias correction and decoupled weight decay
"""
from dataclasses import dataclass, field

import numpy as np

from app.config import settings
from app.engine.tensor import Tensor
from app.errors import DimensionError, TrainingError


@dataclass
class AdamState:
    lr: float = settings.DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = settings.DEFAULT_WEIGHT_DECAY
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, Tensor], grads: dict[str, np.ndarray]) -> dict[str, Tensor]:
    """Update params in place; a parameter without a gradient is treated as having zero gradient"""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"Non-finite gradient for parameter '{name}' at step {state.step + 1}")

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step

    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        if g.shape != p.shape:
            raise DimensionError(f"adam_step[{name}]", p.shape, g.shape)

        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)

        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)

        p.data -= state.lr * state.weight_decay * p.data
        p.data -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)

    return params
