"""
Adam with bias correction over a dict of named parameter arrays.
"""
from dataclasses import dataclass
from typing import Dict

import numpy as np

from ttrnn.errors import NumericsError, ShapeError


@dataclass
class TrainState:
    model: object
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int
    rng: np.random.Generator


def init_train_state(model, seed=0):
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = model.params()
    return TrainState(
        model=model,
        m={name: np.zeros_like(p) for name, p in params.items()},
        v={name: np.zeros_like(p) for name, p in params.items()},
        step=0,
        rng=rng,
    )


def adam_update(state, grads, cfg):
    """
    One Adam step. Returns a new TrainState; the arrays of `state` are left
    untouched.
    """
    params = state.model.params()
    for name, g in grads.items():
        if name not in params or g.shape != params[name].shape:
            raise ShapeError(f"Gradient {name} does not match any parameter")
        if not np.all(np.isfinite(g)):
            raise NumericsError(f"Non-finite gradient for parameter {name}")

    step = state.step + 1
    bc1 = 1.0 - cfg.beta1 ** step
    bc2 = 1.0 - cfg.beta2 ** step
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p)
        m = cfg.beta1 * state.m[name] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[name] + (1.0 - cfg.beta2) * (g * g)
        new_params[name] = p - cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.eps)
        new_m[name] = m
        new_v[name] = v
    return TrainState(state.model.with_params(new_params), new_m, new_v, step, state.rng)
