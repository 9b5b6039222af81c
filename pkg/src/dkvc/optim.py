"""Adam over a flat dict of named parameter arrays."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def init_adam(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        step=0,
    )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    step_size: float | dict[str, float],
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    ``step_size`` may be a single float or a per-parameter mapping (every
    parameter name must then be present). Returns fresh parameter arrays;
    the state is updated in place and returned for convenience.
    """
    if set(grads) != set(params):
        raise ConfigError("gradient keys do not match parameter keys")
    state.step += 1
    t = state.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    out: dict[str, np.ndarray] = {}
    for name, p in params.items():
        g = grads[name]
        lr = step_size[name] if isinstance(step_size, dict) else step_size
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        out[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
    return out, state
