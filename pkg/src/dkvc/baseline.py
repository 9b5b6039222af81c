"""Squared-error DNN regressor used as the comparison system.

Same feature architecture as the deep-kernel model with a single linear
output layer in place of the GP heads, trained on minibatch MSE with Adam and
early stopping against a held-out fifth of the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .net import FeedForwardNet, backward, forward, init_net
from .optim import adam_step, init_adam
from .trainer import TrainConfig


@dataclass
class BaselineDnn:
    net: FeedForwardNet
    input_mean: np.ndarray
    input_scale: np.ndarray
    output_centers: np.ndarray
    history: list[tuple[int, float]] = field(default_factory=list)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        xn = (x - self.input_mean) / self.input_scale
        return forward(self.net, xn) + self.output_centers


def _net_params(net: FeedForwardNet) -> dict[str, np.ndarray]:
    params = {}
    for l, layer in enumerate(net.layers):
        params[f"net.{l}.weight"] = layer.weight
        params[f"net.{l}.bias"] = layer.bias
    return params


def _apply(net: FeedForwardNet, params: dict[str, np.ndarray]):
    for l, layer in enumerate(net.layers):
        layer.weight = params[f"net.{l}.weight"]
        layer.bias = params[f"net.{l}.bias"]


def run_baseline_dnn(
    corpus,
    cfg: TrainConfig,
    patience: int = 10,
) -> tuple[BaselineDnn, float]:
    """Train the baseline and report its best validation RMSE.

    The corpus (anything with ``x``/``y`` arrays) is split 80/20 by a seeded
    shuffle; training stops once validation error has failed to improve for
    more than ``patience`` consecutive epochs (``patience=0`` stops at the
    first non-improving epoch), and the best-epoch weights are restored.
    """
    cfg.validate()
    if patience < 0:
        raise ConfigError("patience must be >= 0")
    x = np.asarray(corpus.x, dtype=np.float64)
    y = np.asarray(corpus.y, dtype=np.float64)
    n = x.shape[0]
    if n < 5:
        raise InputError("baseline needs at least 5 rows for an 80/20 split")

    rng = np.random.default_rng([cfg.seed, 29])
    perm = rng.permutation(n)
    n_val = max(1, round(0.2 * n))
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    input_mean = x.mean(axis=0)
    input_scale = x.std(axis=0)
    input_scale[input_scale < 1e-12] = 1.0
    output_centers = y.mean(axis=0)
    xn = (x - input_mean) / input_scale
    yc = y - output_centers

    hidden = list(cfg.layer_sizes) if cfg.layer_sizes else [x.shape[1]]
    if hidden[0] != x.shape[1]:
        raise ConfigError(
            f"layer_sizes starts at {hidden[0]} but the corpus has "
            f"{x.shape[1]} feature columns"
        )
    sizes = hidden + [y.shape[1]]
    # Rectifiers on the hidden stack; the feature layer and the output stay
    # linear, mirroring the deep-kernel net plus its replacement head.
    activations = ["relu"] * (len(hidden) - 2) + ["linear"] * min(2, len(sizes) - 1)
    net = init_net(sizes, cfg.seed, activations=activations)

    params = _net_params(net)
    state = init_adam(params)

    def val_mse() -> float:
        pred = forward(net, xn[val_idx])
        return float(np.mean((pred - yc[val_idx]) ** 2))

    best = val_mse()
    best_params = {k: v.copy() for k, v in params.items()}
    history: list[tuple[int, float]] = []
    bad_streak = 0
    n_train = train_idx.size
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, 3000 + epoch]).permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            idx = train_idx[order[start : start + cfg.batch_size]]
            pred = forward(net, xn[idx])
            upstream = (2.0 / pred.size) * (pred - yc[idx])
            grads_struct, _ = backward(net, xn[idx], upstream)
            grads = {}
            for l in range(len(net.layers)):
                grads[f"net.{l}.weight"] = grads_struct.weights[l]
                grads[f"net.{l}.bias"] = grads_struct.biases[l]
            params, state = adam_step(
                params, grads, state, cfg.net_step_size,
                cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon,
            )
            _apply(net, params)
        current = val_mse()
        history.append((epoch, float(np.sqrt(current))))
        if current < best:
            best = current
            best_params = {k: v.copy() for k, v in params.items()}
            bad_streak = 0
        else:
            bad_streak += 1
            if bad_streak > patience:
                break
    _apply(net, best_params)
    regressor = BaselineDnn(
        net=net,
        input_mean=input_mean,
        input_scale=input_scale,
        output_centers=output_centers,
        history=history,
    )
    return regressor, float(np.sqrt(best))
