"""Plain feedforward net with hand-written reverse-mode gradients.

Hidden layers use the rectifier, the final layer is linear, weights are
Glorot-uniform at init. Greedy layerwise pretraining fits each layer as a
small autoencoder (linear decoder, squared reconstruction error) before the
stack is trained end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, ShapeError
from .optim import init_adam, adam_step

_ACTIVATIONS = ("relu", "linear")


@dataclass
class Layer:
    weight: np.ndarray  # (fan_out, fan_in)
    bias: np.ndarray  # (fan_out,)
    activation: str

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("layer weight must be 2-d, bias 1-d")
        if self.weight.shape[0] != self.bias.size:
            raise ShapeError("bias length must match the weight's output size")
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")


@dataclass
class FeedForwardNet:
    layers: list[Layer]
    rng_seed: int = 0

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("a net needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.weight.shape[1] != prev.weight.shape[0]:
                raise ConfigError(
                    f"layer sizes do not chain: {prev.weight.shape[0]} then "
                    f"{nxt.weight.shape[1]} inputs"
                )

    @property
    def input_size(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def output_size(self) -> int:
        return self.layers[-1].weight.shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_size] + [l.weight.shape[0] for l in self.layers]


@dataclass
class NetGradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_net(
    layer_sizes: list[int],
    seed: int,
    activations: list[str] | None = None,
) -> FeedForwardNet:
    """Fresh net with Glorot-uniform weights and zero biases.

    ``layer_sizes`` includes the input width, so ``[d, h, q]`` builds two
    layers. Default activations are rectifier everywhere except the last
    layer, which is linear.
    """
    if len(layer_sizes) < 2:
        raise ConfigError("layer_sizes needs an input and at least one output width")
    n_layers = len(layer_sizes) - 1
    if activations is None:
        activations = ["relu"] * (n_layers - 1) + ["linear"]
    if len(activations) != n_layers:
        raise ConfigError("one activation per layer required")
    rng = np.random.default_rng(seed)
    layers = [
        Layer(
            weight=_glorot(rng, layer_sizes[i + 1], layer_sizes[i]),
            bias=np.zeros(layer_sizes[i + 1]),
            activation=activations[i],
        )
        for i in range(n_layers)
    ]
    return FeedForwardNet(layers, rng_seed=seed)


def identity_net(dim: int) -> FeedForwardNet:
    """Single linear layer fixed at the identity (raw-feature mode)."""
    return FeedForwardNet(
        [Layer(weight=np.eye(dim), bias=np.zeros(dim), activation="linear")],
        rng_seed=0,
    )


def _check_batch(net: FeedForwardNet, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError("net input must be a 2-d batch")
    if batch.shape[1] != net.input_size:
        raise ShapeError(
            f"net expects {net.input_size} input columns, got {batch.shape[1]}"
        )
    return batch


def forward(net: FeedForwardNet, batch: np.ndarray) -> np.ndarray:
    """Map a batch (n, d_in) to features (n, d_out)."""
    x = _check_batch(net, batch)
    for layer in net.layers:
        z = x @ layer.weight.T + layer.bias
        x = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return x


def forward_with_cache(net: FeedForwardNet, batch: np.ndarray):
    """Forward pass that also returns (layer_input, preactivation) pairs."""
    x = _check_batch(net, batch)
    cache = []
    for layer in net.layers:
        z = x @ layer.weight.T + layer.bias
        cache.append((x, z))
        x = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return x, cache


def backward(
    net: FeedForwardNet, batch: np.ndarray, upstream: np.ndarray
) -> tuple[NetGradients, np.ndarray]:
    """Reverse-mode gradients of ``sum(upstream * forward(net, batch))``.

    Returns per-layer weight/bias gradients (in forward order) and the
    gradient with respect to the input batch. The rectifier uses the
    zero-at-kink subgradient.
    """
    out, cache = forward_with_cache(net, batch)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != out.shape:
        raise ShapeError(
            f"upstream gradient has shape {upstream.shape}, output is {out.shape}"
        )
    g = upstream
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    for layer, (x, z) in zip(reversed(net.layers), reversed(cache)):
        if layer.activation == "relu":
            g = g * (z > 0.0)
        weights.append(g.T @ x)
        biases.append(g.sum(axis=0))
        g = g @ layer.weight
    weights.reverse()
    biases.reverse()
    return NetGradients(weights, biases), g


def pretrain_layerwise(
    net: FeedForwardNet,
    data: np.ndarray,
    epochs: int,
    step_size: float,
    seed: int,
) -> FeedForwardNet:
    """Greedy per-layer autoencoder pretraining.

    Each layer, in order, is paired with a freshly initialized linear decoder
    and both are trained full-batch with Adam to minimize the mean squared
    reconstruction error of that layer's input; the decoder is then dropped
    and the layer's output becomes the next layer's training data. A layer
    whose final reconstruction error exceeds its initial one is reverted, so
    per-layer error never degrades.
    """
    data = _check_batch(net, data)
    if data.shape[0] < 2:
        raise InputError("pretraining needs at least two rows")
    if epochs < 1:
        raise ConfigError("pretraining epochs must be >= 1")

    new_layers: list[Layer] = []
    x = data
    for index, layer in enumerate(net.layers):
        rng = np.random.default_rng([seed, index])
        fan_out, fan_in = layer.weight.shape
        enc = Layer(layer.weight.copy(), layer.bias.copy(), layer.activation)
        dec = Layer(_glorot(rng, fan_in, fan_out), np.zeros(fan_in), "linear")
        pair = FeedForwardNet([enc, dec], rng_seed=seed)

        params = {
            "enc.weight": enc.weight,
            "enc.bias": enc.bias,
            "dec.weight": dec.weight,
            "dec.bias": dec.bias,
        }
        state = init_adam(params)
        initial = _reconstruction_mse(pair, x)
        for _ in range(epochs):
            recon = forward(pair, x)
            upstream = (2.0 / recon.size) * (recon - x)
            grads_struct, _ = backward(pair, x, upstream)
            grads = {
                "enc.weight": grads_struct.weights[0],
                "enc.bias": grads_struct.biases[0],
                "dec.weight": grads_struct.weights[1],
                "dec.bias": grads_struct.biases[1],
            }
            params, state = adam_step(params, grads, state, step_size)
            enc.weight, enc.bias = params["enc.weight"], params["enc.bias"]
            dec.weight, dec.bias = params["dec.weight"], params["dec.bias"]
        final = _reconstruction_mse(pair, x)
        if final > initial:
            enc = Layer(layer.weight.copy(), layer.bias.copy(), layer.activation)
        new_layers.append(enc)
        x = forward(FeedForwardNet([enc], rng_seed=seed), x)
    return FeedForwardNet(new_layers, rng_seed=net.rng_seed)


def _reconstruction_mse(pair: FeedForwardNet, x: np.ndarray) -> float:
    recon = forward(pair, x)
    return float(np.mean((recon - x) ** 2))
