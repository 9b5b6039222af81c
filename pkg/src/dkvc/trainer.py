"""Minibatch training of the sparse deep-kernel model.

Gradients of the negative evidence lower bound are computed in closed form by
reverse mode through the per-head solves: the factor of K_ZZ is reused for the
posterior marginals, the KL term, and every adjoint, so each head costs
exactly one factorization per step. Central finite differences live in
:func:`grad_check` as the independent audit; they are never the training path.

Parameters are optimized in an unconstrained space: kernel hyperparameters
and noise variances in logs, the covariance factor with a log-reparameterized
diagonal. Adam runs with two step sizes, a faster one for the variational and
kernel groups and a slower one for the net weights.
"""

from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass, field, asdict
from typing import NamedTuple, TYPE_CHECKING

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ConfigError, InputError, NumericalError, ShapeError
from .kernels import ArdKernelParams, chol_with_jitter, kernel_matrix
from .net import backward, forward, identity_net, init_net, pretrain_layerwise
from .optim import adam_step, init_adam
from .svgp import SvdklModel, SvgpHead, VariationalState, elbo_full

if TYPE_CHECKING:
    from .pipeline import AlignedCorpus, F0Stats


@dataclass
class TrainConfig:
    """Everything the training loop needs; mirrored by the config file."""

    epochs: int = 40
    batch_size: int = 256
    step_size: float = 1e-2
    net_step_size: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    inducing_count: int = 200
    layer_sizes: list[int] | None = field(
        default_factory=lambda: [24, 1000, 500, 50, 20]
    )
    pretrain_epochs: int = 50
    pretrain_step_size: float = 1e-3
    # Step sizes shrink geometrically to this fraction of their start value
    # by the final epoch; 1.0 keeps them constant.
    final_step_fraction: float = 1.0
    jitter_base: float = 1e-6
    seed: int = 0
    shared_inducing: bool = False

    def validate(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.inducing_count < 1:
            raise ConfigError("inducing_count must be >= 1")
        if self.step_size <= 0 or self.net_step_size <= 0:
            raise ConfigError("step sizes must be positive")
        if not 0.0 < self.final_step_fraction <= 1.0:
            raise ConfigError("final_step_fraction must lie in (0, 1]")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            raise ConfigError("Adam betas must lie in [0, 1)")
        if self.jitter_base <= 0:
            raise ConfigError("jitter_base must be positive")
        if self.pretrain_epochs < 0:
            raise ConfigError("pretrain_epochs must be >= 0")
        if self.layer_sizes:
            if len(self.layer_sizes) < 2:
                raise ConfigError("layer_sizes needs input and output widths")
            if any(int(s) < 1 for s in self.layer_sizes):
                raise ConfigError("layer sizes must be positive")


@dataclass
class EpochRecord:
    epoch: int
    mean_objective: float
    full_elbo: float | None
    jitter_escalations: int


TrainingLog = list[EpochRecord]


class GradResult(NamedTuple):
    value: float  # negative bound estimate for this batch
    grads: dict[str, np.ndarray]
    jitter_escalations: int


# --- parameter packing -----------------------------------------------------


def chol_to_raw(chol: np.ndarray) -> np.ndarray:
    """Lower factor -> unconstrained storage (diagonal through log)."""
    raw = np.tril(chol, -1)
    idx = np.diag_indices_from(raw)
    raw[idx] = np.log(np.diag(chol))
    return raw


def raw_to_chol(raw: np.ndarray) -> np.ndarray:
    chol = np.tril(raw, -1)
    idx = np.diag_indices_from(chol)
    chol[idx] = np.exp(np.diag(raw))
    return chol


def model_parameters(
    model: SvdklModel, train_net: bool = True, shared_inducing: bool = False
) -> dict[str, np.ndarray]:
    """Snapshot the trainable arrays in their unconstrained form."""
    params: dict[str, np.ndarray] = {}
    if train_net:
        for l, layer in enumerate(model.net.layers):
            params[f"net.{l}.weight"] = layer.weight.copy()
            params[f"net.{l}.bias"] = layer.bias.copy()
    params["kernel.log_signal_variance"] = np.array(model.kernel.log_signal_variance)
    params["kernel.log_length_scales"] = model.kernel.log_length_scales.copy()
    if shared_inducing:
        params["inducing.shared"] = model.heads[0].state.inducing.copy()
    for d, head in enumerate(model.heads):
        params[f"head.{d}.mean"] = head.state.mean.copy()
        params[f"head.{d}.chol_raw"] = chol_to_raw(head.state.chol_s)
        if not shared_inducing:
            params[f"head.{d}.inducing"] = head.state.inducing.copy()
        params[f"head.{d}.log_noise_variance"] = np.array(head.log_noise_variance)
    return params


def apply_parameters(
    model: SvdklModel,
    params: dict[str, np.ndarray],
    train_net: bool = True,
    shared_inducing: bool = False,
):
    """Write a parameter snapshot back into the model."""
    if train_net:
        for l, layer in enumerate(model.net.layers):
            layer.weight = params[f"net.{l}.weight"].copy()
            layer.bias = params[f"net.{l}.bias"].copy()
    model.kernel.log_signal_variance = float(params["kernel.log_signal_variance"])
    model.kernel.log_length_scales = params["kernel.log_length_scales"].copy()
    shared_z = params["inducing.shared"].copy() if shared_inducing else None
    for d, head in enumerate(model.heads):
        head.state.mean = params[f"head.{d}.mean"].copy()
        head.state.chol_s = raw_to_chol(params[f"head.{d}.chol_raw"])
        if shared_inducing:
            head.state.inducing = shared_z
        else:
            head.state.inducing = params[f"head.{d}.inducing"].copy()
        head.log_noise_variance = float(params[f"head.{d}.log_noise_variance"])


# --- gradients ---------------------------------------------------------------


def compute_gradients(
    model: SvdklModel,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    total_n: int,
    train_net: bool = True,
    shared_inducing: bool = False,
) -> GradResult:
    """Value and gradients of the negative bound estimate on one batch.

    The returned dict is keyed like :func:`model_parameters`. Raises
    :class:`NumericalError` if the value or any gradient group is non-finite.
    """
    x_batch = np.asarray(x_batch, dtype=np.float64)
    y_batch = np.asarray(y_batch, dtype=np.float64)
    if x_batch.ndim != 2 or y_batch.ndim != 2:
        raise ShapeError("batch arrays must be 2-d")
    n_b = x_batch.shape[0]
    if n_b == 0:
        raise InputError("batch is empty")
    if y_batch.shape != (n_b, model.num_heads):
        raise ShapeError(
            f"targets must be (batch, {model.num_heads}); got {y_batch.shape}"
        )

    kernel = model.kernel
    sv = kernel.signal_variance
    invl2 = np.exp(-2.0 * kernel.log_length_scales)
    xn = model.normalize(x_batch)
    feats = forward(model.net, xn)
    y_centered = y_batch - model.output_centers
    weight = total_n / n_b

    h2 = feats**2
    gh = np.zeros_like(feats)
    g_lsv = 0.0
    g_lls = np.zeros_like(invl2)
    grads: dict[str, np.ndarray] = {}
    bound = 0.0
    escalations = 0

    for d, head in enumerate(model.heads):
        state = head.state
        z = state.inducing
        m = state.mean
        chol_s = state.chol_s
        noise = head.noise_variance
        y = y_centered[:, d]

        k_raw = kernel_matrix(z, z, kernel)
        fac = chol_with_jitter(
            k_raw, model.jitter_base, name=f"inducing kernel matrix (head {d})"
        )
        escalations += int(fac.level > 0)
        lower = fac.lower
        b = kernel_matrix(feats, z, kernel)
        psi = cho_solve((lower, True), b.T).T
        mu = psi @ m
        resid = y - mu
        qdiag = np.einsum("ij,ij->i", psi, b)
        t = psi @ chol_s
        sdiag = np.einsum("ij,ij->i", t, t)
        var = sv - qdiag + sdiag

        ell_sum = float(
            np.sum(
                -0.5 * np.log(2.0 * np.pi * noise)
                - (resid**2 + var) / (2.0 * noise)
            )
        )
        m_count = state.count
        half_trace = solve_triangular(lower, chol_s, lower=True)
        half_quad = solve_triangular(lower, m, lower=True)
        kl = 0.5 * float(
            np.sum(half_trace**2)
            + np.sum(half_quad**2)
            - m_count
            + 2.0 * np.sum(np.log(np.diag(lower)))
            - 2.0 * np.sum(np.log(np.diag(chol_s)))
        )
        bound += weight * ell_sum - kl

        # Adjoints of the bound (not yet negated).
        g_mu = (weight / noise) * resid
        c_var = weight / (2.0 * noise)

        prior_inv = cho_solve((lower, True), np.eye(m_count))
        # S^-1 C collapses to C^-T, so the explicit inverse of S (which
        # squares the factor's condition number) is never needed.
        c_inv_t = solve_triangular(chol_s, np.eye(m_count), lower=True).T
        pm = prior_inv @ m
        pc = prior_inv @ chol_s

        g_m = psi.T @ g_mu - pm
        g_t = -(weight / noise) * t
        g_chol = psi.T @ g_t - pc + c_inv_t

        g_psi = np.outer(g_mu, m) + c_var * b + g_t @ chol_s.T
        w_adj = cho_solve((lower, True), g_psi.T).T
        g_b = c_var * psi + w_adj
        g_a = -psi.T @ w_adj + 0.5 * (pc @ pc.T + np.outer(pm, pm) - prior_inv)

        g_lnv = float(weight * np.sum(-0.5 + (resid**2 + var) / (2.0 * noise)))

        eb = g_b * b
        ea = g_a * k_raw
        # Every kernel entry (and the relative nugget) scales with the signal
        # variance, as does the prior diagonal in the data-fit term.
        g_lsv += float(np.sum(eb) + np.sum(g_a * fac.matrix) - n_b * c_var * sv)

        z2 = z**2
        rows_b = eb.sum(axis=1)
        cols_b = eb.sum(axis=0)
        ebz = eb @ z
        g_lls += invl2 * (
            rows_b @ h2 + cols_b @ z2 - 2.0 * np.sum(feats * ebz, axis=0)
        )
        g_lls += invl2 * (
            ea.sum(axis=1) @ z2
            + ea.sum(axis=0) @ z2
            - 2.0 * np.sum(z * (ea @ z), axis=0)
        )

        gh += -invl2[None, :] * (rows_b[:, None] * feats - ebz)
        g_z = invl2[None, :] * (eb.T @ feats - cols_b[:, None] * z)
        eas = ea + ea.T
        g_z += -invl2[None, :] * (eas.sum(axis=1)[:, None] * z - eas @ z)

        g_chol_raw = np.tril(g_chol, -1)
        idx = np.diag_indices_from(g_chol_raw)
        g_chol_raw[idx] = np.diag(g_chol) * np.diag(chol_s)

        grads[f"head.{d}.mean"] = -g_m
        grads[f"head.{d}.chol_raw"] = -g_chol_raw
        grads[f"head.{d}.log_noise_variance"] = np.array(-g_lnv)
        if shared_inducing:
            key = "inducing.shared"
            grads[key] = grads.get(key, 0.0) + (-g_z)
        else:
            grads[f"head.{d}.inducing"] = -g_z

    grads["kernel.log_signal_variance"] = np.array(-g_lsv)
    grads["kernel.log_length_scales"] = -g_lls
    if train_net:
        net_grads, _ = backward(model.net, xn, gh)
        for l in range(len(model.net.layers)):
            grads[f"net.{l}.weight"] = -net_grads.weights[l]
            grads[f"net.{l}.bias"] = -net_grads.biases[l]

    value = -bound
    if not np.isfinite(value):
        raise NumericalError("objective is non-finite")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name}")
    return GradResult(value, grads, escalations)


# --- training loop -----------------------------------------------------------


def _init_heads(
    features: np.ndarray,
    y_centered: np.ndarray,
    m_points: int,
    kernel: ArdKernelParams,
    jitter_base: float,
    seed: int,
    shared_inducing: bool,
) -> list[SvgpHead]:
    n, q = features.shape
    rng = np.random.default_rng([seed, 7])
    heads: list[SvgpHead] = []
    shared_z: np.ndarray | None = None
    shared_idx: np.ndarray | None = None
    for d in range(y_centered.shape[1]):
        if shared_inducing and shared_z is not None:
            z, idx = shared_z, shared_idx
        else:
            idx = rng.choice(n, size=m_points, replace=False)
            z = features[idx] + 1e-3 * rng.standard_normal((m_points, q))
            if shared_inducing:
                shared_z, shared_idx = z, idx
        noise0 = max(0.1 * float(np.var(y_centered[:, d])), 1e-4)
        # A scaled identity keeps the factor well conditioned no matter how
        # redundant the inducing set is; the prior factor would hand its tiny
        # trailing diagonal entries straight to the optimizer.
        scale0 = 0.1 * float(np.sqrt(kernel.signal_variance))
        heads.append(
            SvgpHead(
                state=VariationalState(
                    inducing=z if shared_inducing else z.copy(),
                    # Seeding the inducing values with the targets observed at
                    # those points spares the optimizer a long random walk.
                    mean=y_centered[idx, d].copy(),
                    chol_s=scale0 * np.eye(m_points),
                ),
                log_noise_variance=float(np.log(noise0)),
            )
        )
    return heads


def train(
    corpus,
    cfg: TrainConfig,
    f0_source: "F0Stats | None" = None,
    f0_target: "F0Stats | None" = None,
    log_full_elbo: bool = False,
) -> tuple[SvdklModel, TrainingLog]:
    """Fit a model to an aligned corpus (any object with ``x``/``y`` arrays).

    With ``layer_sizes`` empty or ``None`` the feature map is a frozen
    identity, i.e. a plain sparse GP on the raw (standardized) inputs.
    Everything is seeded from ``cfg.seed``: net init, pretraining, inducing
    placement, and the per-epoch shuffles, so retraining reproduces the model
    bit for bit.
    """
    cfg.validate()
    x = np.asarray(corpus.x, dtype=np.float64)
    y = np.asarray(corpus.y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeError("corpus arrays must be 2-d with matching row counts")
    n = x.shape[0]
    if n == 0:
        raise InputError("training corpus is empty")

    input_mean = x.mean(axis=0)
    input_scale = x.std(axis=0)
    input_scale[input_scale < 1e-12] = 1.0
    output_centers = y.mean(axis=0)
    y_centered = y - output_centers
    xn = (x - input_mean) / input_scale

    if cfg.layer_sizes:
        if cfg.layer_sizes[0] != x.shape[1]:
            raise ConfigError(
                f"layer_sizes starts at {cfg.layer_sizes[0]} but the corpus "
                f"has {x.shape[1]} feature columns"
            )
        net = init_net(list(cfg.layer_sizes), cfg.seed)
        if cfg.pretrain_epochs > 0:
            net = pretrain_layerwise(
                net, xn, cfg.pretrain_epochs, cfg.pretrain_step_size, cfg.seed
            )
        train_net = True
    else:
        net = identity_net(x.shape[1])
        train_net = False

    features = forward(net, xn)
    ls0 = np.clip(features.std(axis=0), 1e-2, None)
    sv0 = max(float(np.mean(np.var(y_centered, axis=0))), 1e-4)
    kernel = ArdKernelParams(
        log_signal_variance=float(np.log(sv0)),
        log_length_scales=np.log(ls0),
    )

    m_points = cfg.inducing_count
    if m_points > n:
        warnings.warn(
            f"requested {m_points} inducing points but only {n} rows; clamping"
        )
        m_points = n
    heads = _init_heads(
        features, y_centered, m_points, kernel, cfg.jitter_base, cfg.seed,
        cfg.shared_inducing,
    )
    model = SvdklModel(
        net=net,
        kernel=kernel,
        heads=heads,
        input_mean=input_mean,
        input_scale=input_scale,
        output_centers=output_centers,
        jitter_base=cfg.jitter_base,
        f0_source=f0_source,
        f0_target=f0_target,
        train_config=asdict(cfg),
        seed=cfg.seed,
    )

    params = model_parameters(model, train_net, cfg.shared_inducing)
    state = init_adam(params)
    base_steps = {
        name: cfg.net_step_size if name.startswith("net.") else cfg.step_size
        for name in params
    }

    log: TrainingLog = []
    for epoch in range(cfg.epochs):
        decay = cfg.final_step_fraction ** (epoch / max(cfg.epochs - 1, 1))
        step_sizes = {name: decay * size for name, size in base_steps.items()}
        perm = np.random.default_rng([cfg.seed, 1000 + epoch]).permutation(n)
        batch_values: list[float] = []
        escalations = 0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            result = compute_gradients(
                model, x[idx], y[idx], n, train_net, cfg.shared_inducing
            )
            params, state = adam_step(
                params,
                result.grads,
                state,
                step_sizes,
                cfg.adam_beta1,
                cfg.adam_beta2,
                cfg.adam_epsilon,
            )
            apply_parameters(model, params, train_net, cfg.shared_inducing)
            batch_values.append(result.value)
            escalations += result.jitter_escalations
        log.append(
            EpochRecord(
                epoch=epoch + 1,
                mean_objective=float(np.mean(batch_values)),
                full_elbo=elbo_full(model, x, y) if log_full_elbo else None,
                jitter_escalations=escalations,
            )
        )
    return model, log


# --- finite-difference audit --------------------------------------------------


def _group_of(name: str) -> str:
    if name.startswith("net."):
        return "net"
    if name.startswith("kernel."):
        return "ard"
    if name.endswith(".mean"):
        return "variational_mean"
    if name.endswith(".chol_raw"):
        return "chol_s"
    if name.endswith(".log_noise_variance"):
        return "noise"
    return "inducing"


def grad_check(
    model: SvdklModel,
    x: np.ndarray,
    y: np.ndarray,
    total_n: int | None = None,
    step: float = 1e-5,
    train_net: bool = True,
    shared_inducing: bool = False,
) -> dict[str, float]:
    """Worst relative error per parameter group against central differences.

    Relative error for a group is ``max|analytic - numeric|`` over its entries
    divided by ``max(max|analytic|, max|numeric|, 1)``, which stays meaningful
    when a group's true gradient is near zero. Every entry is probed, so keep
    this at desk scale.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = total_n if total_n is not None else x.shape[0]
    analytic = compute_gradients(model, x, y, n, train_net, shared_inducing)
    base = model_parameters(model, train_net, shared_inducing)
    probe = copy.deepcopy(model)

    def value_at(params: dict[str, np.ndarray]) -> float:
        apply_parameters(probe, params, train_net, shared_inducing)
        return compute_gradients(probe, x, y, n, train_net, shared_inducing).value

    diffs: dict[str, float] = {}
    scales: dict[str, float] = {}
    for name, arr in base.items():
        numeric = np.zeros_like(arr)
        flat = numeric.reshape(-1)
        src = arr.reshape(-1)
        for i in range(src.size):
            saved = src[i]
            src[i] = saved + step
            up = value_at(base)
            src[i] = saved - step
            down = value_at(base)
            src[i] = saved
            flat[i] = (up - down) / (2.0 * step)
        group = _group_of(name)
        delta = float(np.max(np.abs(analytic.grads[name] - numeric)))
        magnitude = max(
            float(np.max(np.abs(analytic.grads[name]))),
            float(np.max(np.abs(numeric))),
            1.0,
        )
        diffs[group] = max(diffs.get(group, 0.0), delta)
        scales[group] = max(scales.get(group, 1.0), magnitude)
    return {group: diffs[group] / scales[group] for group in diffs}
