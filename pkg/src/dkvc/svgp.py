"""Sparse variational GP heads on shared net features.

Each output dimension gets its own inducing set and Gaussian variational
posterior ``q(f_Z) = N(m, S)`` while the feature net and the ARD kernel
hyperparameters are shared across heads. ``S`` is carried as its lower
Cholesky factor; the trainer additionally reparameterizes that factor's
diagonal through ``log`` so updates stay unconstrained.

The evidence lower bound decomposes as a data-fit sum over per-point
marginals of ``q`` minus one KL term per head, which is what makes unbiased
minibatch estimates possible: the data-fit sum is rescaled by
``total_n / batch_size`` while the KL terms are counted once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import ConfigError, InputError, ShapeError
from .kernels import ArdKernelParams, DEFAULT_JITTER, chol_with_jitter, kernel_matrix
from .net import FeedForwardNet, forward

if TYPE_CHECKING:
    from .pipeline import F0Stats


@dataclass
class GaussianMoments:
    """Mean vector plus either per-point variances or a full covariance."""

    mean: np.ndarray
    variance: np.ndarray
    full: bool = False

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.variance = np.asarray(self.variance, dtype=np.float64)
        if self.full:
            if self.variance.shape != (self.mean.size, self.mean.size):
                raise ShapeError("full covariance must be square and match the mean")
        elif self.variance.shape != self.mean.shape:
            raise ShapeError("variance vector must match the mean")


@dataclass
class VariationalState:
    """Inducing locations (in feature space) and the posterior over them."""

    inducing: np.ndarray  # (m_points, q)
    mean: np.ndarray  # (m_points,)
    chol_s: np.ndarray  # (m_points, m_points) lower triangular, positive diag

    def __post_init__(self):
        self.inducing = np.asarray(self.inducing, dtype=np.float64)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.chol_s = np.asarray(self.chol_s, dtype=np.float64)
        m = self.inducing.shape[0]
        if self.inducing.ndim != 2:
            raise ShapeError("inducing points must form a 2-d array")
        if self.mean.shape != (m,):
            raise ShapeError("variational mean length must match inducing count")
        if self.chol_s.shape != (m, m):
            raise ShapeError("chol_s must be square and match inducing count")

    @property
    def count(self) -> int:
        return self.inducing.shape[0]


@dataclass
class SvgpHead:
    """One output dimension: variational state plus its own noise level."""

    state: VariationalState
    log_noise_variance: float

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.log_noise_variance))


@dataclass
class SvdklModel:
    """Shared feature net and kernel, one SVGP head per output dimension.

    Inputs are standardized with the stored per-dimension normalizer before
    entering the net; targets are centered per dimension during training and
    predictions are de-centered on the way out. The F0 statistics ride along
    for the conversion pipeline and stay ``None`` for plain regression use.
    """

    net: FeedForwardNet
    kernel: ArdKernelParams
    heads: list[SvgpHead]
    input_mean: np.ndarray
    input_scale: np.ndarray
    output_centers: np.ndarray
    jitter_base: float = DEFAULT_JITTER
    warp_alpha: float = 0.41
    f0_source: "F0Stats | None" = None
    f0_target: "F0Stats | None" = None
    train_config: dict | None = None
    seed: int = 0

    def __post_init__(self):
        self.input_mean = np.asarray(self.input_mean, dtype=np.float64)
        self.input_scale = np.asarray(self.input_scale, dtype=np.float64)
        self.output_centers = np.asarray(self.output_centers, dtype=np.float64)
        d = self.net.input_size
        if self.input_mean.shape != (d,) or self.input_scale.shape != (d,):
            raise ConfigError("input normalizer must match the net's input size")
        if np.any(self.input_scale <= 0):
            raise ConfigError("input scales must be positive")
        if self.output_centers.shape != (len(self.heads),):
            raise ConfigError("one output center per head required")
        if not self.heads:
            raise ConfigError("model needs at least one head")
        q = self.kernel.ndim
        if self.net.output_size != q:
            raise ConfigError(
                f"net produces {self.net.output_size} features, kernel expects {q}"
            )
        for i, head in enumerate(self.heads):
            if head.state.inducing.shape[1] != q:
                raise ConfigError(f"head {i} inducing points are not {q}-dimensional")

    @property
    def num_heads(self) -> int:
        return len(self.heads)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.net.input_size:
            raise ShapeError(
                f"model expects {self.net.input_size} input columns, "
                f"got {x.shape[1] if x.ndim == 2 else 'a non-2d array'}"
            )
        return (x - self.input_mean) / self.input_scale


def _head_moments(
    head: SvgpHead,
    kernel: ArdKernelParams,
    features: np.ndarray,
    jitter_base: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Unclamped mean and per-point variance of q at the given features."""
    state = head.state
    k_zz = kernel_matrix(state.inducing, state.inducing, kernel)
    fac = chol_with_jitter(k_zz, jitter_base, name="inducing kernel matrix")
    k_xz = kernel_matrix(features, state.inducing, kernel)
    psi = cho_solve((fac.lower, True), k_xz.T).T
    mean = psi @ state.mean
    t = psi @ state.chol_s
    var = (
        kernel.signal_variance
        - np.einsum("ij,ij->i", psi, k_xz)
        + np.einsum("ij,ij->i", t, t)
    )
    return mean, var


def marginal_q(
    head: SvgpHead,
    kernel: ArdKernelParams,
    features: np.ndarray,
    jitter_base: float = DEFAULT_JITTER,
) -> GaussianMoments:
    """Per-point marginals of the variational posterior at ``features``.

    Variances are clamped at zero on output; tiny negatives (at the scale of
    rounding error) are expected near collapse.
    """
    features = _check_features(kernel, features)
    mean, var = _head_moments(head, kernel, features, jitter_base)
    return GaussianMoments(mean=mean, variance=np.maximum(var, 0.0))


def _check_features(kernel: ArdKernelParams, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != kernel.ndim:
        raise ShapeError(
            f"features must be (n, {kernel.ndim}); got {features.shape}"
        )
    return features


def expected_log_lik(
    mean: np.ndarray | float,
    var: np.ndarray | float,
    y: np.ndarray | float,
    noise_variance: float,
) -> np.ndarray | float:
    """Gaussian log density of ``y`` at the latent marginal, in expectation.

    Equals ``log N(y | mean, noise) - var / (2 * noise)``; vectorizes over
    arrays of matching shape.
    """
    if noise_variance <= 0:
        raise ConfigError("noise variance must be positive")
    resid = np.asarray(y, dtype=np.float64) - mean
    return (
        -0.5 * np.log(2.0 * np.pi * noise_variance)
        - (resid**2 + var) / (2.0 * noise_variance)
    )


def kl_q_p(
    head: SvgpHead,
    kernel: ArdKernelParams,
    jitter_base: float = DEFAULT_JITTER,
) -> float:
    """KL divergence from the head's Gaussian posterior to the GP prior at Z."""
    state = head.state
    k_zz = kernel_matrix(state.inducing, state.inducing, kernel)
    fac = chol_with_jitter(k_zz, jitter_base, name="inducing kernel matrix")
    return _kl_terms(fac.lower, state.mean, state.chol_s)


def _kl_terms(lower: np.ndarray, m: np.ndarray, chol_s: np.ndarray) -> float:
    half_trace = solve_triangular(lower, chol_s, lower=True)
    half_quad = solve_triangular(lower, m, lower=True)
    logdet_prior = 2.0 * np.sum(np.log(np.diag(lower)))
    logdet_post = 2.0 * np.sum(np.log(np.diag(chol_s)))
    return 0.5 * float(
        np.sum(half_trace**2)
        + np.sum(half_quad**2)
        - m.size
        + logdet_prior
        - logdet_post
    )


def elbo_minibatch(
    model: SvdklModel,
    x_batch: np.ndarray,
    y_batch: np.ndarray,
    total_n: int,
) -> float:
    """Unbiased evidence-lower-bound estimate from one batch.

    The data-fit sum is scaled by ``total_n / len(batch)``; KL terms are
    exact. With the batch equal to the full data set this *is* the full
    bound.
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
    if not 1 <= n_b <= total_n:
        raise InputError(f"batch size {n_b} incompatible with total_n {total_n}")

    features = forward(model.net, model.normalize(x_batch))
    y_centered = y_batch - model.output_centers
    weight = total_n / n_b
    bound = 0.0
    for d, head in enumerate(model.heads):
        state = head.state
        k_zz = kernel_matrix(state.inducing, state.inducing, model.kernel)
        fac = chol_with_jitter(
            k_zz, model.jitter_base, name="inducing kernel matrix"
        )
        k_xz = kernel_matrix(features, state.inducing, model.kernel)
        psi = cho_solve((fac.lower, True), k_xz.T).T
        mean = psi @ state.mean
        t = psi @ state.chol_s
        var = (
            model.kernel.signal_variance
            - np.einsum("ij,ij->i", psi, k_xz)
            + np.einsum("ij,ij->i", t, t)
        )
        ell = expected_log_lik(mean, var, y_centered[:, d], head.noise_variance)
        bound += weight * float(np.sum(ell))
        bound -= _kl_terms(fac.lower, state.mean, state.chol_s)
    return bound


def elbo_full(model: SvdklModel, x: np.ndarray, y: np.ndarray) -> float:
    """Evidence lower bound over the full data set."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError("elbo_full needs a nonempty 2-d input array")
    return elbo_minibatch(model, x, y, total_n=x.shape[0])


def predict(
    model: SvdklModel,
    x_star: np.ndarray,
    full_cov: bool = False,
) -> list[GaussianMoments]:
    """Posterior predictive moments of the latent functions, one per head.

    Means are de-centered back to the target scale. With ``full_cov`` the
    variance field holds the dense covariance instead of its diagonal.
    """
    features = forward(model.net, model.normalize(x_star))
    out: list[GaussianMoments] = []
    for d, head in enumerate(model.heads):
        state = head.state
        k_zz = kernel_matrix(state.inducing, state.inducing, model.kernel)
        fac = chol_with_jitter(
            k_zz, model.jitter_base, name="inducing kernel matrix"
        )
        k_xz = kernel_matrix(features, state.inducing, model.kernel)
        psi = cho_solve((fac.lower, True), k_xz.T).T
        mean = psi @ state.mean + model.output_centers[d]
        if full_cov:
            k_star = kernel_matrix(features, features, model.kernel)
            t = psi @ state.chol_s
            cov = k_star - psi @ k_xz.T + t @ t.T
            out.append(GaussianMoments(mean=mean, variance=cov, full=True))
        else:
            t = psi @ state.chol_s
            var = (
                model.kernel.signal_variance
                - np.einsum("ij,ij->i", psi, k_xz)
                + np.einsum("ij,ij->i", t, t)
            )
            out.append(GaussianMoments(mean=mean, variance=np.maximum(var, 0.0)))
    return out
