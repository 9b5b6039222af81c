"""Dense GP regression used as the trusted reference for the sparse model.

Deliberately small scope: zero prior mean, SE-ARD kernel on the given points,
Cholesky plus triangular solves throughout (never an explicit inverse), and a
hard cap on the training size so nobody mistakes it for the scalable path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import InputError, ShapeError
from .kernels import ArdKernelParams, DEFAULT_JITTER, chol_with_jitter, kernel_matrix
from .svgp import GaussianMoments

MAX_EXACT_POINTS = 4096


@dataclass
class ExactGpModel:
    inputs: np.ndarray  # (n, q)
    targets: np.ndarray  # (n,)
    kernel: ArdKernelParams
    log_noise_variance: float
    jitter_base: float = DEFAULT_JITTER

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 2:
            raise ShapeError("inputs must be a 2-d array of points")
        n = self.inputs.shape[0]
        if n == 0:
            raise InputError("exact GP needs at least one training point")
        if n > MAX_EXACT_POINTS:
            raise InputError(
                f"exact GP capped at {MAX_EXACT_POINTS} points, got {n}; "
                "use the sparse model instead"
            )
        if self.targets.shape != (n,):
            raise ShapeError("targets must be a vector matching the inputs")
        if not np.all(np.isfinite(self.targets)):
            raise InputError("targets contain non-finite values")
        if self.inputs.shape[1] != self.kernel.ndim:
            raise ShapeError(
                f"inputs have {self.inputs.shape[1]} columns, "
                f"kernel expects {self.kernel.ndim}"
            )

    @property
    def noise_variance(self) -> float:
        return float(np.exp(self.log_noise_variance))


def _noisy_factor(model: ExactGpModel):
    k = kernel_matrix(model.inputs, model.inputs, model.kernel)
    k[np.diag_indices_from(k)] += model.noise_variance
    # The noise term usually makes the matrix comfortably positive definite,
    # so try it raw before escalating any nugget.
    return chol_with_jitter(
        k, model.jitter_base, include_zero=True, name="noisy kernel matrix"
    )


def log_marginal_likelihood(model: ExactGpModel) -> float:
    """Log evidence of the targets under the GP prior plus Gaussian noise."""
    fac = _noisy_factor(model)
    alpha = cho_solve((fac.lower, True), model.targets)
    return float(
        -0.5 * model.targets @ alpha
        - np.sum(np.log(np.diag(fac.lower)))
        - 0.5 * model.targets.size * np.log(2.0 * np.pi)
    )


def predict(model: ExactGpModel, queries: np.ndarray) -> GaussianMoments:
    """Posterior mean and full covariance at the query points."""
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != model.kernel.ndim:
        raise ShapeError(
            f"queries must be (t, {model.kernel.ndim}); got {queries.shape}"
        )
    fac = _noisy_factor(model)
    alpha = cho_solve((fac.lower, True), model.targets)
    k_star = kernel_matrix(queries, model.inputs, model.kernel)
    mean = k_star @ alpha
    half = solve_triangular(fac.lower, k_star.T, lower=True)
    cov = kernel_matrix(queries, queries, model.kernel) - half.T @ half
    return GaussianMoments(mean=mean, variance=cov, full=True)
