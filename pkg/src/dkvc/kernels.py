"""Squared-exponential ARD kernel, with and without a learned feature map.

Hyperparameters are stored in the log domain so gradient-based training is
unconstrained; accessors exponentiate on the way out. All linear algebra is
float64, and positive-definite factorizations go through
:func:`chol_with_jitter`, which escalates a relative diagonal nugget instead
of failing outright.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import backend
from .errors import ConfigError, NumericalError, ShapeError

DEFAULT_JITTER = 1e-6

# Escalation ladder for the relative nugget: base, 10*base, ..., 10^4*base.
JITTER_STEPS = 5

# Running count of attempted positive-definite factorizations. Exposed so the
# complexity-sensitive tests can assert "one K_ZZ factorization per head per
# step" without instrumenting the trainer.
_factorizations = 0


def factorization_count() -> int:
    return _factorizations


@dataclass
class ArdKernelParams:
    """Squared-exponential ARD hyperparameters in the log domain.

    Parameters
    ----------
    log_signal_variance : float
        Natural log of the signal variance (the kernel value at zero lag).
    log_length_scales : ndarray, shape (q,)
        Natural log of one length scale per input dimension.
    """

    log_signal_variance: float
    log_length_scales: np.ndarray

    def __post_init__(self):
        self.log_length_scales = np.asarray(self.log_length_scales, dtype=np.float64)
        if self.log_length_scales.ndim != 1 or self.log_length_scales.size == 0:
            raise ShapeError("log_length_scales must be a nonempty vector")
        if not np.isfinite(self.log_signal_variance):
            raise ConfigError("log_signal_variance must be finite")
        if not np.all(np.isfinite(self.log_length_scales)):
            raise ConfigError("log_length_scales must be finite")

    @property
    def ndim(self) -> int:
        return self.log_length_scales.size

    @property
    def signal_variance(self) -> float:
        return float(np.exp(self.log_signal_variance))

    @property
    def length_scales(self) -> np.ndarray:
        return np.exp(self.log_length_scales)

    @property
    def inv_length_scales(self) -> np.ndarray:
        return np.exp(-self.log_length_scales)


@dataclass
class DeepKernelSpec:
    """Configuration for a kernel applied to learned features.

    ``layer_sizes`` lists every width in the feature net including the input,
    e.g. ``[24, 1000, 500, 50, 20]``; hidden layers use the rectifier, the
    final (feature) layer is linear.
    """

    layer_sizes: list[int] = field(default_factory=lambda: [24, 1000, 500, 50, 20])
    hidden_activation: str = "relu"
    output_activation: str = "linear"
    jitter_base: float = DEFAULT_JITTER

    def __post_init__(self):
        if len(self.layer_sizes) < 3:
            raise ConfigError("a deep kernel needs at least one hidden layer")
        if any(int(s) < 1 for s in self.layer_sizes):
            raise ConfigError("layer sizes must be positive")
        if self.jitter_base <= 0:
            raise ConfigError("jitter_base must be positive")
        self.layer_sizes = [int(s) for s in self.layer_sizes]


def kernel_matrix(a: np.ndarray, b: np.ndarray, params: ArdKernelParams) -> np.ndarray:
    """Cross-covariance matrix of the SE-ARD kernel.

    Parameters
    ----------
    a : ndarray, shape (n, q)
    b : ndarray, shape (p, q)
    params : ArdKernelParams

    Returns
    -------
    ndarray, shape (n, p)
        ``out[i, j] = sv * exp(-0.5 * sum_q ((a[i,q]-b[j,q]) / l_q)**2)``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("kernel inputs must be 2-d arrays of points")
    if a.shape[1] != params.ndim or b.shape[1] != params.ndim:
        raise ShapeError(
            f"kernel inputs have {a.shape[1]} and {b.shape[1]} columns, "
            f"params expect {params.ndim}"
        )
    d = backend.scaled_sqdist(a, b, params.inv_length_scales)
    return params.signal_variance * np.exp(-0.5 * d)


def se_ard(a: np.ndarray, b: np.ndarray, params: ArdKernelParams) -> float:
    """Evaluate the SE-ARD kernel on a single pair of points.

    Delegates to :func:`kernel_matrix` so scalar and matrix evaluations agree
    bitwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ShapeError("se_ard expects single points (1-d arrays)")
    return float(kernel_matrix(a[None, :], b[None, :], params)[0, 0])


class JitteredChol(NamedTuple):
    """Result of a jittered Cholesky factorization.

    ``matrix`` is the factorized matrix (input plus ``eps`` on the diagonal),
    ``level`` the index of the nugget ladder step that succeeded.
    """

    lower: np.ndarray
    eps: float
    matrix: np.ndarray
    level: int


def chol_with_jitter(
    mat: np.ndarray,
    jitter_base: float = DEFAULT_JITTER,
    include_zero: bool = False,
    name: str = "matrix",
) -> JitteredChol:
    """Lower-Cholesky factor of ``mat`` plus the smallest workable nugget.

    The nugget is relative: candidate epsilons are ``jitter_base * 10**k``
    times the mean diagonal for ``k = 0..4``. ``include_zero=True`` tries the
    raw matrix first, which is appropriate when ``mat`` already contains a
    noise term on its diagonal.

    Raises
    ------
    NumericalError
        If every candidate fails.
    """
    global _factorizations
    _factorizations += 1

    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ShapeError(f"{name} must be square")
    mean_diag = float(np.mean(np.diag(mat)))
    scale = mean_diag if mean_diag > 0 else 1.0

    candidates = [0.0] if include_zero else []
    candidates += [jitter_base * 10.0**k * scale for k in range(JITTER_STEPS)]
    for level, eps in enumerate(candidates):
        jittered = mat if eps == 0.0 else mat + eps * np.eye(mat.shape[0])
        try:
            lower = np.linalg.cholesky(jittered)
        except np.linalg.LinAlgError:
            continue
        return JitteredChol(lower, eps, jittered, level)
    raise NumericalError(
        f"factorization of {name} failed after jitter escalation "
        f"(largest nugget tried: {candidates[-1]:g})"
    )


def psd_factor(
    points: np.ndarray,
    params: ArdKernelParams,
    jitter_base: float = DEFAULT_JITTER,
) -> JitteredChol:
    """Jittered Cholesky factor of the kernel matrix over ``points``."""
    k = kernel_matrix(points, points, params)
    return chol_with_jitter(k, jitter_base, name="kernel matrix")


def deep_kernel(x_i: np.ndarray, x_j: np.ndarray, net, params: ArdKernelParams) -> float:
    """SE-ARD kernel evaluated on net features of the two inputs."""
    from .net import forward

    x_i = np.asarray(x_i, dtype=np.float64)
    x_j = np.asarray(x_j, dtype=np.float64)
    if x_i.ndim != 1 or x_j.ndim != 1:
        raise ShapeError("deep_kernel expects single points (1-d arrays)")
    if net.output_size != params.ndim:
        raise ConfigError(
            f"net produces {net.output_size} features, "
            f"kernel params expect {params.ndim}"
        )
    h = forward(net, np.stack([x_i, x_j]))
    return float(kernel_matrix(h[:1], h[1:], params)[0, 0])
