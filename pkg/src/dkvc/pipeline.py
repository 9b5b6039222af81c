"""Parallel-corpus feature pipeline: alignment, F0 statistics, conversion,
and spectral evaluation.

Utterances carry a fundamental-frequency track (0 marks unvoiced frames) and
a 25-column mel-cepstral matrix whose zeroth column is frame energy. Energy
is never trained or converted; regression runs on columns 1-24. Alignment is
dynamic time warping with squared Euclidean frame distances on those 24
columns, and the distortion metric averages per-frame values of
``(10 / ln 10) * sqrt(2 * sum of squared coefficient differences)`` along the
warping path.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import ConfigError, InputError, NumericalError, ShapeError
from .svgp import SvdklModel, predict

MCC_COLUMNS = 25


@dataclass
class Utterance:
    """One utterance's vocoder features.

    ``aperiodicity`` is opaque: whatever structure arrived from disk is kept
    and copied through conversion verbatim.
    """

    sample_rate_hz: int
    frame_period_ms: float
    f0_hz: np.ndarray
    mcc: np.ndarray
    aperiodicity: list | None = None

    def __post_init__(self):
        self.f0_hz = np.asarray(self.f0_hz, dtype=np.float64)
        self.mcc = np.asarray(self.mcc, dtype=np.float64)
        if self.sample_rate_hz <= 0:
            raise InputError("sample_rate_hz must be positive")
        if self.frame_period_ms <= 0:
            raise InputError("frame_period_ms must be positive")
        if self.f0_hz.ndim != 1:
            raise ShapeError("f0_hz must be a vector")
        if self.mcc.ndim != 2 or self.mcc.shape[1] != MCC_COLUMNS:
            raise ShapeError(f"mcc must have {MCC_COLUMNS} columns")
        if self.mcc.shape[0] != self.f0_hz.size:
            raise ShapeError("f0 track and mcc matrix disagree on frame count")
        if np.any(self.f0_hz < 0) or not np.all(np.isfinite(self.f0_hz)):
            raise InputError("f0 values must be finite and >= 0")
        if not np.all(np.isfinite(self.mcc)):
            raise InputError("mcc values must be finite")

    @property
    def num_frames(self) -> int:
        return self.f0_hz.size


@dataclass
class AlignedCorpus:
    """Frame-paired training rows (24 source and 24 target coefficients)."""

    x: np.ndarray
    y: np.ndarray
    provenance: list[tuple[int, int, int]] = field(default_factory=list)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 2 or self.y.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ShapeError("corpus arrays must be 2-d with equal row counts")

    @property
    def num_rows(self) -> int:
        return self.x.shape[0]


@dataclass
class F0Stats:
    """Log-domain voiced-frame statistics (natural log, population std)."""

    mean_log_f0: float
    std_log_f0: float
    voiced_frame_count: int


@dataclass
class WarpingConfig:
    """First-order all-pass frequency warp evaluated on a uniform grid."""

    alpha: float = 0.41
    gamma: float = 0.0
    num_bins: int = 513

    def __post_init__(self):
        if not -1.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly inside (-1, 1)")
        if self.gamma != 0.0:
            raise ConfigError("only gamma = 0 (log-spectrum cepstra) is supported")
        if self.num_bins < 2:
            raise ConfigError("num_bins must be >= 2")


def dtw_align(
    source: np.ndarray, target: np.ndarray
) -> tuple[list[tuple[int, int]], float]:
    """Minimum-cost monotone alignment between two coefficient sequences.

    Local cost is the squared Euclidean distance between frames; steps move
    one frame forward in either sequence or both. Returns the path as index
    pairs covering both endpoints, plus the accumulated cost.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.ndim != 2 or target.ndim != 2:
        raise ShapeError("alignment inputs must be 2-d (frames x coefficients)")
    if source.shape[0] == 0 or target.shape[0] == 0:
        raise InputError("cannot align an empty sequence")
    if source.shape[1] != target.shape[1]:
        raise ShapeError("sequences must have the same coefficient count")
    dist = backend.scaled_sqdist(source, target, np.ones(source.shape[1]))
    cost, path = backend.dtw(dist)
    return [(int(i), int(j)) for i, j in path], cost


def build_training_set(pairs: list[tuple[Utterance, Utterance]]) -> AlignedCorpus:
    """Stack DTW-aligned frame pairs from parallel utterances.

    Column 0 (energy) is dropped before alignment and from the regression
    rows. Provenance records (pair index, source frame, target frame) per
    row.
    """
    if not pairs:
        raise InputError("no utterance pairs provided")
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    provenance: list[tuple[int, int, int]] = []
    for pair_id, (src, tgt) in enumerate(pairs):
        path, _ = dtw_align(src.mcc[:, 1:], tgt.mcc[:, 1:])
        rows = np.array(path, dtype=np.int64)
        xs.append(src.mcc[rows[:, 0], 1:])
        ys.append(tgt.mcc[rows[:, 1], 1:])
        provenance.extend((pair_id, int(i), int(j)) for i, j in path)
    return AlignedCorpus(
        x=np.concatenate(xs, axis=0),
        y=np.concatenate(ys, axis=0),
        provenance=provenance,
    )


def f0_stats(utterances: list[Utterance]) -> F0Stats:
    """Pooled log-F0 mean and population standard deviation over voiced frames."""
    if not utterances:
        raise InputError("no utterances provided")
    voiced = np.concatenate([u.f0_hz[u.f0_hz > 0] for u in utterances])
    if voiced.size < 2:
        raise InputError(
            f"need at least 2 voiced frames to estimate F0 statistics, "
            f"got {voiced.size}"
        )
    logs = np.log(voiced)
    return F0Stats(
        mean_log_f0=float(np.mean(logs)),
        std_log_f0=float(np.std(logs)),
        voiced_frame_count=int(voiced.size),
    )


def convert_f0(track: np.ndarray, source: F0Stats, target: F0Stats) -> np.ndarray:
    """Linear log-domain F0 transform; unvoiced frames pass through as zero.

    Voiced frames map by matching first and second moments:
    ``exp((std_y / std_x) * (log f - mean_x) + mean_y)``.
    """
    track = np.asarray(track, dtype=np.float64)
    if track.ndim != 1:
        raise ShapeError("f0 track must be a vector")
    if np.any(track < 0) or not np.all(np.isfinite(track)):
        raise InputError("f0 values must be finite and >= 0")
    if source.std_log_f0 <= 0:
        raise NumericalError("source log-F0 deviation is zero; ratio undefined")
    out = np.zeros_like(track)
    voiced = track > 0
    ratio = target.std_log_f0 / source.std_log_f0
    out[voiced] = np.exp(
        ratio * (np.log(track[voiced]) - source.mean_log_f0) + target.mean_log_f0
    )
    return out


def convert_utterance(model: SvdklModel, utterance: Utterance) -> Utterance:
    """Map a source utterance into the target speaker's feature space.

    Spectral columns 1-24 are replaced by the model's predictive means,
    energy is copied from the source, F0 is converted with the stored
    statistics, and everything else rides along unchanged.
    """
    n_coeffs = utterance.mcc.shape[1] - 1
    if model.num_heads != n_coeffs or model.net.input_size != n_coeffs:
        raise ConfigError(
            f"model maps {model.net.input_size} -> {model.num_heads} "
            f"coefficients but the utterance carries {n_coeffs}"
        )
    if model.f0_source is None or model.f0_target is None:
        raise ConfigError("model carries no F0 statistics; train on utterances first")
    moments = predict(model, utterance.mcc[:, 1:])
    converted = np.empty_like(utterance.mcc)
    converted[:, 0] = utterance.mcc[:, 0]
    for d, mom in enumerate(moments):
        converted[:, d + 1] = mom.mean
    return Utterance(
        sample_rate_hz=utterance.sample_rate_hz,
        frame_period_ms=utterance.frame_period_ms,
        f0_hz=convert_f0(utterance.f0_hz, model.f0_source, model.f0_target),
        mcc=converted,
        aperiodicity=copy.deepcopy(utterance.aperiodicity),
    )


def mcd(a: Utterance, b: Utterance) -> float:
    """Mean mel-cepstral distortion in decibels along the warping path.

    Frames are paired by DTW on columns 1-24; each pair contributes
    ``(10 / ln 10) * sqrt(2 * sum_d (a_d - b_d)**2)``.
    """
    if a.num_frames == 0 or b.num_frames == 0:
        raise InputError("cannot evaluate distortion on an empty utterance")
    path, _ = dtw_align(a.mcc[:, 1:], b.mcc[:, 1:])
    rows = np.array(path, dtype=np.int64)
    diff = a.mcc[rows[:, 0], 1:] - b.mcc[rows[:, 1], 1:]
    per_frame = (10.0 / np.log(10.0)) * np.sqrt(2.0 * np.sum(diff**2, axis=1))
    return float(np.mean(per_frame))


def warp_phase(omega: np.ndarray | float, alpha: float) -> np.ndarray | float:
    """Phase response of the first-order all-pass warp on [0, pi].

    Computed with the two-argument arctangent so the image again spans
    [0, pi] with both endpoints fixed; ``alpha = 0`` is the identity.
    """
    if not -1.0 < alpha < 1.0:
        raise ConfigError("alpha must lie strictly inside (-1, 1)")
    om = np.asarray(omega, dtype=np.float64)
    beta = np.arctan2(
        (1.0 - alpha * alpha) * np.sin(om),
        (1.0 + alpha * alpha) * np.cos(om) - 2.0 * alpha,
    )
    return float(beta) if np.isscalar(omega) else beta


def mcc_to_log_spectrum(coeffs: np.ndarray, cfg: WarpingConfig) -> np.ndarray:
    """Render one frame's cepstra to a warped log-amplitude spectrum.

    Bin ``k`` sits at ``omega_k = pi * k / (num_bins - 1)`` and holds the
    cosine series ``sum_m c_m * cos(m * beta(omega_k))``.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim != 1:
        raise ShapeError("coefficients must form a vector")
    omega = np.pi * np.arange(cfg.num_bins) / (cfg.num_bins - 1)
    beta = warp_phase(omega, cfg.alpha)
    orders = np.arange(coeffs.size)
    return np.cos(np.outer(beta, orders)) @ coeffs
