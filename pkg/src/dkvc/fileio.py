"""On-disk formats: utterance features, aligned corpora, model checkpoints,
and training configuration.

Everything is structured text (JSON) with numbers in shortest round-trip
decimal form, so files are inspectable with standard tools, diffs are
meaningful, and a save/load cycle reproduces arrays bit for bit. Writes go
through a temporary file and an atomic rename; unknown keys are rejected by
name so silent typos cannot pass validation.
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import asdict, fields

import numpy as np

from .errors import DataError
from .kernels import ArdKernelParams
from .net import FeedForwardNet, Layer
from .pipeline import AlignedCorpus, F0Stats, Utterance
from .svgp import SvdklModel, SvgpHead, VariationalState
from .trainer import TrainConfig

UTTERANCE_FORMAT = "vcfeat"
CORPUS_FORMAT = "vcalign"
CHECKPOINT_FORMAT = "vcmodel"


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_json(path: str) -> dict:
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid structured text: {exc}")
    if not isinstance(doc, dict):
        raise DataError(f"{path}: top level must be a mapping")
    return doc


def _check_keys(doc: dict, required: set[str], optional: set[str], path: str):
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a mapping")
    missing = required - doc.keys()
    if missing:
        raise DataError(f"{path}: missing keys {sorted(missing)}")
    unknown = doc.keys() - required - optional
    if unknown:
        raise DataError(f"{path}: unknown keys {sorted(unknown)}")


def _expect_format(doc: dict, path: str, name: str, version_key: str, version: int):
    if doc.get("format") != name:
        raise DataError(
            f"{path}: format is {doc.get('format')!r}, expected {name!r}"
        )
    if doc.get(version_key) != version:
        raise DataError(
            f"{path}: unsupported {version_key} {doc.get(version_key)!r}"
        )


def _matrix(doc_value, path: str, what: str, columns: int | None = None) -> np.ndarray:
    if not isinstance(doc_value, list) or not doc_value:
        raise DataError(f"{path}: {what} must be a nonempty array of rows")
    width = columns
    for row_index, row in enumerate(doc_value):
        if not isinstance(row, list):
            raise DataError(f"{path}: {what} row {row_index} is not an array")
        if width is None:
            width = len(row)
        if len(row) != width:
            raise DataError(
                f"{path}: {what} row {row_index} has {len(row)} values, "
                f"expected {width}"
            )
    arr = np.asarray(doc_value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: {what} contains non-finite values")
    return arr


def _vector(doc_value, path: str, what: str) -> np.ndarray:
    if not isinstance(doc_value, list):
        raise DataError(f"{path}: {what} must be an array")
    arr = np.asarray(doc_value, dtype=np.float64)
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: {what} must be a flat array of finite numbers")
    return arr


# --- utterances -------------------------------------------------------------


def load_utterance(path: str) -> Utterance:
    doc = _load_json(path)
    _expect_format(doc, path, UTTERANCE_FORMAT, "version", 1)
    required = {"format", "version", "sample_rate_hz", "frame_period_ms", "f0_hz", "mcc"}
    _check_keys(doc, required, {"aperiodicity"}, path)
    f0 = _vector(doc["f0_hz"], path, "f0_hz")
    mcc = _matrix(doc["mcc"], path, "mcc", columns=25)
    if mcc.shape[0] != f0.size:
        raise DataError(
            f"{path}: f0_hz has {f0.size} frames but mcc has {mcc.shape[0]}"
        )
    if np.any(f0 < 0):
        raise DataError(f"{path}: f0_hz contains negative values")
    return Utterance(
        sample_rate_hz=int(doc["sample_rate_hz"]),
        frame_period_ms=float(doc["frame_period_ms"]),
        f0_hz=f0,
        mcc=mcc,
        aperiodicity=doc.get("aperiodicity"),
    )


def save_utterance(utterance: Utterance, path: str):
    doc = {
        "format": UTTERANCE_FORMAT,
        "version": 1,
        "sample_rate_hz": int(utterance.sample_rate_hz),
        "frame_period_ms": float(utterance.frame_period_ms),
        "f0_hz": utterance.f0_hz.tolist(),
        "mcc": utterance.mcc.tolist(),
    }
    if utterance.aperiodicity is not None:
        doc["aperiodicity"] = utterance.aperiodicity
    _atomic_write(path, json.dumps(doc, indent=1) + "\n")


# --- aligned corpora ---------------------------------------------------------


def load_corpus(path: str) -> AlignedCorpus:
    doc = _load_json(path)
    _expect_format(doc, path, CORPUS_FORMAT, "version", 1)
    _check_keys(doc, {"format", "version", "x", "y", "provenance"}, set(), path)
    x = _matrix(doc["x"], path, "x")
    y = _matrix(doc["y"], path, "y")
    if x.shape[0] != y.shape[0]:
        raise DataError(f"{path}: x and y row counts differ")
    provenance = [tuple(int(v) for v in row) for row in doc["provenance"]]
    if any(len(p) != 3 for p in provenance):
        raise DataError(f"{path}: provenance rows must be index triples")
    return AlignedCorpus(x=x, y=y, provenance=provenance)


def save_corpus(corpus: AlignedCorpus, path: str):
    doc = {
        "format": CORPUS_FORMAT,
        "version": 1,
        "x": corpus.x.tolist(),
        "y": corpus.y.tolist(),
        "provenance": [list(p) for p in corpus.provenance],
    }
    _atomic_write(path, json.dumps(doc, indent=1) + "\n")


# --- training config ---------------------------------------------------------

_CONFIG_FIELDS = {f.name for f in fields(TrainConfig)}


def config_from_dict(doc: dict, origin: str = "config") -> TrainConfig:
    unknown = doc.keys() - _CONFIG_FIELDS
    if unknown:
        raise DataError(f"{origin}: unknown keys {sorted(unknown)}")
    cfg = TrainConfig(**doc)
    if cfg.layer_sizes is not None:
        cfg.layer_sizes = [int(s) for s in cfg.layer_sizes]
    return cfg


def load_config(path: str) -> TrainConfig:
    return config_from_dict(_load_json(path), origin=path)


def save_config(cfg: TrainConfig, path: str):
    _atomic_write(path, json.dumps(asdict(cfg), indent=1) + "\n")


# --- checkpoints -------------------------------------------------------------


def _f0_to_doc(stats: F0Stats | None):
    if stats is None:
        return None
    return {
        "mean_log_f0": stats.mean_log_f0,
        "std_log_f0": stats.std_log_f0,
        "voiced_frame_count": stats.voiced_frame_count,
    }


def _f0_from_doc(doc, path: str) -> F0Stats | None:
    if doc is None:
        return None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: F0 statistics must be a mapping or null")
    _check_keys(doc, {"mean_log_f0", "std_log_f0", "voiced_frame_count"}, set(), path)
    return F0Stats(
        mean_log_f0=float(doc["mean_log_f0"]),
        std_log_f0=float(doc["std_log_f0"]),
        voiced_frame_count=int(doc["voiced_frame_count"]),
    )


def save_checkpoint(model: SvdklModel, path: str):
    tri = [
        chol[np.tril_indices(chol.shape[0])].tolist()
        for chol in (head.state.chol_s for head in model.heads)
    ]
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": 1,
        "seed": int(model.seed),
        "warp_alpha": float(model.warp_alpha),
        "jitter_base": float(model.jitter_base),
        "layer_sizes": model.net.layer_sizes,
        "activations": [layer.activation for layer in model.net.layers],
        "net_rng_seed": int(model.net.rng_seed),
        "net_weights": [layer.weight.tolist() for layer in model.net.layers],
        "net_biases": [layer.bias.tolist() for layer in model.net.layers],
        "log_signal_variance": float(model.kernel.log_signal_variance),
        "log_length_scales": model.kernel.log_length_scales.tolist(),
        "heads": [
            {
                "inducing": head.state.inducing.tolist(),
                "mean": head.state.mean.tolist(),
                "chol_s_lower": tri[d],
                "log_noise_variance": float(head.log_noise_variance),
            }
            for d, head in enumerate(model.heads)
        ],
        "input_mean": model.input_mean.tolist(),
        "input_scale": model.input_scale.tolist(),
        "output_centers": model.output_centers.tolist(),
        "f0_source": _f0_to_doc(model.f0_source),
        "f0_target": _f0_to_doc(model.f0_target),
        "train_config": model.train_config,
    }
    _atomic_write(path, json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path: str) -> SvdklModel:
    doc = _load_json(path)
    _expect_format(doc, path, CHECKPOINT_FORMAT, "version", 1)
    required = {
        "format", "version", "seed", "warp_alpha", "jitter_base",
        "layer_sizes", "activations", "net_rng_seed", "net_weights",
        "net_biases", "log_signal_variance", "log_length_scales", "heads",
        "input_mean", "input_scale", "output_centers", "f0_source",
        "f0_target", "train_config",
    }
    _check_keys(doc, required, set(), path)

    sizes = [int(s) for s in doc["layer_sizes"]]
    activations = doc["activations"]
    if len(doc["net_weights"]) != len(sizes) - 1 or len(activations) != len(sizes) - 1:
        raise DataError(f"{path}: net arrays do not match layer_sizes")
    layers = []
    for l, (w_doc, b_doc) in enumerate(zip(doc["net_weights"], doc["net_biases"])):
        weight = _matrix(w_doc, path, f"net weight {l}")
        bias = _vector(b_doc, path, f"net bias {l}")
        if weight.shape != (sizes[l + 1], sizes[l]):
            raise DataError(
                f"{path}: net weight {l} has shape {weight.shape}, "
                f"expected {(sizes[l + 1], sizes[l])}"
            )
        layers.append(Layer(weight=weight, bias=bias, activation=activations[l]))
    net = FeedForwardNet(layers, rng_seed=int(doc["net_rng_seed"]))

    kernel = ArdKernelParams(
        log_signal_variance=float(doc["log_signal_variance"]),
        log_length_scales=_vector(doc["log_length_scales"], path, "log_length_scales"),
    )
    if kernel.ndim != sizes[-1]:
        raise DataError(f"{path}: kernel dimension does not match the net output")

    if not isinstance(doc["heads"], list) or not doc["heads"]:
        raise DataError(f"{path}: heads must be a nonempty array")
    heads = []
    for d, head_doc in enumerate(doc["heads"]):
        _check_keys(
            head_doc,
            {"inducing", "mean", "chol_s_lower", "log_noise_variance"},
            set(),
            f"{path} head {d}",
        )
        inducing = _matrix(head_doc["inducing"], path, f"head {d} inducing")
        mean = _vector(head_doc["mean"], path, f"head {d} mean")
        m = inducing.shape[0]
        if inducing.shape[1] != kernel.ndim or mean.size != m:
            raise DataError(f"{path}: head {d} arrays are inconsistent")
        tri = _vector(head_doc["chol_s_lower"], path, f"head {d} chol_s_lower")
        if tri.size != m * (m + 1) // 2:
            raise DataError(
                f"{path}: head {d} chol_s_lower has {tri.size} values, "
                f"expected {m * (m + 1) // 2}"
            )
        chol = np.zeros((m, m))
        chol[np.tril_indices(m)] = tri
        heads.append(
            SvgpHead(
                state=VariationalState(inducing=inducing, mean=mean, chol_s=chol),
                log_noise_variance=float(head_doc["log_noise_variance"]),
            )
        )

    return SvdklModel(
        net=net,
        kernel=kernel,
        heads=heads,
        input_mean=_vector(doc["input_mean"], path, "input_mean"),
        input_scale=_vector(doc["input_scale"], path, "input_scale"),
        output_centers=_vector(doc["output_centers"], path, "output_centers"),
        jitter_base=float(doc["jitter_base"]),
        warp_alpha=float(doc["warp_alpha"]),
        f0_source=_f0_from_doc(doc["f0_source"], path),
        f0_target=_f0_from_doc(doc["f0_target"], path),
        train_config=doc["train_config"],
        seed=int(doc["seed"]),
    )
