"""Command-line front end.

Subcommands: ``align``, ``train``, ``convert``, ``evaluate``, ``spectrum``,
``gradcheck``. Metrics and reports go to stdout, diagnostics to stderr. Exit
codes: 0 success, 1 usage error, 2 bad input data or configuration, 3
numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .baseline import run_baseline_dnn  # noqa: F401  (public API surface)
from .errors import (
    ConfigError,
    DataError,
    InputError,
    NumericalError,
    ShapeError,
    UsageError,
)
from .fileio import (
    load_checkpoint,
    load_config,
    load_utterance,
    save_checkpoint,
    save_corpus,
    save_utterance,
)
from .pipeline import (
    WarpingConfig,
    build_training_set,
    convert_utterance,
    f0_stats,
    mcc_to_log_spectrum,
    mcd,
)
from .svgp import SvdklModel, SvgpHead, VariationalState
from .trainer import TrainConfig, grad_check, train
from .kernels import ArdKernelParams, chol_with_jitter, kernel_matrix
from .net import forward, init_net


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dkvc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_align = sub.add_parser("align", help="DTW-align one parallel utterance pair")
    p_align.add_argument("source")
    p_align.add_argument("target")
    p_align.add_argument("--out", required=True, help="aligned-corpus output path")

    p_train = sub.add_parser("train", help="train a conversion model")
    p_train.add_argument("pair_dir", help="directory of <id>.src.vcfeat / <id>.tgt.vcfeat files")
    p_train.add_argument("--config", help="training configuration file")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", type=int)
    p_train.add_argument("--inducing", type=int)
    p_train.add_argument("--layers", help="comma-separated widths, input first")
    p_train.add_argument("--alpha", type=float, default=0.41)
    p_train.add_argument("--verbose", action="store_true")

    p_convert = sub.add_parser("convert", help="convert a source utterance")
    p_convert.add_argument("checkpoint")
    p_convert.add_argument("source")
    p_convert.add_argument("--out", required=True)

    p_eval = sub.add_parser("evaluate", help="mel-cepstral distortion between two files")
    p_eval.add_argument("first")
    p_eval.add_argument("second")

    p_spec = sub.add_parser("spectrum", help="render one frame's warped log spectrum")
    p_spec.add_argument("utterance")
    p_spec.add_argument("--frame", type=int, default=0)
    p_spec.add_argument("--bins", type=int, default=513)
    p_spec.add_argument("--alpha", type=float, default=0.41)

    p_grad = sub.add_parser("gradcheck", help="finite-difference audit of the gradients")
    p_grad.add_argument("--config", help="training configuration file")
    p_grad.add_argument("--seed", type=int)
    p_grad.add_argument("--verbose", action="store_true")

    return parser


def _load_cfg(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "epochs", None) is not None:
        cfg.epochs = args.epochs
    if getattr(args, "batch_size", None) is not None:
        cfg.batch_size = args.batch_size
    if getattr(args, "inducing", None) is not None:
        cfg.inducing_count = args.inducing
    layers = getattr(args, "layers", None)
    if layers is not None:
        text = layers.strip()
        if text in ("", "none"):
            cfg.layer_sizes = None
        else:
            try:
                cfg.layer_sizes = [int(part) for part in text.split(",")]
            except ValueError:
                raise UsageError(f"cannot parse --layers value {layers!r}")
    return cfg


def _cmd_align(args) -> int:
    src = load_utterance(args.source)
    tgt = load_utterance(args.target)
    corpus = build_training_set([(src, tgt)])
    save_corpus(corpus, args.out)
    print(f"aligned {corpus.num_rows} frame pairs", file=sys.stderr)
    return 0


def _discover_pairs(pair_dir: str) -> list[tuple[str, str]]:
    if not os.path.isdir(pair_dir):
        raise InputError(f"not a directory: {pair_dir}")
    names = sorted(os.listdir(pair_dir))
    pairs = []
    for name in names:
        if name.endswith(".src.vcfeat"):
            stem = name[: -len(".src.vcfeat")]
            partner = f"{stem}.tgt.vcfeat"
            if partner in names:
                pairs.append(
                    (os.path.join(pair_dir, name), os.path.join(pair_dir, partner))
                )
    if not pairs:
        raise InputError(f"no <id>.src.vcfeat / <id>.tgt.vcfeat pairs in {pair_dir}")
    return pairs


def _cmd_train(args) -> int:
    cfg = _load_cfg(args)
    pairs = [
        (load_utterance(src), load_utterance(tgt))
        for src, tgt in _discover_pairs(args.pair_dir)
    ]
    stats_src = f0_stats([src for src, _ in pairs])
    stats_tgt = f0_stats([tgt for _, tgt in pairs])
    corpus = build_training_set(pairs)
    model, log = train(
        corpus, cfg, f0_source=stats_src, f0_target=stats_tgt,
        log_full_elbo=args.verbose,
    )
    model.warp_alpha = args.alpha
    save_checkpoint(model, args.out)
    if args.verbose:
        print("epoch\tmean_objective\tfull_elbo\tjitter_escalations")
        for rec in log:
            print(
                f"{rec.epoch}\t{rec.mean_objective!r}\t{rec.full_elbo!r}\t"
                f"{rec.jitter_escalations}"
            )
    print(f"saved checkpoint to {args.out}", file=sys.stderr)
    return 0


def _cmd_convert(args) -> int:
    model = load_checkpoint(args.checkpoint)
    utterance = load_utterance(args.source)
    save_utterance(convert_utterance(model, utterance), args.out)
    return 0


def _cmd_evaluate(args) -> int:
    first = load_utterance(args.first)
    second = load_utterance(args.second)
    print(repr(mcd(first, second)))
    return 0


def _cmd_spectrum(args) -> int:
    utterance = load_utterance(args.utterance)
    if not 0 <= args.frame < utterance.num_frames:
        raise InputError(
            f"frame {args.frame} out of range (utterance has "
            f"{utterance.num_frames} frames)"
        )
    cfg = WarpingConfig(alpha=args.alpha, num_bins=args.bins)
    values = mcc_to_log_spectrum(utterance.mcc[args.frame], cfg)
    omega = np.pi * np.arange(cfg.num_bins) / (cfg.num_bins - 1)
    for w, v in zip(omega, values):
        print(f"{float(w)!r}\t{float(v)!r}")
    return 0


def _toy_model_and_data(cfg: TrainConfig):
    """Small synthetic instance for the gradient audit."""
    rng = np.random.default_rng(cfg.seed)
    sizes = list(cfg.layer_sizes) if cfg.layer_sizes else [4, 6, 3]
    if sizes[0] > 8 or len(sizes) > 4:
        sizes = [4, 6, 3]  # keep the probe affordable regardless of config
    d_in, q = sizes[0], sizes[-1]
    n, m_points, n_heads = 6, 3, 2
    x = rng.normal(size=(n, d_in))
    y = rng.normal(size=(n, n_heads))
    net = init_net(sizes, cfg.seed)
    kernel = ArdKernelParams(0.1, rng.normal(scale=0.2, size=q))
    feats = forward(net, x)
    heads = []
    for d in range(n_heads):
        z = feats[rng.choice(n, size=m_points, replace=False)]
        z = z + 0.05 * rng.standard_normal(z.shape)
        fac = chol_with_jitter(kernel_matrix(z, z, kernel), cfg.jitter_base)
        heads.append(
            SvgpHead(
                state=VariationalState(
                    inducing=z,
                    mean=rng.normal(scale=0.3, size=m_points),
                    chol_s=0.5 * fac.lower,
                ),
                log_noise_variance=-1.0 + 0.1 * d,
            )
        )
    model = SvdklModel(
        net=net,
        kernel=kernel,
        heads=heads,
        input_mean=np.zeros(d_in),
        input_scale=np.ones(d_in),
        output_centers=np.zeros(n_heads),
        jitter_base=cfg.jitter_base,
        seed=cfg.seed,
    )
    return model, x, y


def _cmd_gradcheck(args) -> int:
    cfg = _load_cfg(args)
    model, x, y = _toy_model_and_data(cfg)
    report = grad_check(model, x, y)
    tolerance = 1e-4
    print("group\tmax_rel_error\tstatus")
    for group in sorted(report):
        status = "ok" if report[group] <= tolerance else "SUSPECT"
        print(f"{group}\t{report[group]!r}\t{status}")
    return 0


_DISPATCH = {
    "align": _cmd_align,
    "train": _cmd_train,
    "convert": _cmd_convert,
    "evaluate": _cmd_evaluate,
    "spectrum": _cmd_spectrum,
    "gradcheck": _cmd_gradcheck,
}


def run_command(argv: list[str]) -> int:
    """Parse and execute one invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help and friends
        return int(exc.code or 0)
    try:
        return _DISPATCH[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, InputError, ShapeError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
