"""Deep-kernel sparse GP regression for parallel voice-conversion features."""

from .errors import (
    ConfigError,
    DataError,
    DkvcError,
    InputError,
    NumericalError,
    ShapeError,
    UsageError,
)
from .kernels import ArdKernelParams, DeepKernelSpec, deep_kernel, kernel_matrix, psd_factor, se_ard
from .net import FeedForwardNet, forward, backward, init_net, pretrain_layerwise
from .exact_gp import ExactGpModel, log_marginal_likelihood
from .svgp import (
    GaussianMoments,
    SvdklModel,
    SvgpHead,
    VariationalState,
    elbo_full,
    elbo_minibatch,
    expected_log_lik,
    kl_q_p,
    marginal_q,
    predict,
)
from .trainer import TrainConfig, compute_gradients, grad_check, train
from .pipeline import (
    AlignedCorpus,
    F0Stats,
    Utterance,
    WarpingConfig,
    build_training_set,
    convert_f0,
    convert_utterance,
    dtw_align,
    f0_stats,
    mcc_to_log_spectrum,
    mcd,
    warp_phase,
)
from .baseline import BaselineDnn, run_baseline_dnn
from .fileio import (
    load_checkpoint,
    load_config,
    load_corpus,
    load_utterance,
    save_checkpoint,
    save_config,
    save_corpus,
    save_utterance,
)

__version__ = "0.1.0"
