"""Weekly CDR behavior tensors, a small from-scratch ConvNet, and two
user-level prediction heads (softmax averaging and linear-SVM-on-features),
with a synthetic data generator for end-to-end checks.
"""

from .classify import (
    Metrics,
    SvmModel,
    UserPrediction,
    evaluate,
    extract_user_features,
    predict_dataset,
    predict_user,
    svm_predict,
    train_linear_svm,
    train_svm_head,
)
from .container import ChecksumError, ContainerError, FormatVersionError, TruncatedFileError
from .featurize import (
    CHANNELS,
    DEFAULT_AGE_EDGES,
    AgeBuckets,
    NormStats,
    TensorDataset,
    WeekId,
    apply_normalizer,
    bucketize_age,
    build_week_tensor,
    featurize_users,
    fit_normalizer,
    load_tensor_dataset,
    save_tensor_dataset,
    week_of,
)
from .ingest import (
    CdrRecord,
    Direction,
    IngestError,
    IngestReport,
    Kind,
    LabelRecord,
    ParseError,
    ingest,
    load_labels,
)
from .modelfile import load_model, save_model
from .net import (
    ModelParams,
    NetworkConfig,
    backward,
    conv2d_valid,
    dense_affine,
    downsized_config,
    forward,
    forward_batch,
    init_params,
    leaky_relu,
    softmax,
)
from .synth import Archetype, SynthConfig, generate, make_archetypes, tv_distance
from .training import (
    GRAD_TOL,
    NumericError,
    TrainConfig,
    cross_entropy,
    grad_check,
    sgd_step,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AgeBuckets",
    "Archetype",
    "CHANNELS",
    "ChecksumError",
    "CdrRecord",
    "ContainerError",
    "DEFAULT_AGE_EDGES",
    "Direction",
    "FormatVersionError",
    "GRAD_TOL",
    "IngestError",
    "IngestReport",
    "Kind",
    "LabelRecord",
    "Metrics",
    "ModelParams",
    "NetworkConfig",
    "NormStats",
    "NumericError",
    "ParseError",
    "SvmModel",
    "SynthConfig",
    "TensorDataset",
    "TrainConfig",
    "TruncatedFileError",
    "UserPrediction",
    "WeekId",
    "apply_normalizer",
    "backward",
    "bucketize_age",
    "build_week_tensor",
    "conv2d_valid",
    "cross_entropy",
    "dense_affine",
    "downsized_config",
    "evaluate",
    "extract_user_features",
    "featurize_users",
    "fit_normalizer",
    "forward",
    "forward_batch",
    "generate",
    "grad_check",
    "ingest",
    "init_params",
    "leaky_relu",
    "load_labels",
    "load_model",
    "load_tensor_dataset",
    "make_archetypes",
    "predict_dataset",
    "predict_user",
    "save_model",
    "save_tensor_dataset",
    "sgd_step",
    "softmax",
    "svm_predict",
    "train",
    "train_linear_svm",
    "train_svm_head",
    "tv_distance",
    "week_of",
]
