from .builders import build_melspec_cnn, build_mfcc_cnn
from .layers import (
    BatchNormSpec,
    Conv2DSpec,
    DenseSpec,
    DropoutSpec,
    FlattenSpec,
    MaxPool2DSpec,
    batchnorm,
    conv2d,
    cross_entropy,
    dense,
    dropout,
    maxpool2d,
    relu,
    softmax,
)
from .model import (
    ModelSpec,
    Network,
    count_params,
    infer_shapes,
    load_network,
    save_network,
    summarize,
)
from .training import History, TrainConfig, predict_proba, train

__all__ = [
    "BatchNormSpec",
    "Conv2DSpec",
    "DenseSpec",
    "DropoutSpec",
    "FlattenSpec",
    "History",
    "MaxPool2DSpec",
    "ModelSpec",
    "Network",
    "TrainConfig",
    "batchnorm",
    "build_melspec_cnn",
    "build_mfcc_cnn",
    "conv2d",
    "count_params",
    "cross_entropy",
    "dense",
    "dropout",
    "infer_shapes",
    "load_network",
    "maxpool2d",
    "predict_proba",
    "relu",
    "save_network",
    "softmax",
    "summarize",
    "train",
]
