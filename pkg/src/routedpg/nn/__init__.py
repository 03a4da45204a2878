from .backbones import KINDS, Backbone, build_actor, build_critic
from .layers import (
    BatchNorm2d,
    Conv2d,
    Dense,
    Dropout,
    Lstm,
    MaxPool2d,
    TemporalAttention,
    batchnorm2d,
    conv2d,
    dropout,
    glorot_uniform,
    maxpool2d,
)

__all__ = [
    "KINDS",
    "Backbone",
    "BatchNorm2d",
    "Conv2d",
    "Dense",
    "Dropout",
    "Lstm",
    "MaxPool2d",
    "TemporalAttention",
    "batchnorm2d",
    "build_actor",
    "build_critic",
    "conv2d",
    "dropout",
    "glorot_uniform",
    "maxpool2d",
]
