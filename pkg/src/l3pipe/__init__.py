"""Local, linear, learned image processing pipelines.

A camera simulator produces aligned raw captures and ideal renderings,
a per-class ridge regression learns affine patch transforms, priors
regularize the transform table, and the renderer applies it to new raw
data.
"""

from .core import (
    AffineTransform,
    CfaPattern,
    ClassConfig,
    ClassId,
    ConfigurationError,
    InsufficientDataError,
    L3Error,
    MissingClassError,
    MissingDataError,
    SensorImage,
    SensorSpec,
    SpectralImage,
    TargetImage,
    TransformTable,
    decode_class,
    encode_class,
)
from .priors import PriorConfig, apply_priors
from .train import RidgeConfig, train_table

__version__ = "0.1.0"

__all__ = [
    "AffineTransform",
    "CfaPattern",
    "ClassConfig",
    "ClassId",
    "ConfigurationError",
    "InsufficientDataError",
    "L3Error",
    "MissingClassError",
    "MissingDataError",
    "PriorConfig",
    "RidgeConfig",
    "SensorImage",
    "SensorSpec",
    "SpectralImage",
    "TargetImage",
    "TransformTable",
    "apply_priors",
    "decode_class",
    "encode_class",
    "train_table",
]
