"""Denoiser network, flat parameters and exact per-sample gradients."""

from .denoiser import (
    Activation,
    DenoiserSpec,
    denoiser_forward,
    init_params,
    time_embedding,
    zero_params,
)
from .loss import LossMetric, loss_and_grad, loss_hvp
from .params import GradientVector, ParameterVector, Segment, build_layout

__all__ = [
    "Activation",
    "DenoiserSpec",
    "GradientVector",
    "LossMetric",
    "ParameterVector",
    "Segment",
    "build_layout",
    "denoiser_forward",
    "init_params",
    "loss_and_grad",
    "loss_hvp",
    "time_embedding",
    "zero_params",
]
