"""Time-conditioned dense denoiser over a flat parameter vector.

The network maps ``(x_t, t)`` to a noise prediction of the same shape as ``x_t``.
A sinusoidal embedding of ``t`` is concatenated to the input, followed by dense
layers with a smooth activation and a linear output layer.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import StrEnum, auto

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import expit

from ..errors import NumericError, ShapeError, TimestepRangeError
from .params import ParameterVector, Segment, build_layout

EMBEDDING_MAX_PERIOD = 10_000.0


class Activation(StrEnum):
    SILU = auto()
    TANH = auto()


class DenoiserSpec(BaseModel):
    """Architecture of the dense denoiser."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    input_dim: int = Field(gt=0)
    hidden_dims: tuple[int, ...] = (96, 96)
    time_embed_dim: int = Field(default=16, gt=0)
    activation: Activation = Activation.SILU

    @field_validator("hidden_dims")
    @classmethod
    def _positive_widths(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if not value or any(width <= 0 for width in value):
            raise ValueError("hidden_dims must be a non-empty list of positive integers")
        return value

    @field_validator("time_embed_dim")
    @classmethod
    def _even_embedding(cls, value: int) -> int:
        if value % 2:
            raise ValueError("time_embed_dim must be even (sin/cos pairs)")
        return value

    @property
    def layer_widths(self) -> list[int]:
        return [self.input_dim + self.time_embed_dim, *self.hidden_dims, self.input_dim]

    def layout(self) -> tuple[Segment, ...]:
        widths = self.layer_widths
        named: list[tuple[str, tuple[int, ...]]] = []
        for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:], strict=True)):
            prefix = "output" if i == len(widths) - 2 else f"hidden{i}"
            named.append((f"{prefix}.weight", (fan_out, fan_in)))
            named.append((f"{prefix}.bias", (fan_out,)))
        return build_layout(named)

    @property
    def num_parameters(self) -> int:
        return self.layout()[-1].stop


def init_params(spec: DenoiserSpec, seed: int | Sequence[int]) -> ParameterVector:
    """Per-layer uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    rng = np.random.default_rng(seed)
    layout = spec.layout()
    values = np.empty(layout[-1].stop, dtype=np.float64)
    for segment in layout:
        fan_in = segment.shape[1] if len(segment.shape) == 2 else _bias_fan_in(layout, segment)
        bound = 1.0 / math.sqrt(fan_in)
        values[segment.offset : segment.stop] = rng.uniform(-bound, bound, size=segment.size)
    return ParameterVector(values=values, layout=layout)


def zero_params(spec: DenoiserSpec) -> ParameterVector:
    layout = spec.layout()
    return ParameterVector(values=np.zeros(layout[-1].stop), layout=layout)


def _bias_fan_in(layout: tuple[Segment, ...], bias: Segment) -> int:
    weight_name = bias.name.replace(".bias", ".weight")
    return next(s.shape[1] for s in layout if s.name == weight_name)


def time_embedding(t: int, dim: int) -> np.ndarray:
    half = dim // 2
    freqs = np.exp(-math.log(EMBEDDING_MAX_PERIOD) * np.arange(half, dtype=np.float64) / half)
    args = float(t) * freqs
    return np.concatenate([np.sin(args), np.cos(args)])


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.TANH:
        return np.tanh(z)
    return z * expit(z)


def _activation_slope(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.TANH:
        return 1.0 - np.tanh(z) ** 2
    s = expit(z)
    return s + z * s * (1.0 - s)


@dataclass
class ForwardTrace:
    """Intermediate values kept for the reverse pass."""

    inputs: list[np.ndarray]  # input of every dense layer
    pre_activations: list[np.ndarray]  # hidden layers only
    output: np.ndarray


def _layers(params: ParameterVector, spec: DenoiserSpec) -> list[tuple[str, np.ndarray, np.ndarray]]:
    n_layers = len(spec.hidden_dims) + 1
    prefixes = [f"hidden{i}" for i in range(n_layers - 1)] + ["output"]
    return [(p, params.segment(f"{p}.weight"), params.segment(f"{p}.bias")) for p in prefixes]


def _check_inputs(params: ParameterVector, spec: DenoiserSpec, x_t: np.ndarray, t: int) -> np.ndarray:
    x_t = np.asarray(x_t, dtype=np.float64)
    if x_t.shape != (spec.input_dim,):
        raise ShapeError(f"Expected input of shape ({spec.input_dim},), got {x_t.shape}")
    if params.size != spec.num_parameters:
        raise ShapeError(f"Spec needs {spec.num_parameters} parameters, vector has {params.size}")
    if t < 1:
        raise TimestepRangeError(int(t))
    if not np.all(np.isfinite(x_t)):
        raise NumericError("Non-finite denoiser input", where="x_t")
    return x_t


def forward_trace(params: ParameterVector, spec: DenoiserSpec, x_t: np.ndarray, t: int) -> ForwardTrace:
    x_t = _check_inputs(params, spec, x_t, t)
    h = np.concatenate([x_t, time_embedding(t, spec.time_embed_dim)])
    inputs: list[np.ndarray] = []
    pre_activations: list[np.ndarray] = []
    layers = _layers(params, spec)
    for name, weight, bias in layers[:-1]:
        inputs.append(h)
        z = weight @ h + bias
        if not np.all(np.isfinite(z)):
            raise NumericError("Non-finite activation", where=name)
        pre_activations.append(z)
        h = _activate(z, spec.activation)
    _, weight, bias = layers[-1]
    inputs.append(h)
    output = weight @ h + bias
    if not np.all(np.isfinite(output)):
        raise NumericError("Non-finite denoiser output", where="output")
    return ForwardTrace(inputs=inputs, pre_activations=pre_activations, output=output)


def denoiser_forward(
    params: ParameterVector, spec: DenoiserSpec, x_t: np.ndarray, t: int
) -> np.ndarray:
    """Predicted noise for ``x_t`` at timestep ``t``."""
    return forward_trace(params, spec, x_t, t).output


def backward(
    params: ParameterVector, spec: DenoiserSpec, trace: ForwardTrace, grad_output: np.ndarray
) -> np.ndarray:
    """Reverse pass: gradient of a scalar w.r.t. all parameters, given d(scalar)/d(output)."""
    grad = np.zeros(params.size, dtype=np.float64)
    offsets = {s.name: s for s in params.layout}
    layers = _layers(params, spec)
    delta = np.asarray(grad_output, dtype=np.float64)
    for index in range(len(layers) - 1, -1, -1):
        name, weight, _ = layers[index]
        w_seg, b_seg = offsets[f"{name}.weight"], offsets[f"{name}.bias"]
        grad[w_seg.offset : w_seg.stop] = np.outer(delta, trace.inputs[index]).ravel()
        grad[b_seg.offset : b_seg.stop] = delta
        if index > 0:
            delta = (weight.T @ delta) * _activation_slope(
                trace.pre_activations[index - 1], spec.activation
            )
    return grad
