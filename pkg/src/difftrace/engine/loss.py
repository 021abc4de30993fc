"""Simplified diffusion loss and its exact parameter gradient."""

from __future__ import annotations

from enum import StrEnum, auto

import numpy as np

from ..diffusion.schedule import NoiseSchedule, q_sample
from ..errors import NumericError, ShapeError
from .denoiser import DenoiserSpec, backward, forward_trace
from .params import GradientVector, ParameterVector, non_finite_segments


class LossMetric(StrEnum):
    L2 = auto()


def loss_and_grad(
    params: ParameterVector,
    spec: DenoiserSpec,
    schedule: NoiseSchedule,
    x0: np.ndarray,
    t: int,
    eps: np.ndarray,
    metric: LossMetric = LossMetric.L2,
    scale: float = 1.0,
) -> tuple[float, GradientVector]:
    """Loss ``scale * mean((eps_theta(x_t, t) - eps)^2)`` and its reverse-mode gradient.

    Args:
        params: Parameters the gradient is taken against.
        spec: Denoiser architecture matching ``params``.
        schedule: Noise schedule providing ``alpha_bar(t)``.
        x0: Clean sample.
        t: Timestep in [1, T].
        eps: Noise used to form ``x_t``.
        metric: Distance between predicted and true noise.
        scale: Constant multiplier on the loss.

    Returns:
        Tuple of scalar loss and GradientVector.

    Raises:
        TimestepRangeError: t outside [1, T].
        ShapeError: eps or x0 length differs from ``spec.input_dim``.
        NumericError: non-finite intermediate, naming the offending segment.
    """
    if metric is not LossMetric.L2:
        raise ValueError(f"Unsupported loss metric: '{metric}'")
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (spec.input_dim,):
        raise ShapeError(f"Expected noise of shape ({spec.input_dim},), got {eps.shape}")
    x_t = q_sample(x0, t, eps, schedule)
    trace = forward_trace(params, spec, x_t, t)
    residual = trace.output - eps
    loss = scale * float(np.mean(residual**2))
    grad_output = (2.0 * scale / spec.input_dim) * residual
    grad = backward(params, spec, trace, grad_output)
    bad = non_finite_segments(grad, params.layout)
    if bad:
        raise NumericError("Non-finite gradient", where=bad[0])
    return loss, GradientVector(grad)


def loss_hvp(
    params: ParameterVector,
    spec: DenoiserSpec,
    schedule: NoiseSchedule,
    x0: np.ndarray,
    t: int,
    eps: np.ndarray,
    vector: np.ndarray,
    step: float = 1e-4,
) -> np.ndarray:
    """Hessian-vector product by central difference of exact gradients."""
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        return np.zeros_like(vector, dtype=np.float64)
    h = step / norm
    plus = params.with_values(params.values + h * vector)
    minus = params.with_values(params.values - h * vector)
    _, g_plus = loss_and_grad(plus, spec, schedule, x0, t, eps)
    _, g_minus = loss_and_grad(minus, spec, schedule, x0, t, eps)
    return (g_plus.values - g_minus.values) / (2.0 * h)
