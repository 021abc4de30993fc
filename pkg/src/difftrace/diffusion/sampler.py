"""DDIM sampler used to generate test inputs from a trained denoiser."""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..engine.denoiser import DenoiserSpec, denoiser_forward
from ..engine.params import ParameterVector
from ..errors import ArgumentError, NumericError
from .schedule import NoiseSchedule


class SamplerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    inference_steps: int = Field(default=50, gt=0)
    eta: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0


def inference_timesteps(T: int, inference_steps: int) -> np.ndarray:
    """Strictly increasing timestep indices in [1, T], ending at T."""
    if inference_steps > T:
        raise ArgumentError(f"inference_steps={inference_steps} exceeds T={T}")
    if inference_steps == 1:
        return np.array([T])
    return np.round(np.linspace(1, T, inference_steps)).astype(np.int64)


def generate(
    params: ParameterVector, spec: DenoiserSpec, schedule: NoiseSchedule, cfg: SamplerConfig
) -> np.ndarray:
    """Run the DDIM reverse trajectory from seeded Gaussian noise.

    With ``eta == 0`` the trajectory is deterministic given ``cfg.seed``.

    Raises:
        NumericError: the state became non-finite; ``where`` names the failing step.
    """
    rng = np.random.default_rng(cfg.seed)
    timesteps = inference_timesteps(schedule.T, cfg.inference_steps)
    x = rng.standard_normal(spec.input_dim)
    for index in range(len(timesteps) - 1, -1, -1):
        t = int(timesteps[index])
        alpha_bar = schedule.alpha_bar(t)
        alpha_bar_prev = schedule.alpha_bar(int(timesteps[index - 1])) if index > 0 else 1.0
        eps_hat = denoiser_forward(params, spec, x, t)
        x0_hat = (x - np.sqrt(1.0 - alpha_bar) * eps_hat) / np.sqrt(alpha_bar)
        sigma = cfg.eta * np.sqrt((1.0 - alpha_bar_prev) / (1.0 - alpha_bar)) * np.sqrt(
            1.0 - alpha_bar / alpha_bar_prev
        )
        direction = np.sqrt(max(1.0 - alpha_bar_prev - sigma**2, 0.0)) * eps_hat
        x = np.sqrt(alpha_bar_prev) * x0_hat + direction
        if sigma > 0.0:
            x = x + sigma * rng.standard_normal(spec.input_dim)
        if not np.all(np.isfinite(x)):
            raise NumericError("Non-finite sampler state", where=f"step t={t}")
    return x
