"""Variance schedule and forward noising process."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict

from ..errors import ArgumentError, ShapeError, TimestepRangeError


@dataclass(frozen=True)
class NoiseSchedule:
    """Betas and cumulative alpha products; index ``t - 1`` holds timestep ``t``."""

    betas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def T(self) -> int:
        return int(self.betas.size)

    def check_timestep(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise TimestepRangeError(int(t), self.T)

    def alpha_bar(self, t: int) -> float:
        self.check_timestep(t)
        return float(self.alpha_bars[t - 1])

    def digest(self) -> bytes:
        """32-byte SHA-256 of the float64 betas; checkpoints carry it."""
        return hashlib.sha256(np.ascontiguousarray(self.betas, dtype="<f8").tobytes()).digest()


def make_schedule(T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Linear beta schedule, endpoints inclusive."""
    if T < 2:
        raise ArgumentError(f"T must be >= 2, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ArgumentError(
            f"Need 0 < beta_start <= beta_end < 1, got beta_start={beta_start}, beta_end={beta_end}"
        )
    betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    alpha_bars = np.cumprod(1.0 - betas)
    betas.setflags(write=False)
    alpha_bars.setflags(write=False)
    return NoiseSchedule(betas=betas, alpha_bars=alpha_bars)


class ScheduleConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def build(self) -> NoiseSchedule:
        return make_schedule(self.T, self.beta_start, self.beta_end)


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """``sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps``."""
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ShapeError(f"x0 shape {x0.shape} does not match noise shape {eps.shape}")
    alpha_bar = schedule.alpha_bar(t)
    return np.sqrt(alpha_bar) * x0 + np.sqrt(1.0 - alpha_bar) * eps
