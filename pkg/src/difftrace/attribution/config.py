"""Attribution settings and checkpoint selection."""

from __future__ import annotations

from enum import StrEnum, auto

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..errors import ArgumentError
from ..training.records import Checkpoint, TrainingRun


class AttributionMethod(StrEnum):
    TRACIN = auto()
    RETRAC = auto()
    GUIDED = auto()
    INFLUENCE_FUNCTION = auto()


class LissaConfig(BaseModel):
    """Inverse-Hessian-vector product settings for the influence-function baseline."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    depth: int = Field(default=100, ge=1)
    damping: float = Field(default=0.01, ge=0.0)
    scale: float = Field(default=50.0, gt=0.0)
    repeats: int = Field(default=2, ge=1)
    hessian_batch: int = Field(default=16, ge=1)
    hvp_step: float = Field(default=1e-4, gt=0.0)
    seed: int = 0


class AttributionConfig(BaseModel):
    """Which checkpoints, timesteps and noises enter an attribution score.

    ``checkpoints`` lists checkpoint steps; when empty, ``num_checkpoints`` are chosen
    evenly after the first ``skip_fraction`` of training. ``timesteps`` overrides the
    ``n_t`` evenly spaced test timesteps.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    checkpoints: tuple[int, ...] = ()
    num_checkpoints: int = Field(default=5, ge=1)
    skip_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    n_t: int = Field(default=50, ge=1)
    m: int = Field(default=16, ge=1)
    noise_seed: int = 0
    method: AttributionMethod = AttributionMethod.TRACIN
    timesteps: tuple[int, ...] | None = None
    norm_floor: float = Field(default=1e-12, gt=0.0)
    guided_lambda: float = Field(default=0.5, gt=0.0, le=1.0)
    guided_timestep: int | None = None
    guided_probe_stride: int = Field(default=50, ge=1)
    guided_probe_samples: int = Field(default=64, ge=1)
    lissa: LissaConfig = LissaConfig()
    workers: int = Field(default=1, ge=1)
    progress: bool = False

    @field_validator("checkpoints")
    @classmethod
    def _sorted_distinct(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(b <= a for a, b in zip(value, value[1:], strict=False)):
            raise ValueError("checkpoints must be sorted by step and distinct")
        return value

    @field_validator("timesteps")
    @classmethod
    def _non_empty(cls, value: tuple[int, ...] | None) -> tuple[int, ...] | None:
        if value is not None and not value:
            raise ValueError("timesteps override must not be empty")
        return value


def expectation_timesteps(T: int, n_t: int) -> np.ndarray:
    """``n_t`` evenly spaced timesteps spanning [1, T]; a single timestep sits mid-trajectory."""
    if not 1 <= n_t <= T:
        raise ArgumentError(f"n_t must lie in [1, {T}], got {n_t}")
    if n_t == 1:
        return np.array([int(round((1 + T) / 2))])
    return np.round(np.linspace(1, T, n_t)).astype(np.int64)


def resolve_timesteps(cfg: AttributionConfig, T: int) -> np.ndarray:
    if cfg.timesteps is None:
        return expectation_timesteps(T, cfg.n_t)
    timesteps = np.asarray(cfg.timesteps, dtype=np.int64)
    if timesteps.min() < 1 or timesteps.max() > T:
        raise ArgumentError(f"timesteps override must lie in [1, {T}]")
    return timesteps


def select_checkpoints(run: TrainingRun, count: int, skip_fraction: float = 0.1) -> list[Checkpoint]:
    """Evenly spaced checkpoints after the first ``skip_fraction`` of training.

    The final snapshot governs no training step and is never selected.
    """
    final_step = run.checkpoints[-1].step
    governing = [c for c in run.checkpoints if c.step < final_step]
    candidates = [c for c in governing if c.step >= skip_fraction * final_step] or governing
    if not candidates:
        raise ArgumentError("Run has no checkpoint that governs a training step")
    if count >= len(candidates):
        return candidates
    indices = np.unique(np.round(np.linspace(0, len(candidates) - 1, count)).astype(int))
    return [candidates[i] for i in indices]


def resolve_checkpoints(run: TrainingRun, cfg: AttributionConfig) -> list[Checkpoint]:
    if cfg.checkpoints:
        return run.resolve(cfg.checkpoints)
    return select_checkpoints(run, cfg.num_checkpoints, cfg.skip_fraction)
