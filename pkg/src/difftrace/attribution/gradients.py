"""Test-side expectations and training-side replay sums that enter influence scores."""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum, auto

import numpy as np

from ..diffusion.noise import monte_carlo_noise
from ..diffusion.schedule import NoiseSchedule
from ..engine.denoiser import DenoiserSpec
from ..engine.loss import loss_and_grad
from ..engine.params import GradientVector
from ..errors import ArgumentError, DegenerateGradientError
from ..training.records import Checkpoint, TrainingRun, TrainRecord
from ..training.trainer import replay_gradient
from .config import AttributionConfig, resolve_timesteps

logger = logging.getLogger(__name__)

TrainHook = Callable[[TrainRecord, GradientVector], GradientVector]


class TrainSide(StrEnum):
    """How each replayed training gradient enters the checkpoint sum."""

    RAW = auto()
    UNIT = auto()
    GUIDED = auto()


@dataclass(frozen=True)
class TestGradient:
    """Mean of the test-sample loss gradients over timesteps and Monte Carlo noises."""

    __test__ = False

    checkpoint_step: int
    vector: GradientVector
    normalized: bool


def test_gradient(
    z_test: np.ndarray,
    checkpoint: Checkpoint,
    cfg: AttributionConfig,
    normalize: bool,
    *,
    spec: DenoiserSpec,
    schedule: NoiseSchedule,
) -> TestGradient:
    """Average ``grad L_t(theta_k, eps_i, z_test)`` over the timestep set and ``m`` noises.

    Noise ``eps_i`` at timestep ``t`` is seeded by ``(cfg.noise_seed, t, i)``. With
    ``normalize`` every contributing gradient is unit-normalized before averaging.

    Raises:
        DegenerateGradientError: a contributing norm is below ``cfg.norm_floor`` under
            ``normalize``; the message identifies ``(t, i)``.
    """
    timesteps = resolve_timesteps(cfg, schedule.T)
    total = np.zeros(checkpoint.params.size, dtype=np.float64)
    for t in timesteps:
        for i in range(cfg.m):
            eps = monte_carlo_noise(cfg.noise_seed, int(t), i, spec.input_dim)
            _, grad = loss_and_grad(checkpoint.params, spec, schedule, z_test, int(t), eps)
            if normalize:
                if grad.norm < cfg.norm_floor:
                    raise DegenerateGradientError(
                        f"Test gradient norm {grad.norm:.3e} below floor", where=f"t={t}, i={i}"
                    )
                total += grad.values / grad.norm
            else:
                total += grad.values
    mean = GradientVector(total / (len(timesteps) * cfg.m))
    return TestGradient(checkpoint_step=checkpoint.step, vector=mean, normalized=normalize)


def guided_normalize(norms_at_fixed_t: np.ndarray, lam: float) -> np.ndarray:
    """Per-sample factors mapping norms linearly onto ``[lam * max, max]``.

    The largest norm keeps factor 1, the smallest is scaled to ``lam * max`` and the
    rest interpolate linearly in norm. ``factor * norm`` is the effective norm.

    Raises:
        ArgumentError: a non-positive norm or ``lam`` outside (0, 1].
    """
    norms = np.asarray(norms_at_fixed_t, dtype=np.float64)
    if norms.size == 0 or np.any(norms <= 0.0) or not np.all(np.isfinite(norms)):
        raise ArgumentError("Guided normalization needs positive finite norms")
    if not 0.0 < lam <= 1.0:
        raise ArgumentError(f"lambda must lie in (0, 1], got {lam}")
    high, low = float(norms.max()), float(norms.min())
    if high == low:
        logger.warning("All norms equal at the fixed timestep; guided factors are all 1")
        return np.ones_like(norms)
    effective = lam * high + (norms - low) / (high - low) * (1.0 - lam) * high
    return effective / norms


def training_side(
    run: TrainingRun,
    sample_id: int,
    checkpoint: Checkpoint,
    mode: TrainSide,
    *,
    norm_floor: float = 1e-12,
    effective_norm: float | None = None,
    timestep: int | None = None,
    stop: int | None = None,
    hook: TrainHook | None = None,
) -> np.ndarray:
    """Learning-rate weighted sum of replayed gradients for records in ``[checkpoint.step, stop)``.

    ``stop`` defaults to the next saved checkpoint. ``timestep`` replaces every record's
    training timestep (same noise seed).

    Raises:
        MissingRecordsError: ``sample_id`` never appears in the train log.
        DegenerateGradientError: a replayed norm is below ``norm_floor`` in UNIT/GUIDED mode.
    """
    run.log.records_for(sample_id)
    total = np.zeros(checkpoint.params.size, dtype=np.float64)
    for record in run.governed_records(sample_id, checkpoint, stop):
        grad = replay_gradient(record, checkpoint, run.dataset, run.spec, run.schedule, timestep)
        if hook is not None:
            grad = hook(record, grad)
        if mode is TrainSide.RAW:
            total += record.lr * grad.values
            continue
        if grad.norm < norm_floor:
            raise DegenerateGradientError(
                f"Training gradient norm {grad.norm:.3e} below floor",
                where=f"sample {sample_id}, step {record.step}",
            )
        weight = 1.0 if mode is TrainSide.UNIT else _require(effective_norm)
        total += record.lr * weight * (grad.values / grad.norm)
    return total


def _require(effective_norm: float | None) -> float:
    if effective_norm is None:
        raise ArgumentError("Guided training side needs an effective norm")
    return effective_norm
