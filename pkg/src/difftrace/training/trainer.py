"""Plain SGD trainer emitting checkpoints and an exact replay log."""

from __future__ import annotations

import logging
import math

import numpy as np
from tqdm import tqdm

from ..diffusion.noise import noise_from_seed
from ..diffusion.schedule import NoiseSchedule
from ..engine.denoiser import DenoiserSpec, init_params
from ..engine.loss import loss_and_grad
from ..engine.params import GradientVector, ParameterVector
from ..errors import ArgumentError, MissingCheckpointError, ShapeError, TrainingDivergenceError
from .records import Checkpoint, TrainConfig, TrainingRun, TrainLog, TrainRecord

logger = logging.getLogger(__name__)

NOISE_SEED_BOUND = 2**62


def quantize(params: ParameterVector) -> ParameterVector:
    """Round through float32, the precision of checkpoint files."""
    return params.with_values(params.values.astype(np.float32).astype(np.float64))


def steps_per_epoch(n_samples: int, batch_size: int) -> int:
    return math.ceil(n_samples / batch_size)


def train(
    dataset: np.ndarray, spec: DenoiserSpec, schedule: NoiseSchedule, cfg: TrainConfig
) -> tuple[list[Checkpoint], list[TrainRecord]]:
    """Train the denoiser with SGD on per-sample uniformly drawn timesteps and seeded noise.

    Step ``k`` computes the mean of its batch's per-sample gradients at ``theta_k`` and
    applies ``theta_{k+1} = theta_k - lr * mean``. Checkpoints hold ``theta_k`` for
    ``k = 0, checkpoint_every, 2 * checkpoint_every, ...`` plus the parameters after the
    final update. With ``cfg.quantize_checkpoints`` the live parameters are rounded to
    float32 when a checkpoint is taken, so the stored file replays exactly.

    Returns:
        Checkpoints in step order and one TrainRecord per consumed (sample, step).

    Raises:
        ArgumentError: empty dataset.
        ShapeError: sample dimension differs from ``spec.input_dim``.
        TrainingDivergenceError: the loss EMA became non-finite.
    """
    dataset = np.asarray(dataset, dtype=np.float64)
    if dataset.ndim != 2 or dataset.shape[0] == 0:
        raise ArgumentError(f"Dataset must be a non-empty 2-D array, got shape {dataset.shape}")
    if dataset.shape[1] != spec.input_dim:
        raise ShapeError(f"Samples have dimension {dataset.shape[1]}, spec expects {spec.input_dim}")

    n_samples = dataset.shape[0]
    params = init_params(spec, seed=[cfg.seed, 0])
    rng = np.random.default_rng([cfg.seed, 1])
    schedule_hash = schedule.digest()
    total_steps = cfg.epochs * steps_per_epoch(n_samples, cfg.batch_size)

    checkpoints: list[Checkpoint] = []
    records: list[TrainRecord] = []
    loss_ema: float | None = None
    logger.info(
        "Training %d parameters on %d samples for %d steps", params.size, n_samples, total_steps
    )

    step = 0
    with tqdm(total=total_steps, desc="Training", disable=not cfg.progress) as pbar:
        for _ in range(cfg.epochs):
            order = rng.permutation(n_samples)
            for start in range(0, n_samples, cfg.batch_size):
                take_checkpoint = step % cfg.checkpoint_every == 0
                if take_checkpoint and cfg.quantize_checkpoints:
                    params = quantize(params)

                losses = []
                grads: list[GradientVector] = []
                for sample_id in order[start : start + cfg.batch_size]:
                    record = TrainRecord(
                        step=step,
                        sample_id=int(sample_id),
                        timestep=int(rng.integers(1, schedule.T + 1)),
                        noise_seed=int(rng.integers(0, NOISE_SEED_BOUND)),
                        lr=cfg.lr,
                    )
                    eps = noise_from_seed(record.noise_seed, spec.input_dim)
                    loss, grad = loss_and_grad(
                        params, spec, schedule, dataset[record.sample_id], record.timestep, eps
                    )
                    records.append(record)
                    losses.append(loss)
                    grads.append(grad)

                batch_loss = float(np.mean(losses))
                loss_ema = (
                    batch_loss
                    if loss_ema is None
                    else cfg.ema_decay * loss_ema + (1.0 - cfg.ema_decay) * batch_loss
                )
                if not math.isfinite(loss_ema):
                    raise TrainingDivergenceError(step, loss_ema)
                if take_checkpoint:
                    checkpoints.append(Checkpoint(step, params.copy(), loss_ema, schedule_hash))
                    logger.debug("Checkpoint at step %d, loss_ema=%.6f", step, loss_ema)

                update = np.mean(np.stack([g.values for g in grads]), axis=0)
                params = params.with_values(params.values - cfg.lr * update)
                params.check_finite()
                step += 1
                pbar.update(1)
                pbar.set_postfix(loss_ema=f"{loss_ema:.4f}", refresh=False)

    if cfg.quantize_checkpoints:
        params = quantize(params)
    if checkpoints[-1].step != step:
        checkpoints.append(Checkpoint(step, params.copy(), float(loss_ema), schedule_hash))
    logger.info("Finished training: %d checkpoints, final loss_ema=%.6f", len(checkpoints), loss_ema)
    return checkpoints, records


def replay_gradient(
    record: TrainRecord,
    checkpoint: Checkpoint | None,
    dataset: np.ndarray,
    spec: DenoiserSpec,
    schedule: NoiseSchedule,
    timestep: int | None = None,
) -> GradientVector:
    """Training-side gradient of ``record`` evaluated at ``checkpoint``'s parameters.

    The noise is regenerated from the logged seed. ``timestep`` replaces the logged
    training timestep while keeping the same noise seed.

    Raises:
        MissingCheckpointError: no checkpoint was supplied.
        IntegrityError: the checkpoint was trained under a different schedule.
    """
    if checkpoint is None:
        raise MissingCheckpointError(f"No checkpoint available for record at step {record.step}")
    checkpoint.check_schedule(schedule)
    eps = noise_from_seed(record.noise_seed, spec.input_dim)
    t = record.timestep if timestep is None else timestep
    _, grad = loss_and_grad(checkpoint.params, spec, schedule, dataset[record.sample_id], t, eps)
    return grad


def replay_record(run: TrainingRun, record: TrainRecord, timestep: int | None = None) -> GradientVector:
    """Replay ``record`` at its governing checkpoint in ``run``."""
    checkpoint = run.governing_checkpoint(record.step)
    return replay_gradient(record, checkpoint, run.dataset, run.spec, run.schedule, timestep)


def train_run(
    dataset: np.ndarray, spec: DenoiserSpec, schedule: NoiseSchedule, cfg: TrainConfig
) -> TrainingRun:
    checkpoints, records = train(dataset, spec, schedule, cfg)
    return TrainingRun(dataset, spec, schedule, checkpoints, TrainLog(records))
