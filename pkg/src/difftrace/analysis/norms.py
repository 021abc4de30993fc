"""Gradient-norm diagnostics across diffusion timesteps."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..diffusion.noise import noise_from_seed
from ..engine.loss import loss_and_grad
from ..errors import ArgumentError, ShapeError, UndefinedCorrelationError
from ..training.records import Checkpoint, TrainingRun
from ..training.trainer import replay_gradient

logger = logging.getLogger(__name__)

DEFAULT_PROBE_STRIDE = 10
PERMUTATION_RESAMPLES = 9999
EXACT_PERMUTATION_MAX_N = 20


@dataclass(frozen=True)
class NormPoint:
    sample_id: int
    t_train: int
    norm: float


@dataclass(frozen=True)
class NormProfile:
    """Loss-gradient norm of one sample over the probed timesteps at one checkpoint."""

    sample_id: int
    checkpoint_step: int
    timesteps: np.ndarray
    per_timestep_norms: np.ndarray
    t_max: int = field(init=False)

    def __post_init__(self):
        if self.timesteps.shape != self.per_timestep_norms.shape or self.timesteps.size == 0:
            raise ShapeError("timesteps and norms must be non-empty and of equal length")
        # np.argmax returns the first maximum; probes are ascending so ties go to the smaller t
        object.__setattr__(self, "t_max", int(self.timesteps[int(np.argmax(self.per_timestep_norms))]))


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    slope: float
    distances: np.ndarray
    norm_ranks: np.ndarray

    @property
    def n(self) -> int:
        return int(self.distances.size)


@dataclass(frozen=True)
class NormBin:
    t_low: int
    t_high: int
    mean_norm: float
    count: int


def _map(func: Callable[[int], object], items: Sequence[int], workers: int) -> list:
    if workers <= 1:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def probe_timesteps(T: int, probe_stride: int) -> np.ndarray:
    """``{1, 1 + stride, ...} U {T}`` in ascending order."""
    if probe_stride < 1:
        raise ArgumentError(f"probe_stride must be >= 1, got {probe_stride}")
    return np.unique(np.append(np.arange(1, T + 1, probe_stride), T))


def mid_training_checkpoint(run: TrainingRun) -> Checkpoint:
    """Governing checkpoint whose loss EMA is closest to halfway between the first and final one.

    Training progress is read off the loss rather than the step count: the toy runs lose
    most of their loss early, and the timestep-norm trend fades as the model converges.
    """
    first, final = run.checkpoints[0], run.checkpoints[-1]
    target = 0.5 * (first.loss_ema + final.loss_ema)
    candidates = run.checkpoints[:-1] or run.checkpoints
    return min(candidates, key=lambda c: (abs(c.loss_ema - target), c.step))


def norm_vs_timestep(
    run: TrainingRun, checkpoint: Checkpoint, sample_ids: Sequence[int], workers: int = 1
) -> list[NormPoint]:
    """Replayed training-gradient norm of each sample against its training timestep.

    Each sample contributes its logged record nearest to ``checkpoint.step``.

    Raises:
        MissingRecordsError: a sample never appears in the train log.
    """

    def point(sample_id: int) -> NormPoint:
        record = run.log.nearest_record(sample_id, checkpoint.step)
        grad = replay_gradient(record, checkpoint, run.dataset, run.spec, run.schedule)
        return NormPoint(sample_id=sample_id, t_train=record.timestep, norm=grad.norm)

    return _map(point, list(sample_ids), workers)


def find_t_max(
    run: TrainingRun, sample_id: int, checkpoint: Checkpoint, probe_stride: int = DEFAULT_PROBE_STRIDE
) -> NormProfile:
    """Scan ``||grad L_t||`` over probed timesteps using the sample's logged training noise."""
    probes = probe_timesteps(run.schedule.T, probe_stride)
    record = run.log.nearest_record(sample_id, checkpoint.step)
    eps = noise_from_seed(record.noise_seed, run.spec.input_dim)
    x0 = run.dataset[sample_id]
    params, spec, schedule = checkpoint.params, run.spec, run.schedule
    norms = np.array([loss_and_grad(params, spec, schedule, x0, int(t), eps)[1].norm for t in probes])
    return NormProfile(sample_id, checkpoint.step, probes, norms)


def norm_profiles(
    run: TrainingRun,
    sample_ids: Sequence[int],
    checkpoint: Checkpoint,
    probe_stride: int = DEFAULT_PROBE_STRIDE,
    workers: int = 1,
) -> list[NormProfile]:
    return _map(lambda i: find_t_max(run, i, checkpoint, probe_stride), list(sample_ids), workers)


def spearman(x: np.ndarray, y: np.ndarray, seed: int = 0) -> tuple[float, float]:
    """Spearman rho with a two-sided p-value.

    For ``n <= 20`` the p-value comes from a permutation test (exact when every
    pairing can be enumerated within 9999 resamples); otherwise from the
    t-distribution approximation.

    Raises:
        ShapeError: inputs of different length or fewer than 3 points.
        UndefinedCorrelationError: either input is constant.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"Need two 1-d inputs of equal length, got {x.shape} and {y.shape}")
    if x.size < 3:
        raise ShapeError(f"Spearman correlation needs at least 3 points, got {x.size}")
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        raise UndefinedCorrelationError("Spearman correlation is undefined for constant input")

    result = stats.spearmanr(x, y)
    rho = float(result.statistic)
    if x.size > EXACT_PERMUTATION_MAX_N:
        return rho, float(result.pvalue)

    def statistic(x_perm: np.ndarray) -> float:
        return stats.spearmanr(x_perm, y).statistic

    permuted = stats.permutation_test(
        (x,),
        statistic,
        permutation_type="pairings",
        n_resamples=PERMUTATION_RESAMPLES,
        alternative="two-sided",
        random_state=seed,
    )
    return rho, float(permuted.pvalue)


def norm_ranks(norms: np.ndarray) -> np.ndarray:
    """Rank 1 for the largest norm; ties share their average rank."""
    return stats.rankdata(-np.asarray(norms, dtype=np.float64), method="average")


def timestep_norm_correlation(
    run: TrainingRun,
    sample_ids: Sequence[int],
    checkpoint: Checkpoint,
    probe_stride: int = DEFAULT_PROBE_STRIDE,
    workers: int = 1,
) -> CorrelationResult:
    """Correlate each sample's distance ``|t_max - t_train|`` with the rank of its gradient norm.

    A positive correlation means samples trained far from their norm-maximizing timestep
    carry smaller training gradients.

    Raises:
        ArgumentError: fewer than 10 samples.
        UndefinedCorrelationError: distances or norms are constant.
    """
    if len(sample_ids) < 10:
        raise ArgumentError(f"Need at least 10 samples, got {len(sample_ids)}")
    points = norm_vs_timestep(run, checkpoint, sample_ids, workers)
    profiles = norm_profiles(run, sample_ids, checkpoint, probe_stride, workers)
    distances = np.array(
        [abs(p.t_max - q.t_train) for p, q in zip(profiles, points, strict=True)], dtype=float
    )
    ranks = norm_ranks(np.array([q.norm for q in points]))
    rho, p_value = spearman(distances, ranks)
    slope = float(stats.linregress(distances, ranks).slope)
    logger.info("Norm-rank correlation at step %d: rho=%.3f p=%.3g", checkpoint.step, rho, p_value)
    return CorrelationResult(rho, p_value, slope, distances, ranks)


def bin_norm_profile(points: Sequence[NormPoint], T: int, n_bins: int = 3) -> list[NormBin]:
    """Mean norm per equal-width training-timestep bin over [1, T]; empty bins report NaN."""
    if n_bins < 1:
        raise ArgumentError(f"n_bins must be >= 1, got {n_bins}")
    edges = np.linspace(1, T + 1, n_bins + 1)
    t_train = np.array([p.t_train for p in points])
    norms = np.array([p.norm for p in points])
    bins = []
    for low, high in zip(edges[:-1], edges[1:], strict=True):
        mask = (t_train >= low) & (t_train < high)
        mean = float(norms[mask].mean()) if mask.any() else float("nan")
        bins.append(NormBin(int(np.ceil(low)), int(np.ceil(high)) - 1, mean, int(mask.sum())))
    return bins


def norm_trend(points: Sequence[NormPoint]) -> float:
    """Least-squares slope of gradient norm against training timestep."""
    t_train = np.array([p.t_train for p in points], dtype=np.float64)
    if t_train.size < 2 or np.ptp(t_train) == 0.0:
        raise UndefinedCorrelationError("Norm trend needs at least two distinct training timesteps")
    return float(stats.linregress(t_train, [p.norm for p in points]).slope)
