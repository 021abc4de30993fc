"""Timestep manipulation: retrain-free check of how much the training timestep drives influence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..attribution.attributor import Attributor
from ..attribution.config import AttributionMethod
from ..attribution.scores import solve_method
from ..errors import ArgumentError, EmptySelectionError
from .norms import DEFAULT_PROBE_STRIDE, find_t_max

logger = logging.getLogger(__name__)

RANK_CONVENTION = "rank 1 = largest |score|; shift = old rank - new rank (positive = more influential)"


@dataclass(frozen=True)
class ManipulationResult:
    test_id: int
    method: AttributionMethod
    sample_ids: np.ndarray
    shifts: np.ndarray
    p_value: float
    metadata: dict = field(default_factory=dict)

    @property
    def mean_shift(self) -> float:
        return float(self.shifts.mean())


def magnitude_ranks(scores: np.ndarray) -> np.ndarray:
    """``1 + #{j : |s_j| > |s_i|}`` for every sample."""
    magnitudes = np.abs(np.asarray(scores, dtype=np.float64))
    ordered = np.sort(magnitudes)
    return 1 + magnitudes.size - np.searchsorted(ordered, magnitudes, side="right")


def rank_after_change(scores: np.ndarray, sample_id: int, new_score: float) -> int:
    """Rank of ``sample_id`` once its score is replaced; every other score is kept."""
    magnitudes = np.abs(np.asarray(scores, dtype=np.float64))
    others = np.delete(magnitudes, sample_id)
    return 1 + int(np.count_nonzero(others > abs(new_score)))


def uninfluential_samples(scores: np.ndarray, band: float) -> np.ndarray:
    """Samples whose |score| percentile (share of strictly smaller magnitudes) is below ``band``."""
    if not 0.0 <= band <= 1.0:
        raise ArgumentError(f"band must lie in [0, 1], got {band}")
    magnitudes = np.abs(np.asarray(scores, dtype=np.float64))
    ordered = np.sort(magnitudes)
    percentile = np.searchsorted(ordered, magnitudes, side="left") / magnitudes.size
    return np.flatnonzero(percentile < band)


def sign_test(shifts: np.ndarray) -> float:
    """One-sided sign test that positive shifts dominate; zeros are dropped."""
    positive = int(np.count_nonzero(shifts > 0))
    nonzero = int(np.count_nonzero(shifts))
    if nonzero == 0:
        return 1.0
    return float(stats.binomtest(positive, nonzero, 0.5, alternative="greater").pvalue)


def timestep_manipulation(
    attributor: Attributor,
    z_test: np.ndarray,
    test_id: int = 0,
    band: float = 0.1,
    method: AttributionMethod | str | None = None,
    probe_stride: int = DEFAULT_PROBE_STRIDE,
) -> ManipulationResult:
    """Re-score uninfluential samples with their training timestep moved to ``t_max``.

    For each selected sample and checkpoint, every governed record is replayed at the
    sample's ``t_max`` for that checkpoint with its logged noise seed. The sample's rank
    of ``|score|`` is then recomputed against the unchanged scores of all other samples.

    Raises:
        EmptySelectionError: no sample falls below ``band``.
    """
    method = AttributionMethod(method or attributor.cfg.method)
    recipe = solve_method(method)
    run = attributor.run
    table = attributor.score_all(np.atleast_2d(z_test), [test_id], method)
    scores = table.scores[0]
    selected = uninfluential_samples(scores, band)
    if selected.size == 0:
        raise EmptySelectionError(f"No sample has |score| percentile below band={band}")

    old_ranks = magnitude_ranks(scores)
    test_vectors = [
        attributor.test_gradient(z_test, checkpoint, recipe.normalize_test).vector
        for checkpoint in attributor.checkpoints
    ]
    shifts = np.zeros(selected.size, dtype=np.int64)
    t_max_by_sample: dict[int, list[int]] = {}
    for index, sample_id in enumerate(selected.tolist()):
        new_score = 0.0
        t_maxes = []
        for checkpoint, test_vector in zip(attributor.checkpoints, test_vectors, strict=True):
            t_max = find_t_max(run, sample_id, checkpoint, probe_stride).t_max
            t_maxes.append(t_max)
            train_vector = attributor.training_side(sample_id, checkpoint, recipe.train_side, t_max)
            new_score += test_vector.dot(train_vector)
        t_max_by_sample[sample_id] = t_maxes
        shifts[index] = int(old_ranks[sample_id]) - rank_after_change(scores, sample_id, new_score)

    p_value = sign_test(shifts)
    logger.info(
        "Timestep manipulation (%s): %d samples, mean shift %.2f, p=%.3g",
        method,
        selected.size,
        shifts.mean(),
        p_value,
    )
    metadata = {
        "convention": RANK_CONVENTION,
        "band": band,
        "probe_stride": probe_stride,
        "t_max": {str(k): v for k, v in t_max_by_sample.items()},
        **table.metadata,
    }
    return ManipulationResult(test_id, method, selected, shifts, p_value, metadata)
