"""Wall-clock cost of attribution as the number of test timesteps grows."""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..training.records import TrainingRun
from .attributor import Attributor
from .config import AttributionConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimingRow:
    n_t: int
    seconds: float
    seconds_per_pair: float
    replay_seconds: float


def time_attribution(
    run: TrainingRun,
    tests: np.ndarray,
    cfg: AttributionConfig,
    n_t_values: Sequence[int],
    repeats: int = 1,
) -> list[TimingRow]:
    """Wall-clock cost of ``score_all`` for each ``n_t``; the fastest of ``repeats`` runs is kept.

    Training sides do not depend on ``n_t``: they are replayed once before timing and
    reported as ``replay_seconds``. ``n_t`` equal to ``T`` is the full timestep expectation.
    """
    tests = np.atleast_2d(tests)
    base = Attributor(run, cfg)
    start = time.perf_counter()
    base.prepare()
    replay_seconds = time.perf_counter() - start
    logger.info("Replayed training sides in %.3fs", replay_seconds)

    rows = []
    pairs = len(tests) * run.dataset.shape[0]
    for n_t in n_t_values:
        best = float("inf")
        for _ in range(max(repeats, 1)):
            attributor = base.with_timesteps(n_t)
            start = time.perf_counter()
            attributor.score_all(tests)
            best = min(best, time.perf_counter() - start)
        rows.append(TimingRow(int(n_t), best, best / pairs, replay_seconds))
        logger.info("n_t=%d: %.3fs", n_t, best)
    return rows
