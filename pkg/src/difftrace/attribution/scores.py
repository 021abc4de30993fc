"""Influence score containers and the method registry."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from ..errors import ArgumentError
from .config import AttributionMethod
from .gradients import TrainSide


@dataclass(frozen=True)
class MethodRecipe:
    """How test and training gradients are combined for one attribution method."""

    train_side: TrainSide
    normalize_test: bool


# Registry mapping attribution methods to their gradient recipes
METHOD_REGISTRY: dict[AttributionMethod, MethodRecipe] = {
    AttributionMethod.TRACIN: MethodRecipe(TrainSide.RAW, normalize_test=False),
    AttributionMethod.RETRAC: MethodRecipe(TrainSide.UNIT, normalize_test=True),
    AttributionMethod.GUIDED: MethodRecipe(TrainSide.GUIDED, normalize_test=False),
}


def solve_method(method: AttributionMethod | str) -> MethodRecipe:
    """Look up the gradient recipe of a checkpoint-replay method.

    Raises:
        ArgumentError: unknown method, or one that is not a replay method.
    """
    recipe = METHOD_REGISTRY.get(method)
    if recipe is None:
        available = [str(m) for m in METHOD_REGISTRY]
        raise ArgumentError(f"Method '{method}' has no replay recipe. Available: {available}")
    return recipe


@dataclass(frozen=True)
class InfluenceScore:
    """Attribution of one training sample to one test sample."""

    train_id: int
    test_id: int
    score: float
    per_checkpoint: np.ndarray

    @classmethod
    def from_terms(cls, train_id: int, test_id: int, per_checkpoint: np.ndarray) -> InfluenceScore:
        terms = np.asarray(per_checkpoint, dtype=np.float64)
        return cls(train_id=train_id, test_id=test_id, score=float(np.sum(terms)), per_checkpoint=terms)


def rank_ids(scores: np.ndarray, train_ids: np.ndarray | None = None) -> np.ndarray:
    """Train ids ordered by score descending, ties by train id ascending."""
    scores = np.asarray(scores, dtype=np.float64)
    ids = np.arange(scores.size) if train_ids is None else np.asarray(train_ids)
    return ids[np.lexsort((ids, -scores))]


@dataclass
class ScoreTable:
    """Scores of every training sample for a set of tests, split per checkpoint.

    ``per_checkpoint`` has shape ``(n_tests, n_train, n_checkpoints)``.
    """

    method: AttributionMethod
    test_ids: list[int]
    checkpoint_steps: list[int]
    per_checkpoint: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.per_checkpoint = np.asarray(self.per_checkpoint, dtype=np.float64)
        expected = (len(self.test_ids), len(self.checkpoint_steps))
        shape = self.per_checkpoint.shape
        if self.per_checkpoint.ndim != 3 or (shape[0], shape[2]) != expected:
            raise ArgumentError(f"per_checkpoint shape {shape} does not match tests/checkpoints")

    @property
    def scores(self) -> np.ndarray:
        return self.per_checkpoint.sum(axis=2)

    @property
    def n_train(self) -> int:
        return int(self.per_checkpoint.shape[1])

    def row(self, test_id: int) -> int:
        return self.test_ids.index(test_id)

    def influence(self, test_id: int, train_id: int) -> InfluenceScore:
        terms = self.per_checkpoint[self.row(test_id), train_id]
        return InfluenceScore.from_terms(train_id, test_id, terms)

    def ranking(self, test_id: int) -> np.ndarray:
        return rank_ids(self.scores[self.row(test_id)])

    def top_k(self, test_id: int, k: int) -> np.ndarray:
        if not 1 <= k <= self.n_train:
            raise ArgumentError(f"k must lie in [1, {self.n_train}], got {k}")
        return self.ranking(test_id)[:k]

    def rankings(self) -> list[np.ndarray]:
        return [self.ranking(test_id) for test_id in self.test_ids]

    def select(self, test_ids: Sequence[int]) -> ScoreTable:
        rows = [self.row(t) for t in test_ids]
        return ScoreTable(
            method=self.method,
            test_ids=list(test_ids),
            checkpoint_steps=list(self.checkpoint_steps),
            per_checkpoint=self.per_checkpoint[rows],
            metadata=dict(self.metadata),
        )
