"""Evaluation metrics over attribution scores."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..attribution.scores import ScoreTable, rank_ids
from ..errors import ArgumentError, InputError, ShapeError, UndefinedCorrelationError


@dataclass
class MetricTable:
    """Named rows of metric values, written as one CSV table."""

    metric: str
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ShapeError(f"Row {row} does not match columns {self.columns}")

    def column(self, name: str) -> list:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]

    def value(self, key, column: str):
        """Entry of ``column`` in the row whose first field equals ``key``."""
        index = self.columns.index(column)
        for row in self.rows:
            if row[0] == key:
                return row[index]
        raise KeyError(f"No row with {self.columns[0]}={key!r} in '{self.metric}'")


def _check_k(k_values: Sequence[int], n: int) -> list[int]:
    k_values = [int(k) for k in k_values]
    if not k_values:
        raise ArgumentError("k_values must not be empty")
    for k in k_values:
        if not 1 <= k <= n:
            raise ArgumentError(f"k={k} must lie in [1, {n}]")
    return k_values


def tracing_precision(
    table: ScoreTable,
    test_ids: Sequence[int],
    ground_truth: np.ndarray,
    k_values: Sequence[int],
) -> MetricTable:
    """Share of the top-k proponents that belong to the ground-truth group, averaged over tests.

    ``ground_truth`` is a boolean mask over training samples. The random baseline is the
    group fraction of the dataset.
    """
    mask = np.asarray(ground_truth, dtype=bool)
    if mask.shape != (table.n_train,):
        raise ShapeError(f"ground_truth must have shape ({table.n_train},), got {mask.shape}")
    if not test_ids:
        raise ArgumentError("test_ids must not be empty")
    k_values = _check_k(k_values, table.n_train)
    baseline = float(mask.mean())
    rankings = [table.ranking(test_id) for test_id in test_ids]
    rows = [(k, float(np.mean([mask[r[:k]].mean() for r in rankings])), baseline) for k in k_values]
    metadata = {"n_tests": len(test_ids), "baseline": baseline, **table.metadata}
    return MetricTable("tracing_precision", ("k", "precision", "baseline"), rows, metadata)


def uniqueness(top_k_lists: Sequence[Sequence[int]]) -> float:
    """``|union of all lists| / (n * k)``; lies in ``[1/n, 1]``.

    Raises:
        InputError: no lists, lists of different length, or duplicate ids within a list.
    """
    lists = [list(ids) for ids in top_k_lists]
    if not lists or not lists[0]:
        raise InputError("uniqueness needs at least one non-empty list")
    k = len(lists[0])
    for index, ids in enumerate(lists):
        if len(ids) != k:
            raise InputError(f"List {index} has {len(ids)} ids, expected {k}")
        if len(set(ids)) != k:
            raise InputError(f"List {index} contains duplicate ids")
    union = set().union(*lists)
    return len(union) / (len(lists) * k)


def uniqueness_table(table: ScoreTable, k_values: Sequence[int]) -> MetricTable:
    k_values = _check_k(k_values, table.n_train)
    rows = [(k, uniqueness([table.top_k(t, k).tolist() for t in table.test_ids])) for k in k_values]
    metadata = {"n_tests": len(table.test_ids), **table.metadata}
    return MetricTable("uniqueness", ("k", "uniqueness"), rows, metadata)


def outlier_detection(
    self_influences: np.ndarray, outlier_ids: Sequence[int], k_values: Sequence[int]
) -> MetricTable:
    """Outliers among the top-k self-influence ranks.

    ``precision`` is ``|top-k & outliers| / k`` and ``recall`` is
    ``|top-k & outliers| / |outliers|``.
    """
    scores = np.asarray(self_influences, dtype=np.float64)
    outliers = set(int(i) for i in outlier_ids)
    if not outliers:
        raise ArgumentError("outlier_ids must not be empty")
    if min(outliers) < 0 or max(outliers) >= scores.size:
        raise ArgumentError(f"outlier ids must lie in [0, {scores.size})")
    k_values = _check_k(k_values, scores.size)
    ranking = rank_ids(scores)
    rows = []
    for k in k_values:
        hits = len(outliers.intersection(ranking[:k].tolist()))
        rows.append((k, hits / k, hits / len(outliers)))
    metadata = {"n_train": int(scores.size), "n_outliers": len(outliers)}
    return MetricTable("outlier_detection", ("k", "precision", "recall"), rows, metadata)


def method_rank_correlation(scores_a: np.ndarray, scores_b: np.ndarray) -> float:
    """Spearman rho between two score vectors over the same training ids."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"Score vectors differ in shape: {a.shape} vs {b.shape}")
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise UndefinedCorrelationError("Rank correlation is undefined for a constant score vector")
    return float(stats.spearmanr(a, b).statistic)


def rank_correlation_table(table_a: ScoreTable, table_b: ScoreTable) -> MetricTable:
    """Per-test rank correlation between two score tables over the same tests."""
    if table_a.test_ids != table_b.test_ids:
        raise InputError("Score tables cover different tests")
    rows = [
        (test_id, method_rank_correlation(a, b))
        for test_id, a, b in zip(table_a.test_ids, table_a.scores, table_b.scores, strict=True)
    ]
    metadata = {
        "method_a": str(table_a.method),
        "method_b": str(table_b.method),
        "mean": float(np.mean([r[1] for r in rows])),
    }
    return MetricTable("rank_correlation", ("test_id", "rho"), rows, metadata)
