"""Score and metric tables as CSV artifacts, and reading score tables back."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..analysis.metrics import MetricTable
from ..attribution.config import AttributionMethod
from ..attribution.scores import InfluenceScore, ScoreTable, rank_ids
from ..constants import ArtifactName, ExportKey
from ..errors import IntegrityError
from .registry import ArtifactKind, ArtifactRegistry
from .utils import CsvTable

SCORE_COLUMNS = ("test_id", "train_id", "rank", "score")


def score_file_name(method: AttributionMethod | str) -> str:
    return f"scores_{AttributionMethod(method)}.csv"


def score_table_csv(table: ScoreTable) -> CsvTable:
    """One row per (test, train) pair in ranking order, with per-checkpoint terms."""
    header = [*SCORE_COLUMNS, *(f"checkpoint_{step}" for step in table.checkpoint_steps)]
    rows = []
    for row_index, test_id in enumerate(table.test_ids):
        ranking = table.ranking(test_id)
        for rank, train_id in enumerate(ranking, start=1):
            terms = table.per_checkpoint[row_index, train_id]
            rows.append([test_id, int(train_id), rank, float(terms.sum()), *(float(v) for v in terms)])
    return CsvTable(header, rows)


def register_score_table(registry: ArtifactRegistry, table: ScoreTable, top_k: int = 10) -> None:
    method = str(table.method)
    file_name = score_file_name(method)
    registry.register(f"scores_{method}", score_table_csv(table), ArtifactKind.CSV, file_name)
    k = min(top_k, table.n_train)
    registry.register(
        f"{method}",
        {
            ExportKey.METADATA: table.metadata,
            "file": file_name,
            "test_ids": table.test_ids,
            "checkpoint_steps": table.checkpoint_steps,
            ExportKey.RANKINGS: {str(t): table.top_k(t, k).tolist() for t in table.test_ids},
        },
    )


def read_score_table(report_dir: Path, method: AttributionMethod | str) -> ScoreTable:
    """Rebuild a ScoreTable from ``report.json`` plus its scores CSV.

    Raises:
        IntegrityError: the report does not hold ``method`` or the CSV is inconsistent.
    """
    report_dir = Path(report_dir)
    method = AttributionMethod(method)
    report = json.loads((report_dir / f"{ArtifactName.REPORT}.json").read_text())
    entry = report.get(str(method))
    if entry is None:
        available = [key for key in report if key in set(AttributionMethod)]
        raise IntegrityError(f"Report has no '{method}' scores. Available: {available}")

    table = CsvTable.from_text((report_dir / entry["file"]).read_text())
    test_ids = [int(t) for t in entry["test_ids"]]
    steps = [int(s) for s in entry["checkpoint_steps"]]
    rows = np.array(table.rows, dtype=np.float64)
    n_train = len(rows) // max(len(test_ids), 1)
    if len(rows) != n_train * len(test_ids) or rows.shape[1] != len(SCORE_COLUMNS) + len(steps):
        raise IntegrityError(f"Score file {entry['file']} does not match its report entry")

    per_checkpoint = np.zeros((len(test_ids), n_train, len(steps)))
    row_of = {test_id: i for i, test_id in enumerate(test_ids)}
    for row in rows:
        per_checkpoint[row_of[int(row[0])], int(row[1])] = row[len(SCORE_COLUMNS) :]
    return ScoreTable(method, test_ids, steps, per_checkpoint, entry[ExportKey.METADATA])


def metric_table_csv(table: MetricTable) -> CsvTable:
    return CsvTable(table.columns, [list(row) for row in table.rows])


def register_metric_table(registry: ArtifactRegistry, table: MetricTable) -> None:
    csv = metric_table_csv(table)
    registry.register(f"{table.metric}_table", csv, ArtifactKind.CSV, f"{table.metric}.csv")
    registry.register(
        table.metric, {"columns": list(table.columns), ExportKey.METADATA: table.metadata}
    )


def self_influence_file_name(method: AttributionMethod | str) -> str:
    return f"self_influence_{AttributionMethod(method)}.csv"


def register_self_influence(
    registry: ArtifactRegistry,
    method: AttributionMethod | str,
    scores: list[InfluenceScore],
    checkpoint_steps: list[int],
    metadata: dict,
    top_k: int = 10,
) -> None:
    method = AttributionMethod(method)
    values = np.array([s.score for s in scores])
    ranking = rank_ids(values)
    header = ["train_id", "rank", "score", *(f"checkpoint_{step}" for step in checkpoint_steps)]
    rows = [
        [int(i), rank, float(values[i]), *(float(v) for v in scores[i].per_checkpoint)]
        for rank, i in enumerate(ranking, start=1)
    ]
    file_name = self_influence_file_name(method)
    registry.register(f"self_influence_{method}", CsvTable(header, rows), ArtifactKind.CSV, file_name)
    registry.register(
        f"{method}",
        {
            ExportKey.METADATA: metadata,
            "file": file_name,
            "checkpoint_steps": checkpoint_steps,
            ExportKey.RANKINGS: ranking[: min(top_k, len(ranking))].tolist(),
        },
    )


def read_self_influence(report_dir: Path, method: AttributionMethod | str) -> np.ndarray:
    """Self-influence scores indexed by train id."""
    path = Path(report_dir) / self_influence_file_name(method)
    if not path.is_file():
        method = AttributionMethod(method)
        raise IntegrityError(f"No self-influence scores for '{method}' in {report_dir}")
    table = CsvTable.from_text(path.read_text())
    scores = np.zeros(len(table.rows))
    for row in table.rows:
        scores[int(row[0])] = float(row[2])
    return scores
