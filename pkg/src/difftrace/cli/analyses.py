"""Analyses reachable from ``difftrace analyze``, looked up by name."""

from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path
from typing import TYPE_CHECKING, Any

import numpy as np

from ..analysis.manipulation import timestep_manipulation
from ..analysis.metrics import (
    MetricTable,
    outlier_detection,
    rank_correlation_table,
    tracing_precision,
    uniqueness,
)
from ..analysis.norms import (
    bin_norm_profile,
    mid_training_checkpoint,
    norm_profiles,
    norm_trend,
    norm_vs_timestep,
    timestep_norm_correlation,
)
from ..attribution.attributor import Attributor
from ..attribution.config import AttributionMethod
from ..attribution.timing import time_attribution
from ..constants import ArtifactName
from ..errors import ArgumentError, InputError
from ..export.registry import ArtifactKind
from ..export.reports import read_score_table, read_self_influence, register_metric_table
from ..export.utils import CsvTable
from ..training.records import Checkpoint

if TYPE_CHECKING:
    from .commands import AnalyzeCommand

Analysis = Callable[["AnalyzeCommand"], Any]


def solve_analysis(name: str) -> Analysis:
    """Look up an analysis by name.

    Raises:
        ArgumentError: unknown analysis name.
    """
    analysis = ANALYSIS_REGISTRY.get(name)
    if analysis is None:
        available = list(ANALYSIS_REGISTRY.keys())
        raise ArgumentError(f"Unknown analysis: '{name}'. Available: {available}")
    return analysis


# Shared lookups


def _checkpoint(command: AnalyzeCommand) -> Checkpoint:
    """Configured checkpoint, else the mid-training one by loss progress."""
    run = command.training_run
    if command.config.checkpoint is not None:
        return run.checkpoint(command.config.checkpoint)
    return mid_training_checkpoint(run)


def _sample_ids(command: AnalyzeCommand) -> list[int]:
    if command.config.sample_ids is not None:
        return list(command.config.sample_ids)
    return command.training_run.log.sample_ids


def _report_methods(command: AnalyzeCommand, report_dir: Path) -> list[AttributionMethod]:
    if command.config.methods:
        return list(command.config.methods)
    report = json.loads((report_dir / f"{ArtifactName.REPORT}.json").read_text())
    present = [m for m in AttributionMethod if str(m) in report]
    if not present:
        raise InputError(f"Report {report_dir} holds no attribution scores")
    return present


def _register_points(command: AnalyzeCommand, key: str, header: tuple[str, ...], rows: list) -> None:
    command.artifacts.register(key, CsvTable(header, rows), ArtifactKind.CSV, f"{key}.csv")


# Norm diagnostics


def analyze_norm_vs_timestep(command: AnalyzeCommand) -> MetricTable:
    run, checkpoint = command.training_run, _checkpoint(command)
    points = norm_vs_timestep(run, checkpoint, _sample_ids(command), command.config.workers)
    rows = [(p.sample_id, p.t_train, p.norm) for p in points]
    _register_points(command, "norm_points", ("sample_id", "t_train", "norm"), rows)
    bins = bin_norm_profile(points, run.schedule.T, command.config.n_bins)
    table = MetricTable(
        "norm_bins",
        ("t_low", "t_high", "mean_norm", "count"),
        [(b.t_low, b.t_high, b.mean_norm, b.count) for b in bins],
        {"checkpoint": checkpoint.step, "trend_slope": norm_trend(points)},
    )
    register_metric_table(command.artifacts, table)
    return table


def analyze_t_max(command: AnalyzeCommand) -> MetricTable:
    run, checkpoint = command.training_run, _checkpoint(command)
    profiles = norm_profiles(
        run, _sample_ids(command), checkpoint, command.config.probe_stride, command.config.workers
    )
    rows = [
        (p.sample_id, int(t), float(norm))
        for p in profiles
        for t, norm in zip(p.timesteps, p.per_timestep_norms, strict=True)
    ]
    _register_points(command, "norm_profiles", ("sample_id", "t", "norm"), rows)
    table = MetricTable(
        "t_max",
        ("sample_id", "t_max"),
        [(p.sample_id, p.t_max) for p in profiles],
        {"checkpoint": checkpoint.step, "probe_stride": command.config.probe_stride},
    )
    register_metric_table(command.artifacts, table)
    return table


def analyze_correlation(command: AnalyzeCommand) -> MetricTable:
    checkpoint = _checkpoint(command)
    sample_ids = _sample_ids(command)
    cfg = command.config
    result = timestep_norm_correlation(
        command.training_run, sample_ids, checkpoint, cfg.probe_stride, cfg.workers
    )
    _register_points(
        command,
        "correlation_points",
        ("sample_id", "distance", "norm_rank"),
        list(zip(sample_ids, result.distances.tolist(), result.norm_ranks.tolist())),
    )
    table = MetricTable(
        "correlation",
        ("rho", "p", "slope"),
        [(result.rho, result.p_value, result.slope)],
        {"checkpoint": checkpoint.step, "n": result.n, "probe_stride": command.config.probe_stride},
    )
    register_metric_table(command.artifacts, table)
    return table


def analyze_manipulation(command: AnalyzeCommand) -> MetricTable:
    cfg = command.config
    tests, test_ids, _ = command.load_tests(cfg.tests)
    if cfg.test_id not in test_ids:
        raise ArgumentError(f"test_id {cfg.test_id} is not among the selected tests {test_ids}")
    z_test = tests[test_ids.index(cfg.test_id)]
    attributor = Attributor(command.training_run, cfg.attribution)
    methods = list(cfg.methods) or [AttributionMethod.TRACIN, AttributionMethod.RETRAC]
    summary = []
    for method in methods:
        result = timestep_manipulation(
            attributor, z_test, cfg.test_id, cfg.band, method, cfg.probe_stride
        )
        rows = list(zip(result.sample_ids.tolist(), result.shifts.tolist()))
        detail = MetricTable(f"manipulation_{method}", ("sample_id", "shift"), rows, result.metadata)
        register_metric_table(command.artifacts, detail)
        summary.append((str(method), result.mean_shift, result.p_value, int(result.shifts.size)))
    table = MetricTable(
        "manipulation",
        ("method", "mean_shift", "p_value", "n"),
        summary,
        {"test_id": cfg.test_id, "band": cfg.band},
    )
    register_metric_table(command.artifacts, table)
    return table


# Report metrics


def analyze_precision(command: AnalyzeCommand) -> list[MetricTable]:
    report_dir = command.report_dirs(1)[0]
    report = json.loads((report_dir / f"{ArtifactName.REPORT}.json").read_text())
    groups = report.get("tests", {}).get("groups")
    if groups is None:
        raise InputError("Tracing precision needs a report on labelled dataset tests")
    dataset = command.dataset
    tables = []
    for method in _report_methods(command, report_dir):
        scores = read_score_table(report_dir, method)
        for group in sorted(set(groups)):
            test_ids = [t for t, g in zip(scores.test_ids, groups, strict=True) if g == group]
            mask = dataset.group_mask(group)
            table = tracing_precision(scores, test_ids, mask, command.config.k_values)
            table.metric = f"precision_{method}_{group}"
            register_metric_table(command.artifacts, table)
            tables.append(table)
    return tables


def analyze_uniqueness(command: AnalyzeCommand) -> list[MetricTable]:
    report_dirs = command.report_dirs(1)
    tables = []
    for method in _report_methods(command, report_dirs[0]):
        score_tables = [read_score_table(path, method) for path in report_dirs]
        rows = []
        for k in command.config.k_values:
            lists = [t.top_k(test_id, k).tolist() for t in score_tables for test_id in t.test_ids]
            rows.append((k, uniqueness(lists)))
        n_lists = sum(len(t.test_ids) for t in score_tables)
        table = MetricTable(f"uniqueness_{method}", ("k", "uniqueness"), rows, {"n_lists": n_lists})
        register_metric_table(command.artifacts, table)
        tables.append(table)
    return tables


def analyze_outlier(command: AnalyzeCommand) -> list[MetricTable]:
    report_dir = command.report_dirs(1)[0]
    outliers = command.dataset.minority_ids
    tables = []
    for method in _report_methods(command, report_dir):
        scores = read_self_influence(report_dir, method)
        table = outlier_detection(scores, outliers, command.config.k_values)
        table.metric = f"outlier_{method}"
        register_metric_table(command.artifacts, table)
        tables.append(table)
    return tables


def analyze_rank_correlation(command: AnalyzeCommand) -> MetricTable:
    """Two reports compare the same method; one report compares two of its methods."""
    report_dirs = command.report_dirs(1)
    methods = _report_methods(command, report_dirs[0])
    if len(report_dirs) >= 2:
        pair = (report_dirs[0], methods[0]), (report_dirs[1], methods[-1])
    elif len(methods) >= 2:
        pair = (report_dirs[0], methods[0]), (report_dirs[0], methods[1])
    else:
        raise InputError("Rank correlation needs two reports or one report with two methods")
    table = rank_correlation_table(read_score_table(*pair[0]), read_score_table(*pair[1]))
    register_metric_table(command.artifacts, table)
    return table


def analyze_timing(command: AnalyzeCommand) -> MetricTable:
    tests, _, _ = command.load_tests(command.config.tests)
    rows = time_attribution(
        command.training_run,
        tests,
        command.config.attribution,
        command.config.n_t_values,
        command.config.timing_repeats,
    )
    seconds = [row.seconds for row in rows]
    table = MetricTable(
        "timing",
        ("n_t", "seconds", "seconds_per_pair", "replay_seconds"),
        [(row.n_t, row.seconds, row.seconds_per_pair, row.replay_seconds) for row in rows],
        {"slowest_over_fastest": float(np.max(seconds) / np.min(seconds))},
    )
    register_metric_table(command.artifacts, table)
    return table


# Registry mapping analysis names to their implementations
ANALYSIS_REGISTRY: dict[str, Analysis] = {
    "norm_vs_timestep": analyze_norm_vs_timestep,
    "t_max": analyze_t_max,
    "correlation": analyze_correlation,
    "manipulation": analyze_manipulation,
    "precision": analyze_precision,
    "uniqueness": analyze_uniqueness,
    "outlier": analyze_outlier,
    "rank_correlation": analyze_rank_correlation,
    "timing": analyze_timing,
}
