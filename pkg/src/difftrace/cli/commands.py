"""Command templates: load config, run, register artifacts, save."""

from __future__ import annotations

import logging
import os
from abc import ABC, abstractmethod
from functools import cached_property
from pathlib import Path
from typing import Any, ClassVar, Generic, TypeVar

import numpy as np
from pydantic import BaseModel

from ..attribution.attributor import Attributor
from ..attribution.config import AttributionConfig, AttributionMethod
from ..constants import ArtifactName, ExportKey
from ..data.synthetic import SyntheticDataset, make_synthetic, read_dataset, register_dataset
from ..diffusion.sampler import generate
from ..errors import ArgumentError, InputError, OutputError
from ..export.registry import ArtifactRegistry
from ..export.reports import register_score_table, register_self_influence
from ..export.run_io import RunManifest, read_run, register_run
from ..export.save import save_all
from ..export.utils import config_digest, file_digest
from ..training.records import TrainingRun
from ..training.trainer import train_run
from .analyses import solve_analysis
from .config import (
    AnalyzeCommandConfig,
    AttributeCommandConfig,
    MakeDataConfig,
    SampleSource,
    SelfInfluenceCommandConfig,
    TestsConfig,
    TrainCommandConfig,
    load_config,
)

logger = logging.getLogger(__name__)

C = TypeVar("C", bound=BaseModel)


class BaseCommand(ABC, Generic[C]):
    """Template for one CLI command.

    Subclasses set ``config_model`` and implement ``run()``, registering their outputs
    in ``self.artifacts``. ``execute()`` drives the fixed lifecycle
    pre_run -> run -> post_run -> save_all and returns the path of the JSON artifact.
    Relative paths inside the config resolve against ``base_dir``.
    """

    name: ClassVar[str] = ""
    config_model: ClassVar[type[BaseModel]]
    output_name: ClassVar[str] = ArtifactName.REPORT

    def __init__(self, config: C, out_dir: str | Path, base_dir: str | Path = ".") -> None:
        self.config = config
        self.out_dir = Path(out_dir)
        self.base_dir = Path(base_dir)
        self.result: Any = None
        self._registry = ArtifactRegistry()

    @classmethod
    def from_file(cls, config_path: str | Path, out_dir: str | Path) -> BaseCommand:
        config_path = Path(config_path)
        return cls(load_config(config_path, cls.config_model), out_dir, config_path.parent)

    @property
    def artifacts(self) -> ArtifactRegistry:
        """Access registered artifacts."""
        return self._registry

    def resolve(self, path: Path | None, key: str) -> Path:
        if path is None:
            raise ArgumentError(f"Config key '{key}' is required for '{self.name}'")
        return path if path.is_absolute() else self.base_dir / path

    def pre_run(self) -> None:
        """Check that the output directory is writable."""
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as err:
            raise OutputError(f"Cannot create output directory {self.out_dir}: {err.strerror}") from err
        if not os.access(self.out_dir, os.W_OK):
            raise OutputError(f"Output directory {self.out_dir} is not writable")

    @abstractmethod
    def run(self) -> Any:
        """Do the work and register artifacts."""

    def post_run(self, result: Any) -> Any:
        """Process the result. Default: return unchanged."""
        return result

    def save_all(self) -> Path:
        try:
            return save_all(self.artifacts, self.out_dir, self.output_name)
        except OSError as err:
            raise OutputError(f"Cannot write to {self.out_dir}: {err}") from err

    def execute(self) -> Path:
        self.artifacts.reset()
        self.artifacts.register(ExportKey.CONFIG, self.config)
        self.artifacts.register(ExportKey.CONFIG_DIGEST, config_digest(self.config))
        self.pre_run()
        self.result = self.post_run(self.run())
        path = self.save_all()
        logger.info("%s finished; wrote %s", self.name, path)
        return path


class RunCommand(BaseCommand[C]):
    """Command that reads a training run directory named by ``config.run``."""

    @cached_property
    def loaded(self) -> tuple[TrainingRun, RunManifest]:
        return read_run(self.resolve(self.config.run, "run"))

    @property
    def training_run(self) -> TrainingRun:
        return self.loaded[0]

    def register_run_reference(self) -> None:
        run_dir = self.resolve(self.config.run, "run")
        self.artifacts.register(
            "run",
            {
                "manifest_sha256": file_digest(run_dir / ArtifactName.MANIFEST),
                "config_digest": self.loaded[1].config_digest,
                "schedule_hash": self.loaded[1].data["schedule_hash"],
            },
        )

    def load_tests(self, tests_cfg: TestsConfig) -> tuple[np.ndarray, list[int], list[str] | None]:
        """Test samples, their ids and their group labels (when known).

        Raises:
            ArgumentError: the selection is empty or an id is out of range.
        """
        run = self.training_run
        groups: list[str] | None = None
        if tests_cfg.source is SampleSource.DATASET:
            dataset = read_dataset(self.resolve(tests_cfg.dataset, "tests.dataset"))
            samples, groups = dataset.tests, dataset.test_groups
        elif tests_cfg.source is SampleSource.TRAIN:
            samples = run.dataset
        else:
            final = run.checkpoints[-1]
            samples = np.array(
                [
                    generate(
                        final.params,
                        run.spec,
                        run.schedule,
                        tests_cfg.sampler.model_copy(update={"seed": tests_cfg.sampler.seed + i}),
                    )
                    for i in range(tests_cfg.count)
                ]
            ).reshape(-1, run.spec.input_dim)

        ids = list(range(len(samples))) if tests_cfg.ids is None else list(tests_cfg.ids)
        if not ids:
            raise ArgumentError("Test set is empty")
        if min(ids) < 0 or max(ids) >= len(samples):
            raise ArgumentError(f"Test ids must lie in [0, {len(samples)})")
        return samples[ids], ids, None if groups is None else [groups[i] for i in ids]


def _methods(methods: tuple[AttributionMethod, ...], cfg: AttributionConfig) -> list[AttributionMethod]:
    return list(methods) or [cfg.method]


class MakeDataCommand(BaseCommand[MakeDataConfig]):
    """Generate a synthetic dataset directory."""

    name = "make-data"
    config_model = MakeDataConfig
    output_name = Path(ArtifactName.DATASET_INFO).stem

    def run(self) -> SyntheticDataset:
        dataset = make_synthetic(self.config.dataset)
        register_dataset(self.artifacts, dataset, self.config.dataset)
        return dataset


class TrainCommand(BaseCommand[TrainCommandConfig]):
    """Train a denoiser and write its run directory."""

    name = "train"
    config_model = TrainCommandConfig
    output_name = Path(ArtifactName.MANIFEST).stem

    def run(self) -> TrainingRun:
        dataset = read_dataset(self.resolve(self.config.data, "data"))
        spec = self.config.model.spec(dataset.samples.shape[1])
        schedule = self.config.schedule.build()
        run = train_run(dataset.samples, spec, schedule, self.config.train)
        register_run(self.artifacts, run, self.config.schedule)
        return run


class AttributeCommand(RunCommand[AttributeCommandConfig]):
    """Score every training sample against a set of test samples."""

    name = "attribute"
    config_model = AttributeCommandConfig

    def run(self) -> dict:
        tests, test_ids, groups = self.load_tests(self.config.tests)
        attributor = Attributor(self.training_run, self.config.attribution)
        tables = {}
        for method in _methods(self.config.methods, self.config.attribution):
            table = attributor.score_all(tests, test_ids, method)
            register_score_table(self.artifacts, table, self.config.top_k)
            tables[method] = table
        self.register_run_reference()
        self.artifacts.register(
            "tests", {"source": self.config.tests.source, "ids": test_ids, "groups": groups}
        )
        return tables


class SelfInfluenceCommand(RunCommand[SelfInfluenceCommandConfig]):
    """Score every training sample against itself."""

    name = "self-influence"
    config_model = SelfInfluenceCommandConfig

    def run(self) -> dict:
        attributor = Attributor(self.training_run, self.config.attribution)
        results = {}
        for method in _methods(self.config.methods, self.config.attribution):
            scores = attributor.self_influence_all(method, self.config.replay_test_side)
            metadata = {**attributor.metadata(method), "replay_test_side": self.config.replay_test_side}
            register_self_influence(
                self.artifacts, method, scores, attributor.checkpoint_steps, metadata, self.config.top_k
            )
            results[method] = scores
        self.register_run_reference()
        return results


class AnalyzeCommand(RunCommand[AnalyzeCommandConfig]):
    """Run one named analysis on a run, a dataset or attribution reports."""

    name = "analyze"
    config_model = AnalyzeCommandConfig

    @cached_property
    def dataset(self) -> SyntheticDataset:
        return read_dataset(self.resolve(self.config.dataset, "dataset"))

    def report_dirs(self, minimum: int) -> list[Path]:
        if len(self.config.reports) < minimum:
            raise InputError(f"Analysis '{self.config.analysis}' needs at least {minimum} report(s)")
        return [self.resolve(path, "reports") for path in self.config.reports]

    def run(self) -> Any:
        return solve_analysis(self.config.analysis)(self)


COMMAND_REGISTRY: dict[str, type[BaseCommand]] = {
    MakeDataCommand.name: MakeDataCommand,
    TrainCommand.name: TrainCommand,
    AttributeCommand.name: AttributeCommand,
    SelfInfluenceCommand.name: SelfInfluenceCommand,
    AnalyzeCommand.name: AnalyzeCommand,
}


def solve_command(name: str) -> type[BaseCommand]:
    command = COMMAND_REGISTRY.get(name)
    if command is None:
        available = list(COMMAND_REGISTRY.keys())
        raise ArgumentError(f"Unknown command: '{name}'. Available: {available}")
    return command
