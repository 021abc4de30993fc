"""Command configuration documents (TOML or JSON) and their loader."""

from __future__ import annotations

import json
import tomllib
from enum import StrEnum
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..attribution.config import AttributionConfig, AttributionMethod
from ..attribution.scores import METHOD_REGISTRY
from ..data.synthetic import SyntheticDatasetSpec
from ..diffusion.sampler import SamplerConfig
from ..diffusion.schedule import ScheduleConfig
from ..engine.denoiser import Activation, DenoiserSpec
from ..errors import ConfigError
from ..training.records import TrainConfig

C = TypeVar("C", bound=BaseModel)


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelConfig(_Strict):
    """Denoiser architecture; the input dimension comes from the dataset."""

    hidden_dims: tuple[int, ...] = (96, 96)
    time_embed_dim: int = 16
    activation: Activation = Activation.SILU

    def spec(self, input_dim: int) -> DenoiserSpec:
        return DenoiserSpec(input_dim=input_dim, **self.model_dump())


class SampleSource(StrEnum):
    DATASET = "dataset"
    GENERATED = "generated"
    TRAIN = "train"


class TestsConfig(_Strict):
    """Where attribution test samples come from.

    ``dataset`` reads the held-out tests of a dataset directory, ``train`` reuses
    training samples and ``generated`` runs the DDIM sampler on the final checkpoint
    with seeds ``sampler.seed + i``. ``ids`` keeps a subset.
    """

    __test__ = False

    source: SampleSource = SampleSource.DATASET
    dataset: Path | None = None
    ids: tuple[int, ...] | None = None
    count: int = Field(default=16, ge=0)
    sampler: SamplerConfig = SamplerConfig()


class MakeDataConfig(_Strict):
    dataset: SyntheticDatasetSpec = SyntheticDatasetSpec()


class TrainCommandConfig(_Strict):
    data: Path
    model: ModelConfig = ModelConfig()
    schedule: ScheduleConfig = ScheduleConfig()
    train: TrainConfig = TrainConfig()


class AttributeCommandConfig(_Strict):
    run: Path
    tests: TestsConfig = TestsConfig()
    attribution: AttributionConfig = AttributionConfig()
    methods: tuple[AttributionMethod, ...] = ()
    top_k: int = Field(default=10, ge=1)


class SelfInfluenceCommandConfig(_Strict):
    run: Path
    attribution: AttributionConfig = AttributionConfig()
    methods: tuple[AttributionMethod, ...] = ()
    replay_test_side: bool = False
    top_k: int = Field(default=10, ge=1)

    @model_validator(mode="after")
    def _replay_methods_only(self) -> SelfInfluenceCommandConfig:
        methods = self.methods or (self.attribution.method,)
        unsupported = [str(m) for m in methods if m not in METHOD_REGISTRY]
        if unsupported:
            available = [str(m) for m in METHOD_REGISTRY]
            raise ValueError(
                f"Self-influence needs a replay method, got {unsupported}. Available: {available}"
            )
        return self


class AnalyzeCommandConfig(_Strict):
    """Settings for one analysis; each analysis reads only the keys it needs."""

    analysis: str
    run: Path | None = None
    dataset: Path | None = None
    reports: tuple[Path, ...] = ()
    methods: tuple[AttributionMethod, ...] = ()
    checkpoint: int | None = None
    sample_ids: tuple[int, ...] | None = None
    probe_stride: int = Field(default=10, ge=1)
    n_bins: int = Field(default=3, ge=1)
    k_values: tuple[int, ...] = (10, 50)
    band: float = Field(default=0.1, ge=0.0, le=1.0)
    test_id: int = 0
    tests: TestsConfig = TestsConfig()
    attribution: AttributionConfig = AttributionConfig()
    n_t_values: tuple[int, ...] = (50,)
    timing_repeats: int = Field(default=1, ge=1)
    workers: int = Field(default=1, ge=1)


def _describe(err: ValidationError) -> str:
    parts = []
    for item in err.errors():
        key = ".".join(str(part) for part in item["loc"]) or "<root>"
        parts.append(f"{key}: {item['msg']}")
    return "; ".join(parts)


def load_config(path: str | Path, model: type[C]) -> C:
    """Parse a ``.toml`` or ``.json`` document into ``model``.

    Raises:
        ConfigError: unreadable file, unsupported suffix, syntax error, unknown or invalid keys.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"Cannot read config {path}: {err.strerror}") from err
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(text)
        elif path.suffix == ".json":
            data = json.loads(text)
        else:
            raise ConfigError(
                f"Unsupported config format '{path.suffix}'. Available: ['.toml', '.json']"
            )
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as err:
        raise ConfigError(f"Cannot parse {path.name}: {err}") from err
    try:
        return model.model_validate(data)
    except ValidationError as err:
        raise ConfigError(f"Invalid config {path.name}: {_describe(err)}") from err
