"""Seeded toy datasets with a planted minority group."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..constants import ArtifactName
from ..errors import ArgumentError, IntegrityError
from ..export.formats import decode_labels, decode_samples, encode_labels, encode_samples
from ..export.registry import ArtifactKind, ArtifactRegistry
from ..export.save import save_all
from ..export.utils import sha256_hex

logger = logging.getLogger(__name__)

MAJORITY = "majority"
MINORITY = "minority"


class Generator(StrEnum):
    GAUSSIAN_MIXTURE = "gaussian-mixture"
    BAR_PATTERNS = "bar-patterns"


class SyntheticDatasetSpec(BaseModel):
    """Majority/minority toy data; the minority plays the role of out-of-distribution samples.

    ``separation`` is the distance between the group means in units of ``cluster_std``
    (gaussian-mixture only). Held-out tests are drawn from the same two distributions.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    majority_count: int = Field(default=500, ge=1)
    minority_count: int = Field(default=20, ge=1)
    dim: int = 16
    generator: Generator = Generator.GAUSSIAN_MIXTURE
    seed: int = 0
    test_majority: int = Field(default=8, ge=0)
    test_minority: int = Field(default=8, ge=0)
    separation: float = Field(default=6.0, ge=4.0)
    cluster_std: float = Field(default=0.3, gt=0.0)
    bar_width: int = Field(default=2, ge=1)
    bar_noise: float = Field(default=0.05, ge=0.0)


@dataclass(frozen=True)
class SyntheticDataset:
    samples: np.ndarray
    groups: list[str]
    tests: np.ndarray
    test_groups: list[str]

    @property
    def minority_ids(self) -> np.ndarray:
        return np.flatnonzero(self.group_mask(MINORITY))

    def group_mask(self, group: str) -> np.ndarray:
        return np.array([g == group for g in self.groups], dtype=bool)

    def test_ids_in(self, group: str) -> list[int]:
        return [i for i, g in enumerate(self.test_groups) if g == group]


def _unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    direction = rng.standard_normal(dim)
    return direction / np.linalg.norm(direction)


def _gaussian_mixture(spec: SyntheticDatasetSpec, rng: np.random.Generator):
    offset = spec.separation * spec.cluster_std * _unit_vector(rng, spec.dim)
    majority_mean = -0.5 * offset
    minority_mean = 0.5 * offset

    def draw(mean: np.ndarray, count: int) -> np.ndarray:
        return mean + spec.cluster_std * rng.standard_normal((count, spec.dim))

    return draw(majority_mean, spec.majority_count + spec.test_majority), draw(
        minority_mean, spec.minority_count + spec.test_minority
    )


def _bar_patterns(spec: SyntheticDatasetSpec, rng: np.random.Generator):
    half = spec.dim // 2
    if spec.bar_width > half:
        raise ArgumentError(f"bar_width {spec.bar_width} exceeds half the dimension ({half})")

    def draw(low: int, high: int, count: int) -> np.ndarray:
        out = spec.bar_noise * rng.standard_normal((count, spec.dim))
        starts = rng.integers(low, high - spec.bar_width + 1, size=count)
        for row, start in enumerate(starts):
            out[row, start : start + spec.bar_width] += 1.0
        return out

    # majority bars live in the first half of the coordinates, minority bars in the second
    return (
        draw(0, half, spec.majority_count + spec.test_majority),
        draw(half, spec.dim, spec.minority_count + spec.test_minority),
    )


GENERATOR_REGISTRY = {
    Generator.GAUSSIAN_MIXTURE: _gaussian_mixture,
    Generator.BAR_PATTERNS: _bar_patterns,
}


def make_synthetic(spec: SyntheticDatasetSpec) -> SyntheticDataset:
    """Deterministic dataset; majority samples come first, then the minority.

    Raises:
        ArgumentError: ``dim < 2``.
    """
    if spec.dim < 2:
        raise ArgumentError(f"dim must be >= 2, got {spec.dim}")
    rng = np.random.default_rng(spec.seed)
    majority, minority = GENERATOR_REGISTRY[spec.generator](spec, rng)
    samples = np.vstack([majority[: spec.majority_count], minority[: spec.minority_count]])
    tests = np.vstack([majority[spec.majority_count :], minority[spec.minority_count :]])
    groups = [MAJORITY] * spec.majority_count + [MINORITY] * spec.minority_count
    test_groups = [MAJORITY] * spec.test_majority + [MINORITY] * spec.test_minority
    logger.info("Generated %s dataset: %d train, %d test", spec.generator, len(samples), len(tests))
    return SyntheticDataset(samples, groups, tests.reshape(-1, spec.dim), test_groups)


def register_dataset(registry: ArtifactRegistry, dataset: SyntheticDataset, spec: SyntheticDatasetSpec):
    files = {
        ArtifactName.SAMPLES: encode_samples(dataset.samples),
        ArtifactName.LABELS: encode_labels(dataset.groups),
        ArtifactName.TESTS: encode_samples(dataset.tests) if len(dataset.tests) else "",
        ArtifactName.TEST_LABELS: encode_labels(dataset.test_groups),
    }
    for name, text in files.items():
        registry.register(Path(name).stem, text, ArtifactKind.TEXT, save_hint=name)
    registry.register("spec", spec)
    registry.register("files", {str(name): sha256_hex(text.encode()) for name, text in files.items()})


def write_dataset(dataset: SyntheticDataset, spec: SyntheticDatasetSpec, out_dir: Path) -> Path:
    registry = ArtifactRegistry()
    register_dataset(registry, dataset, spec)
    return save_all(registry, out_dir, Path(ArtifactName.DATASET_INFO).stem)


def read_dataset(data_dir: Path) -> SyntheticDataset:
    """Load a dataset directory written by ``write_dataset``, verifying file digests."""
    data_dir = Path(data_dir)
    info_path = data_dir / ArtifactName.DATASET_INFO
    if not info_path.is_file():
        raise IntegrityError(f"No dataset description at {info_path}")
    digests = json.loads(info_path.read_text())["files"]
    texts = {}
    for name, digest in digests.items():
        raw = (data_dir / name).read_bytes()
        if sha256_hex(raw) != digest:
            raise IntegrityError(f"Digest mismatch for {name}")
        texts[name] = raw.decode("utf-8")
    samples = decode_samples(texts[ArtifactName.SAMPLES])
    tests_text = texts[ArtifactName.TESTS]
    tests = decode_samples(tests_text) if tests_text else np.empty((0, samples.shape[1]))
    return SyntheticDataset(
        samples=samples,
        groups=decode_labels(texts[ArtifactName.LABELS]),
        tests=tests,
        test_groups=decode_labels(texts[ArtifactName.TEST_LABELS]),
    )
