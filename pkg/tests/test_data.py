import numpy as np
import pytest

from difftrace.constants import ArtifactName
from difftrace.data import (
    MAJORITY,
    MINORITY,
    Generator,
    SyntheticDatasetSpec,
    make_synthetic,
    read_dataset,
    write_dataset,
)
from difftrace.errors import ArgumentError, IntegrityError


def test_gaussian_mixture_layout():
    spec = SyntheticDatasetSpec(
        majority_count=30, minority_count=5, dim=6, test_majority=3, test_minority=2
    )

    dataset = make_synthetic(spec)

    assert dataset.samples.shape == (35, 6)
    assert dataset.tests.shape == (5, 6)
    assert dataset.groups[:30] == [MAJORITY] * 30
    np.testing.assert_array_equal(dataset.minority_ids, np.arange(30, 35))
    assert dataset.test_ids_in(MINORITY) == [3, 4]


def test_groups_are_separated():
    dataset = make_synthetic(SyntheticDatasetSpec(majority_count=50, minority_count=10, dim=8))
    majority = dataset.samples[dataset.group_mask(MAJORITY)]
    minority = dataset.samples[dataset.group_mask(MINORITY)]

    gap = np.linalg.norm(majority.mean(axis=0) - minority.mean(axis=0))
    assert gap > 4 * 0.3 * 0.8


def test_generation_is_seeded():
    spec = SyntheticDatasetSpec(majority_count=10, minority_count=3, dim=4, seed=4)

    np.testing.assert_array_equal(make_synthetic(spec).samples, make_synthetic(spec).samples)
    other = make_synthetic(spec.model_copy(update={"seed": 5})).samples
    assert not np.array_equal(make_synthetic(spec).samples, other)


def test_bar_patterns():
    spec = SyntheticDatasetSpec(
        majority_count=20, minority_count=5, dim=8, generator=Generator.BAR_PATTERNS, bar_noise=0.0
    )

    dataset = make_synthetic(spec)

    majority = dataset.samples[dataset.group_mask(MAJORITY)]
    minority = dataset.samples[dataset.group_mask(MINORITY)]
    assert np.all(majority[:, 4:] == 0.0) and np.all(majority.sum(axis=1) == 2.0)
    assert np.all(minority[:, :4] == 0.0) and np.all(minority.sum(axis=1) == 2.0)


def test_invalid_specs():
    with pytest.raises(ArgumentError):
        make_synthetic(SyntheticDatasetSpec(dim=1))
    with pytest.raises(ArgumentError):
        make_synthetic(SyntheticDatasetSpec(dim=4, generator="bar-patterns", bar_width=3))
    with pytest.raises(ValueError):
        SyntheticDatasetSpec(separation=2.0)
    with pytest.raises(ValueError):
        SyntheticDatasetSpec(unknown=1)


def test_dataset_directory_round_trip(tmp_path):
    spec = SyntheticDatasetSpec(majority_count=12, minority_count=3, dim=4)
    dataset = make_synthetic(spec)

    info = write_dataset(dataset, spec, tmp_path)
    loaded = read_dataset(tmp_path)

    assert info.name == ArtifactName.DATASET_INFO
    np.testing.assert_array_equal(loaded.samples, dataset.samples)
    np.testing.assert_array_equal(loaded.tests, dataset.tests)
    assert loaded.groups == dataset.groups
    assert loaded.test_groups == dataset.test_groups


def test_dataset_without_tests(tmp_path):
    spec = SyntheticDatasetSpec(
        majority_count=5, minority_count=2, dim=3, test_majority=0, test_minority=0
    )
    write_dataset(make_synthetic(spec), spec, tmp_path)

    assert read_dataset(tmp_path).tests.shape == (0, 3)


def test_tampered_dataset(tmp_path):
    spec = SyntheticDatasetSpec(majority_count=5, minority_count=2, dim=3)
    write_dataset(make_synthetic(spec), spec, tmp_path)
    (tmp_path / ArtifactName.LABELS).write_text("sample_id,group\n")

    with pytest.raises(IntegrityError):
        read_dataset(tmp_path)
    with pytest.raises(IntegrityError):
        read_dataset(tmp_path / "missing")
