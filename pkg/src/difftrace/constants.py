from enum import StrEnum, auto


class ArtifactName(StrEnum):
    """Fixed file names inside run, dataset and report directories."""

    MANIFEST = "manifest.json"
    TRAIN_LOG = "train_log.csv"
    DATASET = "dataset.csv"
    SAMPLES = "samples.csv"
    LABELS = "labels.csv"
    TESTS = "tests.csv"
    TEST_LABELS = "test_labels.csv"
    DATASET_INFO = "dataset.json"
    REPORT = "report"
    SCORES = "scores.csv"
    SELF_INFLUENCE = "self_influence.csv"


class ExportKey(StrEnum):
    CONFIG = auto()
    CONFIG_DIGEST = auto()
    METADATA = auto()
    RESULTS = auto()
    RANKINGS = auto()


CHECKPOINT_SUFFIX = ".dtck"


def checkpoint_filename(step: int) -> str:
    return f"checkpoint_{step:08d}{CHECKPOINT_SUFFIX}"
