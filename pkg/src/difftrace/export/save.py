"""Write a registry to disk."""

from __future__ import annotations

import logging
from pathlib import Path

from .registry import ArtifactRegistry
from .utils import atomic_write, json_dumps

logger = logging.getLogger(__name__)


def save_all(registry: ArtifactRegistry, path: str | Path, name: str) -> Path:
    """Save all artifacts from registry to disk.

    JSON artifacts (metadata, configs, results) are combined into a single
    ``{name}.json`` with sorted keys. Every other artifact gets its own file, named as
    registered. Names are fixed, so a rerun into the same directory replaces its outputs.

    Args:
        registry: ArtifactRegistry containing artifacts to save.
        path: Directory path where files should be saved.
        name: Base name of the combined JSON file.

    Returns:
        Path to the saved JSON file.
    """
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)

    # the JSON document is written last
    files = registry.files()
    for file_name, content in files:
        atomic_write(directory / file_name, content)
    json_path = atomic_write(directory / f"{name}.json", json_dumps(registry.json_document()))

    logger.info("Saved %s and %d data files to %s", json_path.name, len(files), directory)
    return json_path
