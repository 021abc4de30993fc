"""Artifact registry for run and report outputs."""

from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum, auto
from typing import Any

from .utils import CsvTable


class ArtifactKind(StrEnum):
    """Types of artifacts that can be saved."""

    JSON = auto()  # dict, list, primitives, pydantic models
    CSV = auto()  # CsvTable
    BINARY = auto()  # bytes, e.g. checkpoint files
    TEXT = auto()  # pre-rendered text


_EXTENSIONS = {ArtifactKind.CSV: "csv", ArtifactKind.TEXT: "txt", ArtifactKind.BINARY: "bin"}


@dataclass
class Artifact:
    """Single artifact with payload and metadata."""

    payload: Any
    kind: ArtifactKind
    save_hint: str | None = None

    def file_name(self, key: str) -> str | None:
        """Own file for non-JSON artifacts; JSON artifacts go to the combined document."""
        if self.kind == ArtifactKind.JSON:
            return None
        return self.save_hint or f"{key}.{_EXTENSIONS[self.kind]}"

    def render(self) -> str | bytes:
        if self.kind == ArtifactKind.CSV:
            return self.payload.to_text()
        return self.payload


class ArtifactRegistry:
    """Collects a command's outputs before they are written.

    Keys are unique, and so are the file names of non-JSON artifacts, so one save never
    writes the same file twice.
    """

    def __init__(self) -> None:
        self._artifacts: dict[str, Artifact] = {}
        self._files: dict[str, str] = {}

    def register(
        self,
        key: str,
        data: Any,
        kind: ArtifactKind | None = None,
        save_hint: str | None = None,
    ) -> None:
        """Register artifact. Kind is inferred if not provided.

        ``save_hint`` is the file name for non-JSON artifacts; ``{key}.{ext}`` otherwise.

        Raises:
            ValueError: the key, or the file the artifact would be written to, is taken.
        """
        if key in self._artifacts:
            raise ValueError(f"Key already registered: {key}")
        artifact = Artifact(data, kind if kind is not None else self._infer_kind(data), save_hint)
        file_name = artifact.file_name(key)
        if file_name is not None:
            owner = self._files.get(file_name)
            if owner is not None:
                raise ValueError(f"File {file_name} already claimed by '{owner}'")
            self._files[file_name] = key
        self._artifacts[key] = artifact

    @staticmethod
    def _infer_kind(data: Any) -> ArtifactKind:
        if isinstance(data, bytes | bytearray):
            return ArtifactKind.BINARY
        if isinstance(data, CsvTable):
            return ArtifactKind.CSV
        return ArtifactKind.JSON

    def get(self, key: str) -> Artifact | None:
        return self._artifacts.get(key)

    def __contains__(self, key: str) -> bool:
        return key in self._artifacts

    def __len__(self) -> int:
        return len(self._artifacts)

    def items(self) -> list[tuple[str, Artifact]]:
        """Return all artifacts as key-value pairs, in registration order."""
        return list(self._artifacts.items())

    def json_document(self) -> dict[str, Any]:
        """Payloads of every JSON artifact, keyed by artifact key."""
        return {key: a.payload for key, a in self._artifacts.items() if a.kind == ArtifactKind.JSON}

    def files(self) -> list[tuple[str, str | bytes]]:
        """(file name, rendered content) for every non-JSON artifact."""
        return [(name, self._artifacts[key].render()) for name, key in self._files.items()]

    def reset(self) -> None:
        self._artifacts.clear()
        self._files.clear()
