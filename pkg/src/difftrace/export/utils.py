import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field, is_dataclass
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)


class JsonEncoder(json.JSONEncoder):
    def default(self, o: Any):
        if isinstance(o, np.integer):
            return int(o)
        elif isinstance(o, np.floating):
            return float(o)
        elif isinstance(o, np.bool_):
            return bool(o)
        elif isinstance(o, np.ndarray):
            return o.tolist()
        elif isinstance(o, BaseModel):
            return o.model_dump(mode="json")
        elif is_dataclass(o) and not isinstance(o, type):
            return asdict(o)
        elif isinstance(o, Enum):
            return o.value
        elif isinstance(o, Path):
            return o.as_posix()
        elif isinstance(o, tuple | set | frozenset):
            return list(o)
        return super().default(o)


def json_dumps(data: Any) -> str:
    """Deterministic JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, cls=JsonEncoder, indent=2, sort_keys=True, allow_nan=True) + "\n"


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_digest(path: Path) -> str:
    return sha256_hex(Path(path).read_bytes())


def config_digest(config: BaseModel | dict) -> str:
    """SHA-256 of the canonical compact JSON form of ``config``."""
    payload = config.model_dump(mode="json") if isinstance(config, BaseModel) else config
    canonical = json.dumps(payload, cls=JsonEncoder, sort_keys=True, separators=(",", ":"))
    return sha256_hex(canonical.encode("utf-8"))


def atomic_write(path: Path, data: bytes | str) -> Path:
    """Write ``data`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug("Wrote %s (%d bytes)", path, len(payload))
    return path


def format_cell(value: Any) -> str:
    """Floats use ``repr`` so the text round-trips exactly."""
    if isinstance(value, bool | np.bool_):
        return str(bool(value)).lower()
    if isinstance(value, float | np.floating):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


@dataclass
class CsvTable:
    """Header plus rows, rendered with LF line endings."""

    header: Sequence[str]
    rows: list[Sequence[Any]] = field(default_factory=list)

    def to_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.header)
        for row in self.rows:
            writer.writerow([format_cell(v) for v in row])
        return buffer.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "CsvTable":
        reader = csv.reader(io.StringIO(text))
        rows = list(reader)
        if not rows:
            raise ValueError("CSV text has no header")
        return cls(header=rows[0], rows=rows[1:])

    @classmethod
    def from_records(cls, header: Sequence[str], records: Iterable[Sequence[Any]]) -> "CsvTable":
        return cls(header=list(header), rows=[list(r) for r in records])
