"""Byte-level formats for checkpoints, train logs and sample arrays.

Checkpoint file layout (all integers little-endian)::

    offset  size  field
    0       4     magic b"DTCK"
    4       1     format version (1)
    5       32    SHA-256 of the noise schedule betas
    37      8     step (unsigned)
    45      8     P, number of parameters (unsigned)
    53      4*P   parameters as float32
"""

from __future__ import annotations

import io
import math
import struct

import numpy as np

from ..engine.denoiser import DenoiserSpec
from ..engine.params import ParameterVector
from ..errors import IntegrityError
from ..training.records import Checkpoint, TrainRecord
from .utils import CsvTable

CHECKPOINT_MAGIC = b"DTCK"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sB32sQQ")

TRAIN_LOG_HEADER = ("step", "sample_id", "timestep", "noise_seed", "lr")
LABELS_HEADER = ("sample_id", "group")


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    values = checkpoint.params.values
    if not np.all(np.isfinite(values.astype(np.float32))):
        raise IntegrityError(f"Checkpoint at step {checkpoint.step} is not finite in float32")
    if len(checkpoint.schedule_hash) != 32:
        raise IntegrityError("Schedule hash must be 32 bytes")
    header = _HEADER.pack(
        CHECKPOINT_MAGIC, CHECKPOINT_VERSION, checkpoint.schedule_hash, checkpoint.step, values.size
    )
    return header + values.astype("<f4").tobytes()


def decode_checkpoint(data: bytes, spec: DenoiserSpec, loss_ema: float = math.nan) -> Checkpoint:
    """Parse a checkpoint file; parameters are widened to float64.

    Raises:
        IntegrityError: bad magic or version, truncated file, or a parameter count that
            does not match ``spec``.
    """
    if len(data) < _HEADER.size:
        raise IntegrityError(f"Checkpoint truncated: {len(data)} bytes, header needs {_HEADER.size}")
    magic, version, schedule_hash, step, count = _HEADER.unpack_from(data)
    if magic != CHECKPOINT_MAGIC:
        raise IntegrityError(f"Bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise IntegrityError(f"Unsupported checkpoint version {version}")
    if count != spec.num_parameters:
        raise IntegrityError(f"Checkpoint holds {count} parameters, spec expects {spec.num_parameters}")
    expected = _HEADER.size + 4 * count
    if len(data) != expected:
        raise IntegrityError(f"Checkpoint has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f4", count=count, offset=_HEADER.size).astype(np.float64)
    params = ParameterVector(values=values, layout=spec.layout())
    return Checkpoint(step=int(step), params=params, loss_ema=loss_ema, schedule_hash=schedule_hash)


def encode_train_log(records: list[TrainRecord]) -> str:
    rows = [(r.step, r.sample_id, r.timestep, r.noise_seed, float(r.lr)) for r in records]
    return CsvTable(TRAIN_LOG_HEADER, rows).to_text()


def decode_train_log(text: str) -> list[TrainRecord]:
    table = CsvTable.from_text(text)
    if tuple(table.header) != TRAIN_LOG_HEADER:
        raise IntegrityError(f"Train log header {table.header} != {list(TRAIN_LOG_HEADER)}")
    try:
        return [
            TrainRecord(int(step), int(sample_id), int(t), int(seed), float(lr))
            for step, sample_id, t, seed, lr in table.rows
        ]
    except ValueError as err:
        raise IntegrityError(f"Malformed train log row: {err}") from err


def encode_samples(samples: np.ndarray) -> str:
    """One sample per line, full float64 precision."""
    buffer = io.StringIO()
    np.savetxt(buffer, np.atleast_2d(samples), fmt="%.17g", delimiter=",", newline="\n")
    return buffer.getvalue()


def decode_samples(text: str) -> np.ndarray:
    try:
        return np.loadtxt(io.StringIO(text), delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as err:
        raise IntegrityError(f"Malformed sample file: {err}") from err


def encode_labels(groups: list[str]) -> str:
    return CsvTable(LABELS_HEADER, list(enumerate(groups))).to_text()


def decode_labels(text: str) -> list[str]:
    table = CsvTable.from_text(text)
    if tuple(table.header) != LABELS_HEADER:
        raise IntegrityError(f"Labels header {table.header} != {list(LABELS_HEADER)}")
    ids = [int(row[0]) for row in table.rows]
    if ids != list(range(len(ids))):
        raise IntegrityError("Label rows must list sample ids 0..N-1 in order")
    return [row[1] for row in table.rows]
