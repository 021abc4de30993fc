"""Training log records, checkpoints and the replayable training run."""

from __future__ import annotations

import bisect
from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..diffusion.schedule import NoiseSchedule
from ..engine.denoiser import DenoiserSpec
from ..engine.params import ParameterVector
from ..errors import IntegrityError, MissingCheckpointError, MissingRecordsError


class TrainConfig(BaseModel):
    """Plain SGD training settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = Field(default=100, gt=0)
    batch_size: int = Field(default=16, ge=1)
    lr: float = Field(default=0.05, gt=0.0)
    seed: int = 0
    checkpoint_every: int = Field(default=50, ge=1)
    ema_decay: float = Field(default=0.95, ge=0.0, lt=1.0)
    quantize_checkpoints: bool = True
    progress: bool = False


@dataclass(frozen=True)
class TrainRecord:
    """One consumed (sample, step) pair; enough to regenerate its loss exactly."""

    step: int
    sample_id: int
    timestep: int
    noise_seed: int
    lr: float


@dataclass
class Checkpoint:
    """Parameters ``theta_k`` used by update ``k``, before that update is applied."""

    step: int
    params: ParameterVector
    loss_ema: float
    schedule_hash: bytes

    def check_schedule(self, schedule: NoiseSchedule) -> None:
        if self.schedule_hash != schedule.digest():
            raise IntegrityError(
                f"Checkpoint at step {self.step} was trained with a different noise schedule"
            )


@dataclass
class TrainLog:
    """Records in step order with a per-sample index."""

    records: list[TrainRecord]
    _by_sample: dict[int, list[TrainRecord]] = field(init=False, repr=False)

    def __post_init__(self):
        self.records = sorted(self.records, key=lambda r: (r.step, r.sample_id))
        by_sample: dict[int, list[TrainRecord]] = defaultdict(list)
        for record in self.records:
            by_sample[record.sample_id].append(record)
        self._by_sample = dict(by_sample)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def sample_ids(self) -> list[int]:
        return sorted(self._by_sample)

    def records_for(self, sample_id: int) -> list[TrainRecord]:
        records = self._by_sample.get(sample_id)
        if not records:
            raise MissingRecordsError(f"Sample {sample_id} was never trained in any logged step")
        return records

    def records_between(self, sample_id: int, start: int, stop: int | None) -> list[TrainRecord]:
        """Records of ``sample_id`` with ``start <= step < stop``."""
        records = self.records_for(sample_id)
        return [r for r in records if r.step >= start and (stop is None or r.step < stop)]

    def nearest_record(self, sample_id: int, step: int) -> TrainRecord:
        """First record at or after ``step``; the last one before it otherwise."""
        records = self.records_for(sample_id)
        steps = [r.step for r in records]
        index = bisect.bisect_left(steps, step)
        return records[index] if index < len(records) else records[-1]


@dataclass
class TrainingRun:
    """Everything needed to replay training: data, model, schedule, checkpoints and log."""

    dataset: np.ndarray
    spec: DenoiserSpec
    schedule: NoiseSchedule
    checkpoints: list[Checkpoint]
    log: TrainLog

    def __post_init__(self):
        self.dataset = np.asarray(self.dataset, dtype=np.float64)
        self.checkpoints = sorted(self.checkpoints, key=lambda c: c.step)
        for checkpoint in self.checkpoints:
            checkpoint.check_schedule(self.schedule)

    @property
    def steps(self) -> list[int]:
        return [c.step for c in self.checkpoints]

    def checkpoint(self, step: int) -> Checkpoint:
        for checkpoint in self.checkpoints:
            if checkpoint.step == step:
                return checkpoint
        raise MissingCheckpointError(f"No checkpoint at step {step}. Available: {self.steps}")

    def governing_checkpoint(self, step: int) -> Checkpoint:
        """Latest checkpoint with ``checkpoint.step <= step``."""
        index = bisect.bisect_right(self.steps, step) - 1
        if index < 0:
            raise MissingCheckpointError(f"No checkpoint at or before step {step}")
        return self.checkpoints[index]

    def next_checkpoint_step(self, step: int) -> int | None:
        index = bisect.bisect_right(self.steps, step)
        return self.steps[index] if index < len(self.steps) else None

    def governed_records(
        self, sample_id: int, checkpoint: Checkpoint, stop: int | None = None
    ) -> list[TrainRecord]:
        """Records of ``sample_id`` with ``checkpoint.step <= step < stop``.

        ``stop`` defaults to the next saved checkpoint; records in that range are
        exactly those governed by ``checkpoint``.
        """
        if stop is None:
            stop = self.next_checkpoint_step(checkpoint.step)
        return self.log.records_between(sample_id, checkpoint.step, stop)

    def resolve(self, steps: Iterable[int] | Sequence[Checkpoint]) -> list[Checkpoint]:
        return [s if isinstance(s, Checkpoint) else self.checkpoint(int(s)) for s in steps]
