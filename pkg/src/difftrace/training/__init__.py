"""SGD training with checkpoints and an exactly replayable log."""

from .records import Checkpoint, TrainConfig, TrainingRun, TrainLog, TrainRecord
from .trainer import quantize, replay_gradient, replay_record, steps_per_epoch, train, train_run

__all__ = [
    "Checkpoint",
    "TrainConfig",
    "TrainLog",
    "TrainRecord",
    "TrainingRun",
    "quantize",
    "replay_gradient",
    "replay_record",
    "steps_per_epoch",
    "train",
    "train_run",
]
