from .attribution import Attributor, AttributionConfig, AttributionMethod
from .data import SyntheticDatasetSpec, make_synthetic
from .diffusion import ScheduleConfig, SamplerConfig, generate, make_schedule
from .engine import DenoiserSpec, init_params
from .errors import DifftraceError, ErrorCategory
from .export import read_run, save_all, write_run
from .training import TrainConfig, TrainingRun, train_run

__all__ = [
    "Attributor",
    "AttributionConfig",
    "AttributionMethod",
    "DenoiserSpec",
    "DifftraceError",
    "ErrorCategory",
    "SamplerConfig",
    "ScheduleConfig",
    "SyntheticDatasetSpec",
    "TrainConfig",
    "TrainingRun",
    "generate",
    "init_params",
    "make_schedule",
    "make_synthetic",
    "read_run",
    "save_all",
    "train_run",
    "write_run",
]
