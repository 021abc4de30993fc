"""DDPM forward process, noise schedule and DDIM sampler."""

from .noise import monte_carlo_noise, noise_from_seed
from .schedule import NoiseSchedule, ScheduleConfig, make_schedule, q_sample
from .sampler import SamplerConfig, generate, inference_timesteps

__all__ = [
    "NoiseSchedule",
    "SamplerConfig",
    "ScheduleConfig",
    "generate",
    "inference_timesteps",
    "make_schedule",
    "monte_carlo_noise",
    "noise_from_seed",
    "q_sample",
]
