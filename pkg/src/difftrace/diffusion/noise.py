"""Seeded noise draws shared by training, replay and attribution."""

import numpy as np


def noise_from_seed(noise_seed: int, dim: int) -> np.ndarray:
    """Training noise regenerated from the seed stored in the train log."""
    return np.random.default_rng(noise_seed).standard_normal(dim)


def monte_carlo_noise(noise_seed: int, t: int, index: int, dim: int) -> np.ndarray:
    """Noise for the ``index``-th Monte Carlo draw at timestep ``t`` of a test gradient."""
    return np.random.default_rng([noise_seed, t, index]).standard_normal(dim)
