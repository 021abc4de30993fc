import numpy as np
import pytest

from difftrace.attribution import AttributionConfig
from difftrace.data import SyntheticDatasetSpec, make_synthetic
from difftrace.diffusion import make_schedule
from difftrace.engine import DenoiserSpec, init_params
from difftrace.training import TrainConfig, train_run


@pytest.fixture(scope="session")
def tiny_spec():
    return DenoiserSpec(input_dim=4, hidden_dims=(8, 8), time_embed_dim=4)


@pytest.fixture(scope="session")
def tiny_schedule():
    return make_schedule(60, 1e-4, 0.05)


@pytest.fixture(scope="session")
def tiny_params(tiny_spec):
    return init_params(tiny_spec, seed=3)


@pytest.fixture(scope="session")
def tiny_dataset():
    spec = SyntheticDatasetSpec(
        majority_count=20, minority_count=4, dim=4, seed=11, test_majority=2, test_minority=2
    )
    return make_synthetic(spec)


@pytest.fixture(scope="session")
def tiny_train_config():
    return TrainConfig(epochs=6, batch_size=6, lr=0.05, seed=5, checkpoint_every=6)


@pytest.fixture(scope="session")
def tiny_run(tiny_dataset, tiny_spec, tiny_schedule, tiny_train_config):
    """24 samples, 4 steps per epoch, 24 steps; checkpoints at 0, 6, 12, 18 and 24."""
    return train_run(tiny_dataset.samples, tiny_spec, tiny_schedule, tiny_train_config)


@pytest.fixture()
def tiny_attribution():
    return AttributionConfig(checkpoints=(6, 12), n_t=6, m=2, noise_seed=9)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
