import numpy as np
import pytest

from difftrace.diffusion import (
    SamplerConfig,
    ScheduleConfig,
    generate,
    inference_timesteps,
    make_schedule,
    monte_carlo_noise,
    noise_from_seed,
    q_sample,
)
from difftrace.engine import DenoiserSpec
from difftrace.errors import ArgumentError, ShapeError, TimestepRangeError
from difftrace.training import TrainConfig, train


def test_linear_schedule_matches_closed_form():
    schedule = make_schedule(1000, 1e-4, 0.02)

    assert schedule.T == 1000
    assert schedule.betas[0] == pytest.approx(1e-4)
    assert schedule.betas[-1] == pytest.approx(0.02)
    assert schedule.alpha_bar(1) == pytest.approx(1 - 1e-4)
    assert schedule.alpha_bar(3) == pytest.approx(np.prod(1 - schedule.betas[:3]))
    assert np.all(np.diff(schedule.alpha_bars) < 0)


@pytest.mark.parametrize(
    ("T", "start", "end"), [(1, 1e-4, 0.02), (10, 0.0, 0.02), (10, 0.5, 0.1), (10, 0.1, 1.0)]
)
def test_invalid_schedule(T, start, end):
    with pytest.raises(ArgumentError):
        make_schedule(T, start, end)


def test_schedule_digest_tracks_betas():
    a = ScheduleConfig(T=100).build()
    b = ScheduleConfig(T=100).build()
    c = ScheduleConfig(T=100, beta_end=0.03).build()

    assert len(a.digest()) == 32
    assert a.digest() == b.digest()
    assert a.digest() != c.digest()


def test_q_sample_endpoints(tiny_schedule, rng):
    x0, eps = rng.standard_normal(4), rng.standard_normal(4)
    alpha_bar = tiny_schedule.alpha_bar(10)

    np.testing.assert_allclose(
        q_sample(x0, 10, eps, tiny_schedule), np.sqrt(alpha_bar) * x0 + np.sqrt(1 - alpha_bar) * eps
    )
    with pytest.raises(TimestepRangeError):
        q_sample(x0, tiny_schedule.T + 1, eps, tiny_schedule)
    with pytest.raises(ShapeError):
        q_sample(x0, 1, eps[:3], tiny_schedule)


def test_seeded_noise():
    np.testing.assert_array_equal(noise_from_seed(42, 5), noise_from_seed(42, 5))
    np.testing.assert_array_equal(monte_carlo_noise(1, 7, 0, 3), monte_carlo_noise(1, 7, 0, 3))
    assert not np.array_equal(monte_carlo_noise(1, 7, 0, 3), monte_carlo_noise(1, 7, 1, 3))
    assert not np.array_equal(monte_carlo_noise(1, 7, 0, 3), monte_carlo_noise(1, 8, 0, 3))


def test_inference_timesteps():
    steps = inference_timesteps(60, 5)

    assert steps[0] == 1 and steps[-1] == 60
    assert np.all(np.diff(steps) > 0)
    np.testing.assert_array_equal(inference_timesteps(60, 1), [60])
    with pytest.raises(ArgumentError):
        inference_timesteps(60, 61)


def test_ddim_is_deterministic(tiny_params, tiny_spec, tiny_schedule):
    cfg = SamplerConfig(inference_steps=10, seed=4)

    first = generate(tiny_params, tiny_spec, tiny_schedule, cfg)
    second = generate(tiny_params, tiny_spec, tiny_schedule, cfg)

    assert first.shape == (4,)
    assert np.all(np.isfinite(first))
    np.testing.assert_array_equal(first, second)
    other = generate(tiny_params, tiny_spec, tiny_schedule, cfg.model_copy(update={"seed": 5}))
    assert not np.array_equal(first, other)


def test_stochastic_sampler_uses_eta(tiny_params, tiny_spec, tiny_schedule):
    deterministic = generate(tiny_params, tiny_spec, tiny_schedule, SamplerConfig(inference_steps=10))
    noisy_cfg = SamplerConfig(inference_steps=10, eta=1.0)
    stochastic = generate(tiny_params, tiny_spec, tiny_schedule, noisy_cfg)

    assert not np.allclose(deterministic, stochastic)


@pytest.mark.slow
def test_sampler_reproduces_a_memorized_point():
    """A denoiser fit to one repeated point generates that point from any seed."""
    point = np.array([1.0, -0.5])
    spec = DenoiserSpec(input_dim=2, hidden_dims=(32, 32), time_embed_dim=8)
    schedule = make_schedule(100, 1e-4, 0.2)
    cfg = TrainConfig(epochs=1500, batch_size=8, lr=0.05, seed=0, checkpoint_every=10_000)
    checkpoints, _ = train(np.tile(point, (8, 1)), spec, schedule, cfg)
    params = checkpoints[-1].params

    for seed in range(3):
        sample = generate(params, spec, schedule, SamplerConfig(inference_steps=20, seed=seed))
        assert np.linalg.norm(sample - point) < 0.3
