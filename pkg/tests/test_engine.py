import numpy as np
import pytest

from difftrace.diffusion import q_sample
from difftrace.engine import (
    DenoiserSpec,
    GradientVector,
    ParameterVector,
    build_layout,
    denoiser_forward,
    init_params,
    loss_and_grad,
    loss_hvp,
    time_embedding,
    zero_params,
)
from difftrace.errors import ArgumentError, NumericError, ShapeError, TimestepRangeError


def numeric_gradient(params, spec, schedule, x0, t, eps, h=1e-6):
    grad = np.zeros(params.size)
    for i in range(params.size):
        step = np.zeros(params.size)
        step[i] = h
        plus, _ = loss_and_grad(params.with_values(params.values + step), spec, schedule, x0, t, eps)
        minus, _ = loss_and_grad(params.with_values(params.values - step), spec, schedule, x0, t, eps)
        grad[i] = (plus - minus) / (2 * h)
    return grad


@pytest.mark.parametrize("instance", range(5))
def test_gradient_matches_finite_differences(instance, tiny_spec, tiny_schedule):
    rng = np.random.default_rng(instance)
    params = init_params(tiny_spec, seed=instance)
    x0 = rng.standard_normal(tiny_spec.input_dim)
    eps = rng.standard_normal(tiny_spec.input_dim)
    t = int(rng.integers(1, tiny_schedule.T + 1))

    _, grad = loss_and_grad(params, tiny_spec, tiny_schedule, x0, t, eps)
    expected = numeric_gradient(params, tiny_spec, tiny_schedule, x0, t, eps)

    scale = np.maximum(np.abs(expected), 1e-3 * np.abs(expected).max())
    assert np.max(np.abs(grad.values - expected) / scale) < 1e-4


def test_tanh_gradient_matches_finite_differences(tiny_schedule, rng):
    spec = DenoiserSpec(input_dim=3, hidden_dims=(5,), time_embed_dim=2, activation="tanh")
    params = init_params(spec, seed=1)
    x0, eps = rng.standard_normal(3), rng.standard_normal(3)

    _, grad = loss_and_grad(params, spec, tiny_schedule, x0, 17, eps)

    np.testing.assert_allclose(
        grad.values, numeric_gradient(params, spec, tiny_schedule, x0, 17, eps), rtol=1e-4, atol=1e-8
    )


def test_zero_params_have_zero_loss_gradient_only_on_output(tiny_spec, tiny_schedule, rng):
    params = zero_params(tiny_spec)
    x0, eps = rng.standard_normal(4), rng.standard_normal(4)

    loss, grad = loss_and_grad(params, tiny_spec, tiny_schedule, x0, 5, eps)

    assert loss == pytest.approx(np.mean(eps**2))
    # hidden activations are silu(0) = 0, so only the output bias receives gradient
    np.testing.assert_allclose(grad.values[params.layout[-1].offset :], -2 * eps / 4)
    assert np.count_nonzero(grad.values[: params.layout[-1].offset]) == 0


def test_perfect_prediction_has_zero_gradient(tiny_spec, tiny_schedule, rng):
    eps = rng.standard_normal(4)
    zero = zero_params(tiny_spec)
    values = zero.values.copy()
    values[zero.layout[-1].offset :] = eps
    params = zero.with_values(values)

    loss, grad = loss_and_grad(params, tiny_spec, tiny_schedule, rng.standard_normal(4), 12, eps)

    assert loss == 0.0
    assert grad.norm == 0.0


def test_gradient_is_linear_in_loss_scale(tiny_spec, tiny_schedule, tiny_params, rng):
    x0, eps = rng.standard_normal(4), rng.standard_normal(4)

    _, grad = loss_and_grad(tiny_params, tiny_spec, tiny_schedule, x0, 8, eps)
    _, scaled = loss_and_grad(tiny_params, tiny_spec, tiny_schedule, x0, 8, eps, scale=7.0)

    np.testing.assert_allclose(scaled.values, 7.0 * grad.values, rtol=1e-12, atol=0)


def test_loss_matches_definition(tiny_spec, tiny_schedule, tiny_params, rng):
    x0, eps = rng.standard_normal(4), rng.standard_normal(4)
    x_t = q_sample(x0, 30, eps, tiny_schedule)

    loss, _ = loss_and_grad(tiny_params, tiny_spec, tiny_schedule, x0, 30, eps, scale=2.5)

    prediction = denoiser_forward(tiny_params, tiny_spec, x_t, 30)
    assert loss == pytest.approx(2.5 * np.mean((prediction - eps) ** 2))


def test_loss_and_grad_is_deterministic(tiny_spec, tiny_schedule, tiny_params, rng):
    x0, eps = rng.standard_normal(4), rng.standard_normal(4)

    first = loss_and_grad(tiny_params, tiny_spec, tiny_schedule, x0, 12, eps)
    second = loss_and_grad(tiny_params, tiny_spec, tiny_schedule, x0, 12, eps)

    assert first[0] == second[0]
    assert first[1].values.tobytes() == second[1].values.tobytes()


def test_timestep_out_of_range(tiny_spec, tiny_schedule, tiny_params):
    x = np.zeros(4)
    with pytest.raises(TimestepRangeError):
        loss_and_grad(tiny_params, tiny_spec, tiny_schedule, x, 0, x)
    with pytest.raises(TimestepRangeError):
        loss_and_grad(tiny_params, tiny_spec, tiny_schedule, x, tiny_schedule.T + 1, x)


def test_shape_mismatch(tiny_spec, tiny_schedule, tiny_params):
    with pytest.raises(ShapeError):
        loss_and_grad(tiny_params, tiny_spec, tiny_schedule, np.zeros(4), 3, np.zeros(5))
    with pytest.raises(ShapeError):
        denoiser_forward(tiny_params, tiny_spec, np.zeros(3), 3)


def test_non_finite_gradient_names_segment(tiny_spec, tiny_schedule, tiny_params):
    values = tiny_params.values.copy()
    values[0] = np.inf
    with pytest.raises(NumericError) as info:
        loss_and_grad(
            tiny_params.with_values(values), tiny_spec, tiny_schedule, np.ones(4), 3, np.ones(4)
        )
    assert info.value.where is not None


def test_layout_and_parameter_count(tiny_spec):
    layout = tiny_spec.layout()
    names = [segment.name for segment in layout]

    assert names[0] == "hidden0.weight"
    assert names[-1] == "output.bias"
    assert layout[0].shape == (8, 4 + 4)
    assert tiny_spec.num_parameters == (8 * 8 + 8) + (8 * 8 + 8) + (4 * 8 + 4)


def test_parameter_vector_rejects_bad_layout():
    layout = build_layout([("a", (2,)), ("b", (3,))])
    with pytest.raises(ShapeError):
        ParameterVector(np.zeros(4), layout)


def test_segment_lookup(tiny_params):
    assert tiny_params.segment("output.bias").shape == (4,)
    with pytest.raises(KeyError):
        tiny_params.segment("missing")


def test_init_is_seeded(tiny_spec):
    a = init_params(tiny_spec, seed=[7, 0])
    b = init_params(tiny_spec, seed=[7, 0])
    c = init_params(tiny_spec, seed=[8, 0])

    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_time_embedding_shape_and_range():
    embedding = time_embedding(25, 6)
    assert embedding.shape == (6,)
    assert np.all(np.abs(embedding) <= 1.0)


def test_gradient_vector_helpers():
    grad = GradientVector(np.array([3.0, 4.0]))

    assert grad.norm == 5.0
    assert grad.dot(np.array([1.0, 1.0])) == 7.0
    np.testing.assert_allclose(grad.unit(1e-12).values, [0.6, 0.8])
    assert grad.scaled(2.0).norm == 10.0
    with pytest.raises(ArgumentError):
        GradientVector(np.zeros(2)).unit(1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        DenoiserSpec(input_dim=4, time_embed_dim=3)
    with pytest.raises(ValueError):
        DenoiserSpec(input_dim=4, hidden_dims=())


def test_hvp_matches_gradient_difference(tiny_spec, tiny_schedule, tiny_params, rng):
    x0, eps = rng.standard_normal(4), rng.standard_normal(4)
    vector = rng.standard_normal(tiny_params.size)
    h = 1e-5

    hvp = loss_hvp(tiny_params, tiny_spec, tiny_schedule, x0, 20, eps, vector)

    _, plus = loss_and_grad(
        tiny_params.with_values(tiny_params.values + h * vector), tiny_spec, tiny_schedule, x0, 20, eps
    )
    _, minus = loss_and_grad(
        tiny_params.with_values(tiny_params.values - h * vector), tiny_spec, tiny_schedule, x0, 20, eps
    )
    np.testing.assert_allclose(hvp, (plus.values - minus.values) / (2 * h), rtol=1e-3, atol=1e-7)
