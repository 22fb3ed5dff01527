import numpy as np
import pytest

from veridl.dnn.network import (
    Activation,
    ModelState,
    NetworkConfig,
    dataset_error,
    feedforward,
    flat_gradient,
    training_step,
)
from veridl.errors import ConfigError


@pytest.mark.parametrize("trial", range(10))
def test_backprop_matches_finite_differences(trial):
    rng = np.random.default_rng(trial)
    activation = [Activation.SIGMOID, Activation.TANH, Activation.RELU][trial % 3]
    hidden = tuple(int(d) for d in rng.integers(1, 4, size=1 + trial % 3))
    config = NetworkConfig(input_dim=3, hidden_sizes=hidden, activation=activation)
    model = ModelState.random(config, rng)
    x = rng.uniform(-1, 1, size=(6, 3))
    y = rng.uniform(0, 1, size=6)
    grad = flat_gradient(model, config, x, y)
    flat = model.flatten()
    eps = 1e-6
    numeric = np.empty_like(flat)
    for i in range(flat.size):
        up, down = flat.copy(), flat.copy()
        up[i] += eps
        down[i] -= eps
        numeric[i] = (
            dataset_error(model.unflatten(up), config, x, y) - dataset_error(model.unflatten(down), config, x, y)
        ) / (2 * eps)
    np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-8)


def test_scalar_and_vector_activations_agree():
    z = np.linspace(-30, 30, 41)
    for act in Activation:
        np.testing.assert_allclose(act.apply(z), [act.value_of(float(v)) for v in z], rtol=1e-12, atol=1e-300)
        np.testing.assert_allclose(act.derivative(z), [act.derivative_of(float(v)) for v in z], rtol=1e-12, atol=1e-300)


def test_training_step_lowers_the_error():
    config = NetworkConfig(input_dim=2, hidden_sizes=(4,), learning_rate=0.5)
    rng = np.random.default_rng(0)
    model = ModelState.random(config, rng)
    x = rng.uniform(-1, 1, size=(20, 2))
    y = (x.sum(axis=1) > 0).astype(float)
    before = dataset_error(model, config, x, y)
    for _ in range(20):
        model, _ = training_step(model, config, x, y)
    assert dataset_error(model, config, x, y) < before


def test_flatten_roundtrip_preserves_shapes():
    config = NetworkConfig(input_dim=3, hidden_sizes=(2, 4))
    model = ModelState.random(config, np.random.default_rng(1))
    back = model.unflatten(model.flatten())
    assert back.equals(model)
    assert model.flatten().size == config.parameter_count


def test_feedforward_checks_width():
    config = NetworkConfig(input_dim=2, hidden_sizes=(2,))
    model = ModelState.zeros(config)
    with pytest.raises(ValueError):
        feedforward(model, config, np.zeros(3))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"input_dim": 0},
        {"input_dim": 2, "hidden_sizes": ()},
        {"input_dim": 2, "learning_rate": 0.0},
        {"input_dim": 2, "convergence_threshold": -1.0},
    ],
)
def test_network_config_validation(kwargs):
    with pytest.raises(ConfigError):
        NetworkConfig(**kwargs)
