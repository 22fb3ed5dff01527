import math
from fractions import Fraction

import numpy as np
import pytest

from veridl.codec import ScaledInt
from veridl.dnn.network import NetworkConfig, feedforward, training_step
from veridl.dnn.pipeline import (
    QuantizedModel,
    RoundFaults,
    commitment_rounds,
    converged_model,
    error_value,
    run_round,
    within_threshold,
)
from veridl.dnn.training import certified_rounds, initial_model, train_epochs, train_to_convergence
from veridl.errors import ConvergenceError


@pytest.fixture(scope="module")
def setting(small_dataset, params):
    config = NetworkConfig(input_dim=2, hidden_sizes=(3, 2), learning_rate=0.5)
    model = initial_model(config, 3)
    return config, model, small_dataset, params


def test_round_matches_plain_forward(setting):
    config, model, ds, params = setting
    q = QuantizedModel.from_state(model, params)
    record = run_round(q, ds, config, params)
    plain = feedforward(q.to_state(params), config, ds.feature_matrix()).output
    for sample, o in zip(record.samples, plain):
        assert abs(sample.output - o) < 1e-9
    expected = sum((y - s.encoded_output) ** 2 for y, s in zip(ds.labels, record.samples))
    assert record.error_sum == ScaledInt(expected, 2)


def test_update_tracks_plain_gradient_step(setting):
    config, model, ds, params = setting
    q = QuantizedModel.from_state(model, params)
    rounds = commitment_rounds(q, ds, config, params)
    stepped, _ = training_step(q.to_state(params), config, ds.feature_matrix(), ds.label_vector())
    got = rounds.backprop.updated.to_state(params).flatten()
    np.testing.assert_allclose(got, stepped.flatten(), atol=1e-4)


def test_rounds_are_deterministic(setting):
    config, model, ds, params = setting
    q = QuantizedModel.from_state(model, params)
    assert commitment_rounds(q, ds, config, params) == commitment_rounds(q, ds, config, params)


def test_error_value_is_exact(params):
    n = 4
    s = ScaledInt(3 * params.unit(2), 2)
    assert error_value(s, n, params) == Fraction(3, 8)


def test_threshold_rules(params):
    unit2 = params.unit(2)
    assert within_threshold(0, 10 ** 30, 5, math.inf, params)
    # gap just under 1e-4
    assert within_threshold(0, 2 * 5 * unit2 // 10000, 5, 1e-4, params)
    assert not within_threshold(0, 2 * 5 * unit2 // 1000, 5, 1e-4, params)


def test_faults_change_only_the_first_round(setting):
    config, model, ds, params = setting
    q = QuantizedModel.from_state(model, params)
    clean = commitment_rounds(q, ds, config, params)
    faulty = commitment_rounds(q, ds, config, params, RoundFaults(outputs={0: 0.999}))
    assert faulty.first.samples[0].output == 0.999
    assert faulty.first.samples[1:] == clean.first.samples[1:]
    assert faulty.first.samples[0].z == clean.first.samples[0].z
    assert not RoundFaults()


def test_training_converges_on_the_commitment_pipeline(small_dataset, params):
    config = NetworkConfig(input_dim=2, hidden_sizes=(3,), learning_rate=0.5, convergence_threshold=1e-4)
    result = train_to_convergence(initial_model(config, 1), config, small_dataset, params)
    assert result.epochs >= 1
    assert abs(result.e1 - result.e2) <= Fraction(1e-4)
    assert result.rounds.first.model == converged_model(result.initial, result.update, params)
    assert result.n == small_dataset.size
    again = certified_rounds(result.initial, result.update, small_dataset, config, params)
    assert again == result.rounds


def test_infinite_threshold_stops_after_one_epoch(small_dataset, params):
    config = NetworkConfig(input_dim=2, hidden_sizes=(2,), convergence_threshold=math.inf)
    result = train_to_convergence(initial_model(config, 1), config, small_dataset, params)
    assert result.epochs == 1


def test_non_convergence_is_reported(small_dataset, params):
    config = NetworkConfig(input_dim=2, hidden_sizes=(2,), convergence_threshold=1e-15, max_epochs=3)
    with pytest.raises(ConvergenceError):
        train_to_convergence(initial_model(config, 1), config, small_dataset, params)


def test_train_epochs_applies_transform(small_dataset, params):
    config = NetworkConfig(input_dim=2, hidden_sizes=(2,))
    out = train_epochs(initial_model(config, 2), config, small_dataset, 3, transform=lambda m: m.scaled(0.0))
    assert not np.any(out.flatten())
