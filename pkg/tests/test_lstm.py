# Copyright 2024 egosocial developers

import math

import numpy as np
import pytest

from egosocial.exceptions import InsufficientDataError, MissingLabelError
from egosocial.lstm import (PARAMETER_NAMES, PRESETS, Hyperparameters, NetworkConfig, SearchSpace,
                            compute_gradients, confusion_metrics, evaluate, forward, grid_search, init_network,
                            log_loss, predict, preset_config, sample_search_space, stratified_folds, train)
from egosocial.signals import TimeSeries


def separable(count=12, steps=5, seed=0):
    """Single feature series, constant +1 (positive) or -1 (negative) plus small noise."""
    rng = np.random.default_rng(seed)
    result = []
    for n in range(count):
        label = n % 2 == 0
        matrix = np.full((steps, 1), 1.0 if label else -1.0) + rng.normal(0, 0.05, (steps, 1))
        result.append(TimeSeries("SIC1", matrix, f"s{n}", label=label))
    return result


def sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def test_same_seed_same_weights():
    a = init_network(NetworkConfig(input_dim=5, cell_count=7, rng_seed=42))
    b = init_network(NetworkConfig(input_dim=5, cell_count=7, rng_seed=42))
    assert set(a.weights) == set(PARAMETER_NAMES)
    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(a.weights[name], b.weights[name])


def test_output_layer_shape():
    network = init_network(NetworkConfig(input_dim=5, cell_count=100))
    assert network.weights["w_y"].shape == (100,)
    assert network.weights["b_y"].shape == (1,)
    assert network.weights["w_i"].shape == (100, 5)
    assert network.weights["r_o"].shape == (100, 100)


def test_zero_init_scale_keeps_forget_bias():
    network = init_network(NetworkConfig(input_dim=3, cell_count=4, init_scale=0.0))
    for name in PARAMETER_NAMES:
        expected = 1.0 if name == "b_f" else 0.0
        assert np.all(network.weights[name] == expected)


def test_zero_network_outputs_one_half():
    network = init_network(NetworkConfig(input_dim=3, cell_count=4, init_scale=0.0))
    network.weights["b_f"][:] = 0.0
    series = np.random.default_rng(1).standard_normal((9, 3))
    assert forward(network, series) == 0.5
    assert predict(network, series) == (1, 0.5)


def test_one_cell_one_step_by_hand():
    network = init_network(NetworkConfig(input_dim=1, cell_count=1, init_scale=0.0))
    values = {"w_z": 0.3, "w_i": -0.4, "w_f": 0.2, "w_o": 0.6, "b_z": 0.1, "b_i": 0.05, "b_o": -0.2,
              "p_o": 0.7, "w_y": 1.5, "b_y": -0.3}
    for name, value in values.items():
        network.weights[name][...] = value
    x = 0.5
    z = math.tanh(0.3 * x + 0.1)
    i = sigmoid(-0.4 * x + 0.05)
    c = z * i
    o = sigmoid(0.6 * x + 0.7 * c - 0.2)
    h = math.tanh(c) * o
    expected = sigmoid(1.5 * h - 0.3)
    assert forward(network, np.array([[x]])) == pytest.approx(expected, abs=1e-12)


def test_single_step_series_starts_from_zero_state():
    network = init_network(NetworkConfig(input_dim=3, cell_count=4, init_scale=0.5, rng_seed=5))
    w = network.weights
    x = np.random.default_rng(6).standard_normal(3)
    z = np.tanh(w["w_z"] @ x + w["b_z"])
    i = 1.0 / (1.0 + np.exp(-(w["w_i"] @ x + w["b_i"])))
    c = z * i
    o = 1.0 / (1.0 + np.exp(-(w["w_o"] @ x + w["p_o"] * c + w["b_o"])))
    expected = sigmoid(float(w["w_y"] @ (np.tanh(c) * o) + w["b_y"][0]))
    assert forward(network, x[np.newaxis, :]) == pytest.approx(expected, abs=1e-12)

    # recurrent, forget and input peephole weights only see the zero state
    unused = ("r_z", "r_i", "r_f", "r_o", "p_i", "p_f", "w_f", "b_f")
    shifted = network._replace(weights={k: v + 3.0 if k in unused else v for k, v in w.items()})
    assert forward(shifted, x[np.newaxis, :]) == pytest.approx(expected, abs=1e-12)


def test_inverted_dropout_with_full_mask():
    config = NetworkConfig(input_dim=2, cell_count=6, dropout_rate=0.5, init_scale=0.5, rng_seed=3)
    network = init_network(config)
    series = np.random.default_rng(2).standard_normal((4, 2))
    doubled = network._replace(weights=dict(network.weights, w_y=network.weights["w_y"] * 2.0))
    trained_mode = forward(network, series, train_mode=True, dropout_mask=np.ones(6, dtype=bool))
    assert trained_mode == pytest.approx(forward(doubled, series), abs=1e-14)
    assert forward(network, series) != pytest.approx(trained_mode)


def test_train_mode_dropout_needs_randomness():
    network = init_network(NetworkConfig(input_dim=2, cell_count=3, dropout_rate=0.5))
    with pytest.raises(ValueError):
        forward(network, np.zeros((2, 2)), train_mode=True)


def test_dimension_mismatch():
    network = init_network(NetworkConfig(input_dim=2, cell_count=3))
    with pytest.raises(ValueError):
        forward(network, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        compute_gradients(network, np.zeros((0, 2)), 1)


def test_log_loss():
    assert log_loss(0.5, 1) == pytest.approx(math.log(2))
    assert log_loss(0.0, 1) == pytest.approx(-math.log(1e-12))
    assert log_loss(1.0, 0) == pytest.approx(-math.log(1e-12))


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    config = NetworkConfig(input_dim=3, cell_count=4, dropout_rate=0.3, init_scale=0.5, rng_seed=seed)
    network = init_network(config)
    series = rng.standard_normal((10, 3))
    label = bool(seed % 2)
    mask = rng.random(4) >= 0.3
    grads, loss = compute_gradients(network, series, label, dropout_mask=mask)
    assert loss == pytest.approx(log_loss(forward(network, series, True, mask), label))

    eps = 1e-5
    worst = 0.0
    for name in PARAMETER_NAMES:
        value = network.weights[name]
        for index in np.ndindex(value.shape):
            original = value[index]
            value[index] = original + eps
            plus = log_loss(forward(network, series, True, mask), label)
            value[index] = original - eps
            minus = log_loss(forward(network, series, True, mask), label)
            value[index] = original
            numeric = (plus - minus) / (2 * eps)
            analytic = grads[name][index]
            worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-4))
    assert worst < 1e-5


def test_training_separates_constant_series():
    series_set = separable(count=20)
    config = NetworkConfig(input_dim=1, cell_count=8, learning_rate=0.1, momentum=0.9, batch_size=4,
                           epochs=50, rng_seed=1)
    network, report = train(init_network(config), series_set)
    assert report.accuracy == 1.0
    assert len(report.epoch_losses) == 50
    assert report.epoch_losses[-1] < report.epoch_losses[0]
    assert evaluate(network, series_set).accuracy == 1.0


def test_zero_learning_rate_is_a_no_op():
    config = NetworkConfig(input_dim=1, cell_count=3, learning_rate=0.0, momentum=0.0, batch_size=2, epochs=3)
    start = init_network(config)
    trained, _ = train(start, separable())
    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(trained.weights[name], start.weights[name])


def test_training_leaves_input_network_untouched():
    config = NetworkConfig(input_dim=1, cell_count=3, learning_rate=0.1, batch_size=2, epochs=2)
    start = init_network(config)
    before = {k: v.copy() for k, v in start.weights.items()}
    train(start, separable())
    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(start.weights[name], before[name])


def test_training_is_thread_count_independent():
    config = NetworkConfig(input_dim=1, cell_count=5, dropout_rate=0.3, learning_rate=0.05, momentum=0.7,
                           batch_size=6, epochs=4, rng_seed=9)
    single, report_single = train(init_network(config), separable(count=18))
    threaded, report_threaded = train(init_network(config), separable(count=18), config._replace(threads=8))
    assert report_single.epoch_losses == report_threaded.epoch_losses
    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(single.weights[name], threaded.weights[name])


def test_training_is_reproducible_for_a_seed():
    config = NetworkConfig(input_dim=1, cell_count=5, dropout_rate=0.3, learning_rate=0.05, momentum=0.7,
                           batch_size=4, epochs=5, rng_seed=11)
    first, report_first = train(init_network(config), separable(count=16))
    second, report_second = train(init_network(config), separable(count=16))
    assert report_first.epoch_losses == report_second.epoch_losses
    for name in PARAMETER_NAMES:
        np.testing.assert_array_equal(first.weights[name], second.weights[name])

    other, report_other = train(init_network(config._replace(rng_seed=12)), separable(count=16))
    assert report_other.epoch_losses != report_first.epoch_losses


def test_training_requires_labels():
    series_set = separable()
    series_set[3] = series_set[3]._replace(label=None)
    with pytest.raises(MissingLabelError, match="s3"):
        train(init_network(NetworkConfig(input_dim=1, cell_count=2)), series_set)


def test_presets():
    assert PRESETS["sid4"] == Hyperparameters(0.001, 0.5, 0.0, 20, 100, 100)
    config = preset_config("SID4", input_dim=5, epochs=1)
    assert (config.cell_count, config.batch_size, config.epochs) == (100, 20, 1)
    series_set = [TimeSeries("SID4", np.random.default_rng(n).standard_normal((6, 5)), f"s{n}", label=n % 2 == 0)
                  for n in range(4)]
    network, report = train(init_network(config), series_set)
    assert network.weights["w_y"].shape == (100,)
    assert len(report.epoch_losses) == 1
    with pytest.raises(ValueError):
        preset_config("sid9", input_dim=5)
    with pytest.raises(ValueError):
        preset_config("sic3", input_dim=43, dropout_rate=0.95)


def test_prediction_is_stateless():
    network = init_network(NetworkConfig(input_dim=1, cell_count=3, init_scale=0.5))
    series = separable()[0]
    assert predict(network, series) == predict(network, series)


def test_confusion_metrics():
    labels = [1] * 84 + [0] * 8 + [1] * 16 + [0] * 92
    predictions = [1] * 84 + [1] * 8 + [0] * 16 + [0] * 92
    metrics = confusion_metrics(labels, predictions)
    assert (metrics.tp, metrics.fp, metrics.fn, metrics.tn) == (84, 8, 16, 92)
    assert metrics.precision == pytest.approx(84 / 92)
    assert metrics.recall == pytest.approx(0.84)
    assert metrics.accuracy == pytest.approx(0.88)


def test_confusion_metrics_edge_cases():
    assert confusion_metrics([1, 0, 1], [1, 0, 1])[:3] == (1.0, 1.0, 1.0)
    none_positive = confusion_metrics([1, 0, 1], [0, 0, 0])
    assert (none_positive.precision, none_positive.recall) == (0.0, 0.0)
    with pytest.raises(InsufficientDataError):
        confusion_metrics([], [])


def test_stratified_folds():
    series_set = [TimeSeries("SIC1", np.zeros((2, 1)), f"s{n}", label=n < 6) for n in range(15)]
    parts = stratified_folds(series_set, 3, seed=4)
    assert sorted(n for p in parts for n in p) == list(range(15))
    for part in parts:
        assert sum(1 for n in part if series_set[n].label) == 2
        assert len(part) == 5
    with pytest.raises(InsufficientDataError):
        stratified_folds(series_set[4:], 3)


def test_sampled_values_stay_in_intervals():
    space = SearchSpace()
    candidates = sample_search_space(space, samples_per_axis=3, seed=11)
    assert 1 <= len(candidates) <= 3 ** 6
    for candidate in candidates:
        for name, (low, high) in space._asdict().items():
            assert low <= getattr(candidate, name) <= high
        assert isinstance(candidate.cell_count, int)
        assert isinstance(candidate.batch_size, int)
    assert sample_search_space(space, 3, seed=11) == candidates


def test_single_candidate_is_returned():
    candidate = Hyperparameters(0.05, 0.5, 0.0, 4, 2, 3)
    result = grid_search(separable(), folds=3, candidates=[candidate])
    assert result.best.hyperparameters == candidate
    assert len(result.table) == 1
    assert len(result.table[0].fold_accuracies) == 3


def test_learnable_candidate_wins():
    frozen = Hyperparameters(0.0, 0.0, 0.0, 4, 40, 8)
    learnable = Hyperparameters(0.1, 0.9, 0.0, 2, 80, 4)
    result = grid_search(separable(count=12), folds=3, candidates=[frozen, learnable], seed=2)
    assert result.best.hyperparameters == learnable
    rows = {row.hyperparameters: row.mean_accuracy for row in result.table}
    assert rows[learnable] == 1.0
    assert rows[learnable] >= rows[frozen]
