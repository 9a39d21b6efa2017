"""Forecaster internals: gradients, training alignment, persistence."""

import math

import numpy as np
import pytest
from sklearn.base import clone

from hybridra.predictor import (
    AttentionLstmRegressor,
    _forward_batch,
    attend,
    forward,
    initialize_network,
    load_forecaster,
    loss_and_gradients,
    lstm_forward,
    network_parameters,
    predict_count,
    rms_error,
    save_forecaster,
    train_forecaster,
    training_pairs,
    underprediction_rate,
)
from hybridra.traffic import TrafficTrace, generate_trace


def finite_difference_check(attention, seed, step=1e-5, tol=1e-4):
    """Compare every analytic gradient entry against central differences."""
    rng = np.random.default_rng(seed)
    net = initialize_network(3, 4, rng, attention=attention)
    xn = rng.poisson(6.0, size=(5, 3)).astype(float) / 10.0
    yn = (rng.poisson(6.0, size=5).astype(float) + 1.0) / 10.0
    _, grads = loss_and_gradients(net, xn, yn)
    params = network_parameters(net)
    worst = 0.0
    for name, tensor in params.items():
        flat = tensor.reshape(-1)
        grad = grads[name].reshape(-1)
        for idx in range(flat.size):
            saved = flat[idx]
            flat[idx] = saved + step
            up, _ = loss_and_gradients(net, xn, yn)
            flat[idx] = saved - step
            down, _ = loss_and_gradients(net, xn, yn)
            flat[idx] = saved
            numeric = (up - down) / (2 * step)
            denom = max(abs(numeric) + abs(grad[idx]), 1e-6)
            worst = max(worst, abs(numeric - grad[idx]) / denom)
    assert worst < tol, worst


def stub_model(trace, hidden_size=4, attention=True, seed=0, window=5, horizon=5):
    """Fit with a vanishing learning rate: the network stays at its init."""
    return train_forecaster(
        trace,
        window=window,
        horizon=horizon,
        hidden_size=hidden_size,
        epochs=1,
        learning_rate=1e-12,
        attention=attention,
        random_state=seed,
    )


class TestGradients:
    def test_attention_network_matches_finite_differences(self):
        finite_difference_check(attention=True, seed=101)

    def test_plain_network_matches_finite_differences(self):
        finite_difference_check(attention=False, seed=102)

    def test_zero_loss_gives_zero_gradients(self):
        rng = np.random.default_rng(103)
        net = initialize_network(3, 4, rng)
        xn = rng.normal(size=(2, 3))
        yn, _ = _forward_batch(net, xn)
        loss, grads = loss_and_gradients(net, xn, yn)
        assert loss == 0.0
        assert all(np.all(g == 0.0) for g in grads.values())


class TestBuildingBlocks:
    def test_lstm_forward_shapes(self):
        rng = np.random.default_rng(104)
        net = initialize_network(4, 6, rng)
        states, (h, c) = lstm_forward(net.layer1, rng.normal(size=(4, 1)))
        assert states.shape == (4, 6)
        assert h.shape == (6,) and c.shape == (6,)
        np.testing.assert_allclose(states[-1], h)

    def test_lstm_forward_initial_state_continues_a_run(self):
        rng = np.random.default_rng(117)
        net = initialize_network(4, 6, rng)
        xs = rng.normal(size=(4, 1))
        full, _ = lstm_forward(net.layer1, xs)
        head, carry = lstm_forward(net.layer1, xs[:2])
        tail, _ = lstm_forward(net.layer1, xs[2:], initial=carry)
        np.testing.assert_allclose(np.vstack([head, tail]), full, atol=1e-12)

    def test_attention_weights_sum_to_one(self):
        rng = np.random.default_rng(105)
        net = initialize_network(5, 6, rng)
        context = rng.normal(size=(5, 6))
        query = rng.normal(size=6)
        pooled, weights = attend(net.attention, context, query)
        assert pooled.shape == (6,)
        assert weights.shape == (5,)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.all(weights >= 0.0)

    def test_prediction_is_ceiling_clamped(self):
        # zero weights make the forecast exactly head_b * scale
        rng = np.random.default_rng(118)
        net = initialize_network(3, 4, rng)
        for tensor in network_parameters(net).values():
            tensor[...] = 0.0
        window = [5.0, 6.0, 7.0]
        for bias, expected in [(0.21, 3), (0.2, 2), (-0.07, 0)]:
            net.head_b[0] = bias
            assert forward(net, window, scale=10.0) == pytest.approx(bias * 10.0)
            assert predict_count(net, window, scale=10.0) == expected

    def test_network_parameter_names(self):
        rng = np.random.default_rng(106)
        with_att = set(network_parameters(initialize_network(3, 4, rng)))
        without = set(network_parameters(initialize_network(3, 4, rng, attention=False)))
        assert {"attention.v", "attention.w_context", "attention.w_query"} <= with_att
        assert without == with_att - {"attention.v", "attention.w_context", "attention.w_query"}


class TestTrainingPairs:
    def test_hand_worked_alignment(self):
        trace = TrafficTrace(np.array([3, 1, 4, 1, 5]), lam=3.0, slot_count=5)
        inputs, labels, anchors = training_pairs(trace, window=2, horizon=2)
        np.testing.assert_array_equal(inputs, [[1, 4], [4, 1], [1, 5]])
        np.testing.assert_array_equal(labels, [4, 4, 5])
        np.testing.assert_array_equal(anchors, [3, 1, 4])

    def test_label_always_covers_anchor(self):
        rng = np.random.default_rng(107)
        trace = generate_trace(6.0, 500, rng)
        _, labels, anchors = training_pairs(trace, window=5, horizon=5)
        assert np.all(labels >= anchors)

    def test_too_short_trace_rejected(self):
        trace = TrafficTrace(np.array([1, 2, 3]), lam=2.0, slot_count=3)
        with pytest.raises(ValueError):
            training_pairs(trace, window=3, horizon=3)


class TestTraining:
    def test_constant_trace_is_learned(self):
        counts = np.full(400, 7)
        trace = TrafficTrace(counts, lam=7.0, slot_count=400)
        model = train_forecaster(
            trace, window=3, horizon=2, hidden_size=8, epochs=200, random_state=0
        )
        assert model.loss_history_[-1] < 0.05
        assert rms_error(model, trace) < 0.5

    def test_loss_decreases(self):
        rng = np.random.default_rng(108)
        trace = generate_trace(6.0, 3000, rng)
        model = train_forecaster(trace, hidden_size=8, epochs=5, random_state=1)
        assert model.loss_history_[-1] < model.loss_history_[0]

    def test_bias_head_starts_near_label_mean(self):
        # before any real fitting the model is a sane constant predictor
        rng = np.random.default_rng(109)
        trace = generate_trace(6.0, 2000, rng)
        model = stub_model(trace, hidden_size=8, seed=2)
        inputs, labels, _ = training_pairs(trace, 5, 5)
        preds = model.predict_value(inputs[:200])
        assert abs(np.mean(preds) - np.mean(labels)) < 1.5


class TestUnderprediction:
    def test_zero_network_underpredicts_like_positive_rate(self):
        # a forecaster stuck at zero misses every slot with arrivals
        rng = np.random.default_rng(110)
        trace = generate_trace(6.0, 4000, rng)
        model = stub_model(trace, seed=3)
        for tensor in network_parameters(model.network_).values():
            tensor[...] = 0.0
        rate = underprediction_rate(model, trace)
        expected = 1.0 - math.exp(-6.0)
        assert abs(rate - expected) < 0.02

    def test_huge_bias_never_underpredicts(self):
        rng = np.random.default_rng(111)
        trace = generate_trace(6.0, 2000, rng)
        model = stub_model(trace, seed=4)
        model.network_.head_b[0] = 50.0
        assert underprediction_rate(model, trace) == 0.0
        assert underprediction_rate(model, trace, against="label") == 0.0

    def test_against_argument_validated(self):
        rng = np.random.default_rng(116)
        trace = generate_trace(6.0, 2000, rng)
        model = stub_model(trace, seed=5)
        with pytest.raises(ValueError):
            underprediction_rate(model, trace, against="median")


class TestEstimatorApi:
    def test_get_params_round_trip(self):
        model = AttentionLstmRegressor(hidden_size=12, epochs=2, random_state=5)
        params = model.get_params()
        assert params["hidden_size"] == 12 and params["attention"] is True
        twin = clone(model)
        assert twin.get_params() == params

    def test_fit_predict_shapes(self):
        rng = np.random.default_rng(112)
        X = rng.poisson(6.0, size=(300, 5)).astype(float)
        y = X.max(axis=1) + 1.0
        model = AttentionLstmRegressor(hidden_size=8, epochs=3, random_state=6).fit(X, y)
        assert model.n_features_in_ == 5
        preds = model.predict(X[:7])
        assert preds.shape == (7,) and preds.dtype.kind == "i"
        assert np.all(preds >= 0)

    def test_mismatched_feature_count_rejected(self):
        rng = np.random.default_rng(113)
        X = rng.poisson(6.0, size=(50, 5)).astype(float)
        model = AttentionLstmRegressor(hidden_size=4, epochs=1, random_state=7).fit(
            X, X.max(axis=1)
        )
        with pytest.raises(ValueError):
            model.predict(X[:, :4])

    def test_bad_hyperparameters_rejected(self):
        X = np.ones((10, 3))
        y = np.ones(10)
        with pytest.raises(ValueError):
            AttentionLstmRegressor(epochs=0).fit(X, y)
        with pytest.raises(ValueError):
            AttentionLstmRegressor(learning_rate=0.0).fit(X, y)


class TestPersistence:
    def test_save_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(114)
        trace = generate_trace(6.0, 2000, rng)
        model = train_forecaster(trace, hidden_size=8, epochs=2, random_state=8)
        path = tmp_path / "forecaster.txt"
        save_forecaster(model, path)
        loaded = load_forecaster(path)
        inputs, _, _ = training_pairs(trace, 5, 5)
        np.testing.assert_array_equal(
            model.predict(inputs[:50]), loaded.predict(inputs[:50])
        )
        assert loaded.horizon_ == model.horizon_
        assert loaded.attention == model.attention

    def test_plain_variant_round_trip(self, tmp_path):
        rng = np.random.default_rng(115)
        trace = generate_trace(6.0, 2000, rng)
        model = train_forecaster(
            trace, hidden_size=8, epochs=2, attention=False, random_state=9
        )
        path = tmp_path / "plain.txt"
        save_forecaster(model, path)
        loaded = load_forecaster(path)
        inputs, _, _ = training_pairs(trace, 5, 5)
        np.testing.assert_array_equal(
            model.predict(inputs[:50]), loaded.predict(inputs[:50])
        )

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.txt"
        path.write_text("not a forecaster\n")
        with pytest.raises(ValueError):
            load_forecaster(path)
