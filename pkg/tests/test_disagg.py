import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from flowdisagg.disagg import (TrainConfig, compute_losses, daily_forward, disaggregate_day, hourly_forward,
                               load_checkpoint, loss_and_grad_fn, mean_correct, prepare_batch, read_results_csv,
                               save_checkpoint, split_windows, train, write_results_csv)
from flowdisagg.errors import ConfigurationError, ShapeError
from flowdisagg.neuralnet import gradcheck


def oracle_losses(model, window):
    """Loss pair from the scalar oracle, fed the model's own scaled inputs."""
    b = prepare_batch(model, [window])
    layers = [(W.tolist(), bb.tolist()) for W, bb in zip(model.ffn.weights, model.ffn.biases)]
    return oracles.window_losses(model.lstm.Wx.tolist(), model.lstm.Wh.tolist(), model.lstm.b.tolist(), layers,
                                 b.context[0].tolist(), b.daily_weather[0].tolist(),
                                 b.hourly_weather[0].tolist(), float(b.target[0]), model.ffn.activation)


def zeroed(model, out_bias):
    arrays = {k: np.zeros_like(a) for k, a in model.parameters().items()}
    arrays[f"ffn.b{len(model.ffn.weights) - 1}"] = np.array([out_bias])
    return model.with_parameters(arrays)


class TestForward:
    def test_zero_network_outputs_bias(self, tiny_model, small_windows):
        m = zeroed(tiny_model, 0.42)
        w = small_windows[0]
        assert np.array_equal(hourly_forward(m, w), np.full(24, 0.42))
        assert daily_forward(m, w) == 0.42

    def test_identical_hourly_rows_identical_outputs(self, tiny_model, small_windows):
        w = small_windows[3]
        flat = np.tile(w.target_hourly_weather[7], (24, 1))
        out = hourly_forward(tiny_model, dataclasses.replace(w, target_hourly_weather=flat))
        assert np.all(out == out[0])

    def test_wrong_feature_count(self, tiny_model, small_windows):
        w = small_windows[0]
        bad = dataclasses.replace(w, target_hourly_weather=w.target_hourly_weather[:, :1],
                                  target_daily_weather=w.target_daily_weather[:1], context=w.context[:, 1:],
                                  weather_variables=("temperature",))
        with pytest.raises(ShapeError):
            hourly_forward(tiny_model, bad)


class TestLosses:
    def test_matches_oracle(self, tiny_model, small_windows):
        for w in small_windows[:4]:
            got = compute_losses(tiny_model, w)
            l1, l2 = oracle_losses(tiny_model, w)
            assert abs(got.loss1 - l1) <= 1e-12 * max(1.0, l1)
            assert abs(got.loss2 - l2) <= 1e-12 * max(1.0, l2)

    def test_total_is_sum(self, tiny_model, small_windows):
        got = compute_losses(tiny_model, small_windows)
        assert got.total == got.loss1 + got.loss2

    def test_batch_is_mean_of_windows(self, tiny_model, small_windows):
        ws = small_windows[:5]
        each = [compute_losses(tiny_model, w) for w in ws]
        got = compute_losses(tiny_model, ws)
        assert abs(got.loss1 - np.mean([e.loss1 for e in each])) < 1e-14
        assert abs(got.loss2 - np.mean([e.loss2 for e in each])) < 1e-14

    def test_weights_scale_terms(self, tiny_model, small_windows):
        base = compute_losses(tiny_model, small_windows[:3])
        got = compute_losses(tiny_model, small_windows[:3], (2.0, 0.5))
        assert got.loss1 == pytest.approx(2 * base.loss1, rel=1e-14)
        assert got.loss2 == pytest.approx(0.5 * base.loss2, rel=1e-14)


class TestGradients:
    def test_full_model_gradcheck(self, tiny_model, small_windows):
        fn = loss_and_grad_fn(tiny_model, small_windows[:3])
        assert gradcheck(fn, tiny_model.parameters(), 1e-5) < 1e-4

    def test_zero_weights_zero_gradient(self, tiny_model, small_windows):
        _, g = loss_and_grad_fn(tiny_model, small_windows[:3], (0.0, 0.0))(tiny_model.parameters())
        assert all(np.all(a == 0.0) for a in g.values())

    def test_hourly_weather_is_dead_without_hourly_loss(self, tiny_model, small_windows):
        w = small_windows[2]
        other = dataclasses.replace(w, target_hourly_weather=w.target_hourly_weather[::-1] * 1.5 + 0.3)
        _, g_a = loss_and_grad_fn(tiny_model, [w], (1.0, 0.0))(tiny_model.parameters())
        _, g_b = loss_and_grad_fn(tiny_model, [other], (1.0, 0.0))(tiny_model.parameters())
        assert all(np.array_equal(g_a[k], g_b[k]) for k in g_a)

    def test_daily_weather_is_dead_without_daily_loss(self, tiny_model, small_windows):
        w = small_windows[2]
        other = dataclasses.replace(w, target_daily_weather=w.target_daily_weather + 5.0)
        _, g_a = loss_and_grad_fn(tiny_model, [w], (0.0, 1.0))(tiny_model.parameters())
        _, g_b = loss_and_grad_fn(tiny_model, [other], (0.0, 1.0))(tiny_model.parameters())
        assert all(np.array_equal(g_a[k], g_b[k]) for k in g_a)


class TestMeanCorrect:
    def test_shift_up(self):
        assert np.array_equal(mean_correct([1.0, 2.0, 3.0], 4.0), [3.0, 4.0, 5.0])

    def test_already_correct(self):
        raw = np.array([0.5, 1.5])
        assert np.array_equal(mean_correct(raw, 1.0), raw)

    def test_non_finite(self):
        with pytest.raises(ValueError):
            mean_correct([1.0, np.nan], 1.0)

    @given(hnp.arrays(np.float64, 24, elements=st.floats(-1e4, 1e4)), st.floats(-1e4, 1e4))
    def test_mean_and_shape_preserved(self, raw, avg):
        out = mean_correct(raw, avg)
        assert abs(out.mean() - avg) <= 1e-9 * max(1.0, abs(avg), np.abs(raw).max())
        d = out - raw
        assert d.max() - d.min() <= 1e-12 * max(1.0, np.abs(raw).max(), abs(avg))


class TestTrain:
    def test_zero_epochs_returns_initialisation(self, small_windows):
        cfg = TrainConfig(hidden_size=4, ffn_hidden=(8, 8), epochs=0, seed=5)
        m, hist = train(small_windows, cfg)
        m2, _ = train(small_windows, cfg)
        assert hist == []
        assert all(np.array_equal(a, m2.parameters()[k]) for k, a in m.parameters().items())
        assert m.optimizer.step == 0

    def test_deterministic(self, small_windows):
        cfg = TrainConfig(hidden_size=4, ffn_hidden=(8, 8), epochs=5, seed=5)
        (m1, h1), (m2, h2) = train(small_windows, cfg), train(small_windows, cfg)
        assert h1 == h2
        assert all(np.array_equal(a, m2.parameters()[k]) for k, a in m1.parameters().items())

    def test_loss_decreases(self, small_windows):
        _, hist = train(small_windows, TrainConfig(hidden_size=4, ffn_hidden=(8, 8), epochs=60, lr=1e-2))
        assert hist[-1].total < hist[0].total

    def test_seed_changes_init(self, small_windows):
        a, _ = train(small_windows, TrainConfig(hidden_size=4, ffn_hidden=(8, 8), epochs=0, seed=1))
        b, _ = train(small_windows, TrainConfig(hidden_size=4, ffn_hidden=(8, 8), epochs=0, seed=2))
        assert not np.array_equal(a.lstm.Wx, b.lstm.Wx)

    def test_empty(self):
        with pytest.raises(ValueError):
            train([])

    def test_metadata_records_split(self, small_windows):
        train_w, _ = split_windows(small_windows)
        m, _ = train(train_w, TrainConfig(hidden_size=4, ffn_hidden=(8, 8), epochs=0))
        assert m.metadata["n_train_windows"] == len(train_w)
        assert m.metadata["train_last_day"] == train_w[-1].day_id.isoformat()

    @pytest.mark.parametrize("kwargs", [{"hidden_size": 0}, {"lr": -1.0}, {"train_fraction": 1.5},
                                        {"activation": "swish"}, {"epochs": -1}])
    def test_bad_config(self, kwargs):
        with pytest.raises(ConfigurationError):
            TrainConfig(**kwargs)


def test_split_is_chronological(small_windows):
    tr, te = split_windows(list(reversed(small_windows)), 0.8)
    assert len(tr) == round(0.8 * len(small_windows)) and len(tr) + len(te) == len(small_windows)
    assert tr[-1].day_id < te[0].day_id


class TestDisaggregateDay:
    def test_conservation(self, tiny_model, small_windows):
        for w in small_windows:
            r = disaggregate_day(tiny_model, w)
            assert abs(r.hourly_flow_corrected.mean() - w.target_daily_flow) <= 1e-9 * max(1.0, w.target_daily_flow)
            d = r.hourly_flow_corrected - r.hourly_flow_raw
            assert d.max() - d.min() < 1e-12

    def test_raw_is_inverse_scaled(self, tiny_model, small_windows):
        w = small_windows[0]
        r = disaggregate_day(tiny_model, w)
        s = tiny_model.flow_scaler
        np.testing.assert_allclose(r.hourly_flow_raw, hourly_forward(tiny_model, w) * s.std[0] + s.mean[0],
                                   rtol=1e-15)


class TestPersistence:
    def test_checkpoint_round_trip(self, tmp_path, small_windows):
        m, _ = train(small_windows, TrainConfig(hidden_size=4, ffn_hidden=(8, 8), epochs=3))
        loaded = load_checkpoint(save_checkpoint(m, tmp_path / "ck.json"))
        for w in small_windows[:5]:
            assert np.array_equal(hourly_forward(m, w), hourly_forward(loaded, w))
        assert loaded.optimizer.step == 3
        assert np.array_equal(loaded.optimizer.v["lstm.Wx"], m.optimizer.v["lstm.Wx"])
        assert save_checkpoint(loaded, tmp_path / "again.json").read_bytes() == (tmp_path / "ck.json").read_bytes()

    def test_not_a_checkpoint(self, tmp_path):
        p = tmp_path / "x.json"
        p.write_text('{"format": "other"}')
        with pytest.raises(ValueError):
            load_checkpoint(p)

    def test_results_round_trip(self, tmp_path, tiny_model, small_windows):
        results = [disaggregate_day(tiny_model, w) for w in small_windows[:3]]
        back = read_results_csv(write_results_csv(results, tmp_path / "r.csv"))
        for a, b in zip(results, back):
            assert a.day_id == b.day_id and a.daily_avg_observed == b.daily_avg_observed
            assert np.array_equal(a.hourly_flow_raw, b.hourly_flow_raw)
            assert np.array_equal(a.hourly_flow_corrected, b.hourly_flow_corrected)
            assert np.array_equal(a.hourly_flow_truth, b.hourly_flow_truth)
