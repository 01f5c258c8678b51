import json

import numpy as np
import pytest

from conftest import CannedTransport, offline_pipeline
from flowdisagg import disagg as dg
from flowdisagg.cli import DEFAULTS, main
from flowdisagg.ingest import SynthConfig, synth_generate
from flowdisagg.timeseries import build_windows, read_csv

SMALL_TRAIN = ["--epochs", "3", "--hidden-size", "4", "--ffn-hidden", "8", "8"]


@pytest.fixture
def key(monkeypatch):
    monkeypatch.setenv("HYDAPI_KEY", "test-key")


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["synth", "--out", str(out), "--n-days", "30", "--seed", "3"]) == 0
    return out


def echoed(out, command):
    return json.loads((out / f"config_{command}.json").read_text())


class TestFetch:
    def test_offline_cold_cache(self, tmp_path, capsys):
        rc = main(["fetch", "--offline", "--out", str(tmp_path), "--start", "2018-12-04", "--end", "2018-12-05"])
        assert rc == 2
        assert "offline" in capsys.readouterr().err

    def test_fixture_then_cache(self, tmp_path, fixture_text, key, caplog):
        t = CannedTransport({"hydapi": fixture_text("hydapi_daily.json"),
                             "archive": fixture_text("openmeteo_hourly.json")})
        argv = ["fetch", "--out", str(tmp_path), "--start", "2018-12-04", "--end", "2018-12-05"]
        assert main(argv, transport=t) == 0
        assert len(t.calls) == 2 and any((tmp_path / "cache").glob("*.json"))
        flow = read_csv(tmp_path / "daily_flow.csv")
        np.testing.assert_array_equal(flow.column("flow"), [3.125, 2.981])
        assert len(read_csv(tmp_path / "hourly_weather.csv")) == 48
        assert len(read_csv(tmp_path / "daily_weather.csv")) == 2

        caplog.set_level("INFO")
        assert main(argv + ["--offline"], transport=t) == 0
        assert len(t.calls) == 2
        assert "served from cache" in caplog.text

    def test_missing_key(self, tmp_path, monkeypatch):
        monkeypatch.delenv("HYDAPI_KEY", raising=False)
        t = CannedTransport({})
        assert main(["fetch", "--out", str(tmp_path), "--start", "2018-12-04", "--end", "2018-12-05"], t) == 1
        assert t.calls == []

    def test_bad_payload(self, tmp_path, key):
        t = CannedTransport({"hydapi": "{broken", "archive": "{}"})
        assert main(["fetch", "--out", str(tmp_path), "--start", "2018-12-04", "--end", "2018-12-05"], t) == 3


class TestValidation:
    def test_synth_too_short(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--n-days", "5"]) == 1

    def test_missing_checkpoint(self, tmp_path, synth_dir):
        assert main(["disagg", "--data", str(synth_dir), "--checkpoint", str(tmp_path / "none.json"),
                     "--out", str(tmp_path)]) == 1

    def test_train_needs_data(self, tmp_path):
        assert main(["train", "--out", str(tmp_path)]) == 1

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text('{"epochz": 3}')
        assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 1

    def test_span_and_days_exclusive(self):
        with pytest.raises(SystemExit):
            main(["disagg", "--span", "all", "--days", "2018-12-20"])


class TestConfig:
    def test_precedence(self, tmp_path, synth_dir):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"epochs": 2, "hidden_size": 3}))
        base = ["train", "--data", str(synth_dir), "--config", str(cfg), "--ffn-hidden", "4"]
        assert main(base + ["--out", str(tmp_path / "a")]) == 0
        a = echoed(tmp_path / "a", "train")
        assert a["epochs"] == 2 and a["hidden_size"] == 3 and a["lr"] == DEFAULTS["lr"]
        assert main(base + ["--epochs", "1", "--out", str(tmp_path / "b")]) == 0
        assert echoed(tmp_path / "b", "train")["epochs"] == 1

    def test_global_flag_before_subcommand(self, tmp_path):
        assert main(["--seed", "9", "--out", str(tmp_path), "synth", "--n-days", "10"]) == 0
        assert echoed(tmp_path, "synth")["seed"] == 9


def test_cli_matches_api(tmp_path, synth_dir):
    out = tmp_path / "run"
    assert main(["train", "--data", str(synth_dir), "--out", str(out), "--seed", "5"] + SMALL_TRAIN) == 0
    assert main(["disagg", "--data", str(synth_dir), "--checkpoint", str(out / "checkpoint.json"),
                 "--out", str(out), "--span", "all"]) == 0

    d = synth_generate(SynthConfig(n_days=30, seed=3))
    windows = build_windows(d.daily_weather, d.daily_flow, d.hourly_weather, d.hourly_flow)
    train_w, _ = dg.split_windows(windows)
    model, _ = dg.train(train_w, dg.TrainConfig(hidden_size=4, ffn_hidden=(8, 8), epochs=3, seed=5))
    api_ck = dg.save_checkpoint(model, tmp_path / "api.json")
    assert api_ck.read_bytes() == (out / "checkpoint.json").read_bytes()
    api_res = dg.write_results_csv([dg.disaggregate_day(model, w) for w in windows], tmp_path / "api.csv")
    assert api_res.read_bytes() == (out / "results.csv").read_bytes()


def test_disagg_spans(tmp_path, synth_dir):
    out = tmp_path / "run"
    main(["train", "--data", str(synth_dir), "--out", str(out)] + SMALL_TRAIN)
    ck = str(out / "checkpoint.json")
    counts = {}
    for span in ("train", "test", "all"):
        o = tmp_path / span
        assert main(["disagg", "--data", str(synth_dir), "--checkpoint", ck, "--out", str(o), "--span", span]) == 0
        counts[span] = len(dg.read_results_csv(o / "results.csv"))
    assert counts["train"] + counts["test"] == counts["all"] == 24
    o = tmp_path / "days"
    assert main(["disagg", "--data", str(synth_dir), "--checkpoint", ck, "--out", str(o),
                 "--days", "2018-12-20", "2018-12-21"]) == 0
    assert [r.day_id.isoformat() for r in dg.read_results_csv(o / "results.csv")] == ["2018-12-20", "2018-12-21"]
    assert main(["disagg", "--data", str(synth_dir), "--checkpoint", ck, "--out", str(o),
                 "--days", "2018-12-05"]) == 1


def test_offline_warm_cache_pipeline(tmp_path, key):
    d, t, n_warm, data, run = offline_pipeline(tmp_path, SMALL_TRAIN)
    assert n_warm == 2 and len(t.calls) == 2
    np.testing.assert_array_equal(read_csv(data / "daily_flow.csv").values, d.daily_flow.values)
    np.testing.assert_array_equal(read_csv(data / "daily_weather.csv").values, d.daily_weather.values)
    assert (run / "report.csv").exists() and (run / "summary.csv").exists()
    assert len(list((run / "figures").glob("*.svg"))) == 3
