import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest

from flowdisagg.cli import main
from flowdisagg.disagg import TrainConfig, fit_scalers, init_model
from flowdisagg.errors import FetchError
from flowdisagg.ingest import SynthConfig, synth_generate
from flowdisagg.timeseries import Resolution, TimeSeries, build_windows, write_csv

FIXTURES = Path(__file__).parent / "fixtures"
T0 = datetime(2018, 12, 4, tzinfo=timezone.utc)


class CannedTransport:
    """Serves fixed bodies keyed by URL substring and records every call."""

    def __init__(self, routes):
        self.routes = routes
        self.calls = []

    def get(self, url, params, headers):
        self.calls.append((url, dict(params), dict(headers)))
        for fragment, body in self.routes.items():
            if fragment in url:
                if isinstance(body, Exception):
                    raise body
                return body
        raise FetchError(f"no canned route for {url}", 404)


@pytest.fixture
def fixture_text():
    return lambda name: (FIXTURES / name).read_text()


@pytest.fixture
def canned():
    return CannedTransport


@pytest.fixture(scope="session")
def small_synth():
    return synth_generate(SynthConfig(n_days=40, seed=3))


@pytest.fixture(scope="session")
def small_windows(small_synth):
    d = small_synth
    return build_windows(d.daily_weather, d.daily_flow, d.hourly_weather, d.hourly_flow)


@pytest.fixture
def tiny_model(small_windows):
    """2 weather features, hidden 4, FFN 8x8, scalers from the small windows."""
    cfg = TrainConfig(hidden_size=4, ffn_hidden=(8, 8), seed=11)
    return init_model(("precipitation", "temperature"), fit_scalers(small_windows), cfg)


def daily_series(values, variables=("x",), start=T0):
    return TimeSeries(start, Resolution.DAILY, variables, np.asarray(values, dtype=float))


def hourly_series(values, variables=("x",), start=T0):
    return TimeSeries(start, Resolution.HOURLY, variables, np.asarray(values, dtype=float))


def openmeteo_body(series: TimeSeries, api_names):
    """Encode an hourly series as an Open-Meteo archive response."""
    times = [ts.strftime("%Y-%m-%dT%H:%M") for ts in series.timestamps]
    hourly = {"time": times}
    for name, api in zip(series.variables, api_names):
        hourly[api] = [None if np.isnan(v) else float(v) for v in series.column(name)]
    return json.dumps({"utc_offset_seconds": 0, "hourly": hourly})


def hydapi_body(series: TimeSeries):
    obs = [{"time": ts.strftime("%Y-%m-%dT%H:%M:%SZ"), "value": None if np.isnan(v) else float(v)}
           for ts, v in zip(series.timestamps, series.values[:, 0])]
    return json.dumps({"data": [{"stationId": "X", "parameter": 1001, "observations": obs}]})


def serve_synth(n_days=30, seed=3):
    """Canned HydAPI/Open-Meteo transport backed by a synthetic dataset."""
    d = synth_generate(SynthConfig(n_days=n_days, seed=seed))
    routes = {"hydapi": hydapi_body(d.daily_flow),
              "archive": openmeteo_body(d.hourly_weather, ["precipitation", "temperature_2m"])}
    return d, CannedTransport(routes)


def offline_pipeline(tmp_path, train_flags=()):
    """Warm the cache through a canned transport, then fetch, train, disagg and eval with --offline."""
    d, t = serve_synth()
    cache = tmp_path / "cache"
    span = ["--start", "2018-12-04", "--end", "2019-01-02", "--cache-dir", str(cache)]
    assert main(["fetch", "--out", str(tmp_path / "warm")] + span, transport=t) == 0
    n_warm = len(t.calls)

    data = tmp_path / "data"
    assert main(["fetch", "--offline", "--out", str(data)] + span, transport=t) == 0
    write_csv(d.hourly_flow, data / "hourly_flow.csv")
    run = tmp_path / "run"
    assert main(["--offline", "train", "--data", str(data), "--out", str(run)] + list(train_flags)) == 0
    assert main(["--offline", "disagg", "--data", str(data), "--checkpoint", str(run / "checkpoint.json"),
                 "--out", str(run), "--span", "all"]) == 0
    assert main(["--offline", "eval", "--data", str(data), "--results", str(run / "results.csv"),
                 "--out", str(run)]) == 0
    return d, t, n_warm, data, run


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def check(label, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())
        assert ok, f"{label}: {detail}"
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
