"""Synthetic paired weather/flow data from an hourly linear reservoir.

Storage ``S`` (mm) is filled by precipitation and temperature-driven melt and
drains as ``Q = k * S`` each hour::

    S[t+1] = S[t] + P[t] + M[t] - Q[t]
    M[t]   = melt_coeff * max(0, T[t])

Flow is reported in the same per-hour storage units, labelled m3/s. Because
melt follows the diurnal temperature cycle and the reservoir lags it, hourly
flow has genuine sub-daily structure that the hourly weather explains.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import NamedTuple

import numpy as np

from ..errors import ConfigurationError
from ..timeseries import HOURS_PER_DAY, Resolution, TimeSeries, aggregate_hourly_to_daily

WEATHER_UNITS = {"precipitation": "mm", "temperature": "degC"}
DAILY_RULES = {"precipitation": "sum", "temperature": "mean"}


@dataclass(frozen=True)
class SynthConfig:
    n_days: int = 400
    seed: int = 42
    k: float = 0.05                   # reservoir outflow fraction per hour
    event_probability: float = 0.08   # chance of rain in any hour
    event_mean_mm: float = 1.0        # mean of exponential rain intensity
    temp_mean: float = 2.0
    temp_amplitude: float = 6.0
    temp_peak_hour: int = 15
    day_anomaly_std: float = 1.5      # stationary std of the AR(1) day-to-day temperature anomaly
    day_anomaly_persistence: float = 0.8
    hour_noise_std: float = 0.5
    melt_coeff: float = 0.2           # mm per degC per hour
    initial_storage: float = 10.0
    start: str = "2018-12-04"

    def __post_init__(self):
        if self.n_days < 8:
            raise ConfigurationError("n_days must be >= 8")
        if not 0.0 < self.k < 1.0:
            raise ConfigurationError("k must lie in (0, 1)")
        if not 0.0 <= self.event_probability <= 1.0:
            raise ConfigurationError("event_probability must lie in [0, 1]")
        if not 0.0 <= self.day_anomaly_persistence < 1.0:
            raise ConfigurationError("day_anomaly_persistence must lie in [0, 1)")
        for name in ("event_mean_mm", "temp_amplitude", "day_anomaly_std", "hour_noise_std",
                     "melt_coeff", "initial_storage"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0")
        if not 0 <= self.temp_peak_hour < HOURS_PER_DAY:
            raise ConfigurationError("temp_peak_hour must lie in [0, 24)")


class SynthData(NamedTuple):
    hourly_weather: TimeSeries
    hourly_flow: TimeSeries
    daily_weather: TimeSeries
    daily_flow: TimeSeries


def simulate_reservoir(precip, melt, k, initial_storage):
    """Hourly outflow of the linear reservoir; also returns the final storage."""
    q = np.empty(len(precip))
    s = float(initial_storage)
    for t in range(len(precip)):
        q[t] = k * s
        s = s + precip[t] + melt[t] - q[t]
    return q, s


def synth_generate(config: SynthConfig = SynthConfig()) -> SynthData:
    rng = np.random.default_rng(config.seed)
    n_hours = config.n_days * HOURS_PER_DAY
    hour = np.arange(n_hours) % HOURS_PER_DAY

    # AR(1) day anomaly scaled to the requested stationary std
    phi = config.day_anomaly_persistence
    shocks = rng.normal(0.0, config.day_anomaly_std * np.sqrt(1.0 - phi * phi), config.n_days)
    anomaly = np.empty(config.n_days)
    anomaly[0] = rng.normal(0.0, config.day_anomaly_std)
    for d in range(1, config.n_days):
        anomaly[d] = phi * anomaly[d - 1] + shocks[d]

    diurnal = config.temp_amplitude * np.cos(2.0 * np.pi * (hour - config.temp_peak_hour) / HOURS_PER_DAY)
    temp = (config.temp_mean + diurnal + np.repeat(anomaly, HOURS_PER_DAY)
            + rng.normal(0.0, config.hour_noise_std, n_hours))
    wet = rng.random(n_hours) < config.event_probability
    precip = np.where(wet, rng.exponential(config.event_mean_mm, n_hours), 0.0)
    melt = config.melt_coeff * np.maximum(temp, 0.0)
    flow, _ = simulate_reservoir(precip, melt, config.k, config.initial_storage)

    start = datetime.fromisoformat(config.start).replace(tzinfo=timezone.utc)
    hourly_weather = TimeSeries(start, Resolution.HOURLY, ("precipitation", "temperature"),
                                np.stack([precip, temp], axis=1), WEATHER_UNITS)
    hourly_flow = TimeSeries(start, Resolution.HOURLY, ("flow",), flow, {"flow": "m3/s"})
    return SynthData(hourly_weather, hourly_flow,
                     aggregate_hourly_to_daily(hourly_weather, DAILY_RULES),
                     aggregate_hourly_to_daily(hourly_flow, {"flow": "mean"}))


def mass_balance(config: SynthConfig, data: SynthData) -> dict:
    """Totals of the storage recurrence; ``residual`` is zero up to rounding."""
    p = data.hourly_weather.column("precipitation")
    m = config.melt_coeff * np.maximum(data.hourly_weather.column("temperature"), 0.0)
    q = data.hourly_flow.column("flow")
    _, final = simulate_reservoir(p, m, config.k, config.initial_storage)
    inflow = config.initial_storage + p.sum() + m.sum()
    return {"initial_storage": config.initial_storage, "precipitation": float(p.sum()), "melt": float(m.sum()),
            "outflow": float(q.sum()), "final_storage": float(final),
            "residual": float(inflow - q.sum() - final)}
