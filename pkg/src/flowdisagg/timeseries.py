"""Fixed-resolution UTC time series, daily aggregation, z-score scaling and model windows.

Missing observations are stored as NaN. Infinite values are rejected on
construction, so "not finite" and "missing" mean the same thing everywhere.
"""
from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, FittingError, ShapeError

log = logging.getLogger(__name__)

HOURS_PER_DAY = 24
DEFAULT_CONTEXT_DAYS = 6
DEFAULT_STD_FLOOR = 1e-8


class Resolution(enum.Enum):
    HOURLY = "hourly"
    DAILY = "daily"

    @property
    def step(self) -> timedelta:
        return timedelta(hours=1) if self is Resolution.HOURLY else timedelta(days=1)


def _as_utc(ts: datetime) -> datetime:
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _midnight(d: date) -> datetime:
    return datetime(d.year, d.month, d.day, tzinfo=timezone.utc)


@dataclass(frozen=True)
class TimeSeries:
    """Observations at a fixed step starting at ``start``.

    ``values`` has shape (n_steps, n_variables). Row ``i`` is the observation at
    ``start + i * resolution.step``; gaps must be present as NaN rows.
    """

    start: datetime
    resolution: Resolution
    variables: tuple
    values: np.ndarray
    units: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        start = _as_utc(self.start)
        midnight = start.replace(hour=0, minute=0, second=0, microsecond=0)
        if self.resolution is Resolution.DAILY and start != midnight:
            raise ConfigurationError(f"daily series must start at 00:00 UTC, got {start.isoformat()}")
        if start.minute or start.second or start.microsecond:
            raise ConfigurationError(f"series must start on a whole hour, got {start.isoformat()}")
        variables = tuple(self.variables)
        if len(set(variables)) != len(variables):
            raise ConfigurationError(f"duplicate variable names: {variables}")
        values = np.array(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] != len(variables):
            raise ShapeError(f"values shape {values.shape} does not match {len(variables)} variables")
        if np.isinf(values).any():
            raise ValueError("infinite values are not allowed; use NaN for missing observations")
        values.setflags(write=False)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "units", dict(self.units))

    def __len__(self):
        return self.values.shape[0]

    @property
    def end(self) -> datetime:
        """Timestamp of the last row."""
        return self.start + (len(self) - 1) * self.resolution.step

    @property
    def timestamps(self) -> list:
        step = self.resolution.step
        return [self.start + i * step for i in range(len(self))]

    @property
    def dates(self) -> list:
        return [ts.date() for ts in self.timestamps]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def column(self, name: str) -> np.ndarray:
        try:
            return self.values[:, self.variables.index(name)]
        except ValueError:
            raise ConfigurationError(f"unknown variable {name!r}; have {list(self.variables)}") from None

    def select(self, names: Sequence[str]) -> "TimeSeries":
        cols = [self.column(n) for n in names]
        return TimeSeries(self.start, self.resolution, tuple(names), np.stack(cols, axis=1),
                          {n: self.units[n] for n in names if n in self.units})

    def with_values(self, values, units=None) -> "TimeSeries":
        return TimeSeries(self.start, self.resolution, self.variables, values,
                          self.units if units is None else units)

    def index_of(self, ts: datetime) -> int:
        """Row index of ``ts``; may fall outside ``[0, len)``."""
        offset = _as_utc(ts) - self.start
        steps, rem = divmod(offset, self.resolution.step)
        if rem:
            raise ConfigurationError(f"{ts} is not on the {self.resolution.value} grid of this series")
        return steps


def aggregate_hourly_to_daily(series: TimeSeries, rules: Mapping[str, str]) -> TimeSeries:
    """Daily mean or sum per variable.

    A day yields a row only when all 24 UTC hours are present for every
    variable; any other day becomes a NaN row.
    """
    if series.resolution is not Resolution.HOURLY:
        raise ConfigurationError("aggregate_hourly_to_daily needs an hourly series")
    unknown = set(rules) - set(series.variables)
    if unknown:
        raise ConfigurationError(f"aggregation rule for unknown variable(s): {sorted(unknown)}")
    absent = [v for v in series.variables if v not in rules]
    if absent:
        raise ConfigurationError(f"no aggregation rule for variable(s): {absent}")
    bad = {v: r for v, r in rules.items() if r not in ("mean", "sum")}
    if bad:
        raise ConfigurationError(f"aggregation rule must be 'mean' or 'sum': {bad}")

    lead = series.start.hour
    n_days = -(-(lead + len(series)) // HOURS_PER_DAY)
    padded = np.full((n_days * HOURS_PER_DAY, len(series.variables)), np.nan)
    padded[lead:lead + len(series)] = series.values
    blocks = padded.reshape(n_days, HOURS_PER_DAY, -1)

    out = np.empty((n_days, len(series.variables)))
    for j, var in enumerate(series.variables):
        reducer = np.mean if rules[var] == "mean" else np.sum
        out[:, j] = reducer(blocks[:, :, j], axis=1)
    complete = np.isfinite(blocks).all(axis=(1, 2))
    out[~complete] = np.nan
    return TimeSeries(_midnight(series.start.date()), Resolution.DAILY, series.variables, out, series.units)


# --- scaling -----------------------------------------------------------------


@dataclass(frozen=True)
class Scaler:
    """Per-feature z-score with a population (divide-by-N) standard deviation."""

    variables: tuple
    mean: np.ndarray
    std: np.ndarray
    floor: float = DEFAULT_STD_FLOOR

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=np.float64))
        object.__setattr__(self, "std", np.maximum(np.asarray(self.std, dtype=np.float64), self.floor))

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def inverse(self, z):
        return np.asarray(z, dtype=np.float64) * self.std + self.mean

    def to_dict(self) -> dict:
        return {"variables": list(self.variables), "mean": self.mean.tolist(),
                "std": self.std.tolist(), "floor": self.floor}

    @classmethod
    def from_dict(cls, d) -> "Scaler":
        return cls(tuple(d["variables"]), d["mean"], d["std"], d["floor"])


def fit_scaler_array(values, variables: Sequence[str], floor: float = DEFAULT_STD_FLOOR) -> Scaler:
    """Fit on a (rows, features) array, ignoring NaN entries."""
    values = np.asarray(values, dtype=np.float64).reshape(-1, len(variables))
    mean = np.empty(len(variables))
    std = np.empty(len(variables))
    for j, name in enumerate(variables):
        col = values[:, j]
        col = col[np.isfinite(col)]
        if col.size < 2:
            raise FittingError(f"feature {name!r} has {col.size} observation(s); need at least 2")
        mean[j] = col.mean()
        std[j] = col.std()
    return Scaler(tuple(variables), mean, std, floor)


def fit_scaler(series: TimeSeries, row_mask=None, floor: float = DEFAULT_STD_FLOOR) -> Scaler:
    """Fit on the rows selected by ``row_mask`` (boolean or index array); all rows if None."""
    values = series.values if row_mask is None else series.values[row_mask]
    return fit_scaler_array(values, series.variables, floor)


def _check_order(scaler: Scaler, series: TimeSeries):
    if scaler.variables != series.variables:
        raise ShapeError(f"feature order mismatch: scaler {list(scaler.variables)} vs series {list(series.variables)}")


def apply_scaler(scaler: Scaler, series: TimeSeries) -> TimeSeries:
    _check_order(scaler, series)
    return series.with_values(scaler.transform(series.values), units={v: "1" for v in series.variables})


def invert_scaler(scaler: Scaler, series: TimeSeries, units=None) -> TimeSeries:
    _check_order(scaler, series)
    return series.with_values(scaler.inverse(series.values), units=units or {})


# --- CSV persistence -----------------------------------------------------------


def _fmt_ts(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_ts(text: str) -> datetime:
    return _as_utc(datetime.fromisoformat(text.replace("Z", "+00:00")))


def write_csv(series: TimeSeries, path) -> Path:
    """Header ``timestamp_utc,<vars>``; empty cell for missing; shortest round-trip float repr."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp_utc", *series.variables])
        for ts, row in zip(series.timestamps, series.values):
            w.writerow([_fmt_ts(ts), *("" if np.isnan(v) else repr(float(v)) for v in row)])
    return path


def read_csv(path, resolution: Optional[Resolution] = None, units=None) -> TimeSeries:
    """Read a series written by :func:`write_csv`.

    The resolution is inferred from the first two timestamps unless given.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "timestamp_utc":
        raise ValueError(f"{path}: expected header starting with 'timestamp_utc'")
    variables = tuple(rows[0][1:])
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    stamps = [_parse_ts(r[0]) for r in body]
    if resolution is None:
        if len(stamps) < 2:
            raise ValueError(f"{path}: cannot infer resolution from a single row")
        delta = stamps[1] - stamps[0]
        resolution = {timedelta(hours=1): Resolution.HOURLY, timedelta(days=1): Resolution.DAILY}.get(delta)
        if resolution is None:
            raise ValueError(f"{path}: unsupported step {delta}")
    for i, ts in enumerate(stamps):
        if ts != stamps[0] + i * resolution.step:
            raise ValueError(f"{path}: row {i + 2} timestamp {ts} breaks the fixed {resolution.value} grid")
    values = np.array([[float(c) if c != "" else np.nan for c in r[1:]] for r in body], dtype=np.float64)
    return TimeSeries(stamps[0], resolution, variables, values.reshape(len(body), len(variables)), units or {})


# --- model windows -------------------------------------------------------------


@dataclass(frozen=True)
class FeatureWindow:
    """One training/prediction unit, in physical units.

    ``context`` rows are (daily weather ..., daily flow), oldest first.
    ``target_hourly_flow`` is evaluation truth only; training never reads it.
    """

    day_id: date
    context: np.ndarray
    target_daily_weather: np.ndarray
    target_hourly_weather: np.ndarray
    target_daily_flow: float
    target_hourly_flow: Optional[np.ndarray] = None
    weather_variables: tuple = ()

    def __post_init__(self):
        ctx = np.asarray(self.context, dtype=np.float64)
        dw = np.asarray(self.target_daily_weather, dtype=np.float64)
        hw = np.asarray(self.target_hourly_weather, dtype=np.float64)
        n_w = dw.shape[0]
        if ctx.ndim != 2 or ctx.shape[1] != n_w + 1:
            raise ShapeError(f"context shape {ctx.shape} incompatible with {n_w} weather features + flow")
        if hw.shape != (HOURS_PER_DAY, n_w):
            raise ShapeError(f"hourly weather block must be ({HOURS_PER_DAY}, {n_w}), got {hw.shape}")
        parts = [ctx, dw, hw, np.array([self.target_daily_flow], dtype=np.float64)]
        truth = None
        if self.target_hourly_flow is not None:
            truth = np.asarray(self.target_hourly_flow, dtype=np.float64).reshape(-1)
            if truth.shape != (HOURS_PER_DAY,):
                raise ShapeError(f"hourly flow truth must have {HOURS_PER_DAY} values, got {truth.shape}")
            parts.append(truth)
            q = float(self.target_daily_flow)
            if abs(truth.mean() - q) > 1e-6 * max(abs(q), 1e-12):
                raise ValueError(f"{self.day_id}: hourly truth mean {truth.mean()} != daily flow {q}")
        if not all(np.isfinite(p).all() for p in parts):
            raise ValueError(f"{self.day_id}: window contains missing values")
        for a in (ctx, dw, hw) + ((truth,) if truth is not None else ()):
            a.setflags(write=False)
        object.__setattr__(self, "context", ctx)
        object.__setattr__(self, "target_daily_weather", dw)
        object.__setattr__(self, "target_hourly_weather", hw)
        object.__setattr__(self, "target_daily_flow", float(self.target_daily_flow))
        object.__setattr__(self, "target_hourly_flow", truth)
        object.__setattr__(self, "weather_variables", tuple(self.weather_variables))


def _hourly_block(hourly: Optional[TimeSeries], day: date) -> Optional[np.ndarray]:
    if hourly is None:
        return None
    i = hourly.index_of(_midnight(day))
    if i < 0 or i + HOURS_PER_DAY > len(hourly):
        return None
    block = hourly.values[i:i + HOURS_PER_DAY]
    return block if np.isfinite(block).all() else None


def build_windows(daily_weather: TimeSeries, daily_flow: TimeSeries, hourly_weather: TimeSeries,
                  hourly_flow: Optional[TimeSeries] = None,
                  context_days: int = DEFAULT_CONTEXT_DAYS) -> list:
    """One :class:`FeatureWindow` per day with complete data, sorted by day.

    Day ``d`` qualifies when days ``d-context_days .. d-1`` have complete daily
    weather and flow, and day ``d`` has complete daily data plus 24 complete
    hourly weather rows. Other days are skipped and counted in the log.
    """
    if daily_weather.resolution is not Resolution.DAILY or daily_flow.resolution is not Resolution.DAILY:
        raise ConfigurationError("daily_weather and daily_flow must be daily series")
    if hourly_weather.resolution is not Resolution.HOURLY:
        raise ConfigurationError("hourly_weather must be an hourly series")
    if hourly_flow is not None and hourly_flow.resolution is not Resolution.HOURLY:
        raise ConfigurationError("hourly_flow must be an hourly series")
    if (daily_weather.start, len(daily_weather)) != (daily_flow.start, len(daily_flow)):
        raise ConfigurationError("daily weather and daily flow must cover the same date span")
    if len(daily_flow.variables) != 1:
        raise ConfigurationError(f"daily flow must have exactly one variable, got {list(daily_flow.variables)}")
    if daily_weather.variables != hourly_weather.variables:
        raise ConfigurationError(
            f"daily and hourly weather must share one schema: {list(daily_weather.variables)} "
            f"vs {list(hourly_weather.variables)}")
    if context_days < 1:
        raise ConfigurationError("context_days must be >= 1")

    daily = np.concatenate([daily_weather.values, daily_flow.values], axis=1)
    daily_ok = np.isfinite(daily).all(axis=1)
    days = daily_weather.dates

    windows = []
    for d in range(context_days, len(days)):
        if not daily_ok[d - context_days:d + 1].all():
            continue
        hw = _hourly_block(hourly_weather, days[d])
        if hw is None:
            continue
        truth = _hourly_block(hourly_flow, days[d])
        windows.append(FeatureWindow(
            day_id=days[d],
            context=daily[d - context_days:d],
            target_daily_weather=daily_weather.values[d],
            target_hourly_weather=hw,
            target_daily_flow=daily_flow.values[d, 0],
            target_hourly_flow=None if truth is None else truth[:, 0],
            weather_variables=daily_weather.variables,
        ))
    skipped = max(0, len(days) - context_days) - len(windows)
    if not windows:
        log.warning("no complete %d-day run found in %d days; no windows built", context_days + 1, len(days))
    elif skipped:
        log.info("built %d windows; skipped %d incomplete day(s)", len(windows), skipped)
    return windows
