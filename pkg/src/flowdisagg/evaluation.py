"""Baselines, per-day metrics and figure data for comparing disaggregation methods."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import ShapeError
from .timeseries import HOURS_PER_DAY, Resolution, TimeSeries, _midnight

ANCHOR_HOUR = 12


def linear_interpolate(daily: TimeSeries) -> TimeSeries:
    """Hourly series through each daily average placed at 12:00 of its day.

    Values between anchors are linear; before the first and after the last
    anchor they are held flat. Missing days are bridged by their neighbours.
    """
    if daily.resolution is not Resolution.DAILY:
        raise ValueError("linear_interpolate needs a daily series")
    n_hours = len(daily) * HOURS_PER_DAY
    t = np.arange(n_hours, dtype=np.float64)
    anchors = np.arange(len(daily)) * HOURS_PER_DAY + ANCHOR_HOUR
    out = np.empty((n_hours, len(daily.variables)))
    for j, var in enumerate(daily.variables):
        ok = np.isfinite(daily.values[:, j])
        if not ok.any():
            raise ValueError(f"variable {var!r} is missing on every day")
        out[:, j] = np.interp(t, anchors[ok], daily.values[ok, j])
    return TimeSeries(daily.start, Resolution.HOURLY, daily.variables, out, daily.units)


def _pair(pred, truth):
    p = np.asarray(pred, dtype=np.float64).ravel()
    t = np.asarray(truth, dtype=np.float64).ravel()
    if p.shape != t.shape:
        raise ShapeError(f"length mismatch: {p.size} vs {t.size}")
    if p.size == 0:
        raise ValueError("empty input")
    return p, t


def mae(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def rmse(pred, truth) -> float:
    p, t = _pair(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mean_preservation_error(hourly_pred, daily_avg) -> float:
    p = np.asarray(hourly_pred, dtype=np.float64)
    if not (np.isfinite(p).all() and np.isfinite(daily_avg)):
        raise ValueError("mean_preservation_error needs finite inputs")
    return float(abs(p.mean() - daily_avg))


def variance_ratio(pred, truth) -> float:
    """Population variance of ``pred`` over that of ``truth``; 1 is ideal, <1 under-estimates."""
    p, t = _pair(pred, truth)
    vt = np.var(t)
    if vt <= 0.0:
        raise ZeroDivisionError("truth has zero variance")
    return float(np.var(p) / vt)


@dataclass(frozen=True)
class EvalRow:
    day_id: date
    method: str
    mae: float
    rmse: float
    mean_preservation_error: float
    variance_ratio: float  # NaN when the day's truth is constant


METRICS = ("mae", "rmse", "mean_preservation_error", "variance_ratio")


@dataclass
class EvalReport:
    rows: list
    summary: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def methods(self):
        return list(self.summary)

    def rows_for(self, method):
        return [r for r in self.rows if r.method == method]


def _summarise(rows, methods):
    summary = {}
    for m in methods:
        mine = [r for r in rows if r.method == m]
        entry = {"days": len(mine)}
        for k in METRICS:
            vals = np.array([getattr(r, k) for r in mine], dtype=np.float64)
            vals = vals[np.isfinite(vals)]
            entry[k] = float(vals.mean()) if vals.size else math.nan
        summary[m] = entry
    return summary


def _day_block(series: TimeSeries, day: date, label: str) -> np.ndarray:
    i = series.index_of(_midnight(day))
    if i < 0 or i + HOURS_PER_DAY > len(series):
        raise ValueError(f"{label} does not cover day {day}")
    block = series.values[i:i + HOURS_PER_DAY, 0]
    if not np.isfinite(block).all():
        raise ValueError(f"{label} has missing hours on day {day}")
    return block


def compare_methods(results: Mapping[str, TimeSeries], truth: TimeSeries, daily: TimeSeries,
                    days: Optional[Sequence[date]] = None) -> EvalReport:
    """Per-day metrics of every hourly method against hourly truth.

    ``days`` defaults to every day with an observed daily average. Rows are
    ordered by day, then by method name.
    """
    if days is None:
        days = [d for d, v in zip(daily.dates, daily.values[:, 0]) if np.isfinite(v)]
    methods = sorted(results)
    rows, flat_truth_days = [], []
    negatives = {m: 0 for m in methods}
    for day in sorted(days):
        i = daily.index_of(_midnight(day))
        q = daily.values[i, 0] if 0 <= i < len(daily) else math.nan
        if not np.isfinite(q):
            raise ValueError(f"daily series has no observed average for day {day}")
        t = _day_block(truth, day, "truth")
        constant = np.var(t) <= 0.0
        if constant:
            flat_truth_days.append(day.isoformat())
        for m in methods:
            p = _day_block(results[m], day, f"method {m!r}")
            negatives[m] += int((p < 0).sum())
            vr = math.nan if constant else variance_ratio(p, t)
            rows.append(EvalRow(day, m, mae(p, t), rmse(p, t), mean_preservation_error(p, q), vr))
    diagnostics = {"negative_predictions": negatives, "variance_ratio_skipped_days": flat_truth_days,
                   "n_days": len(days)}
    return EvalReport(rows, _summarise(rows, methods), diagnostics)


def results_to_series(results, corrected=True) -> TimeSeries:
    """Hourly series spanning the result days; days without a result are NaN."""
    results = sorted(results, key=lambda r: r.day_id)
    first, last = results[0].day_id, results[-1].day_id
    n_days = (last - first).days + 1
    values = np.full(n_days * HOURS_PER_DAY, np.nan)
    for r in results:
        i = (r.day_id - first).days * HOURS_PER_DAY
        values[i:i + HOURS_PER_DAY] = r.hourly_flow_corrected if corrected else r.hourly_flow_raw
    return TimeSeries(_midnight(first), Resolution.HOURLY, ("flow",), values, {"flow": "m3/s"})


def _num(x) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


def write_report_csv(report: EvalReport, path) -> Path:
    """Per-day rows: ``day,method,mae,rmse,mean_preservation_error,variance_ratio``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["day", "method", *METRICS])
        for r in report.rows:
            w.writerow([r.day_id.isoformat(), r.method, *(_num(getattr(r, k)) for k in METRICS)])
    return path


def write_summary_csv(report: EvalReport, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "days", *METRICS, "negative_predictions"])
        for m, s in report.summary.items():
            w.writerow([m, s["days"], *(_num(s[k]) for k in METRICS),
                        report.diagnostics.get("negative_predictions", {}).get(m, 0)])
    return path


# --- figures ----------------------------------------------------------------------

_SVG_W, _SVG_H, _PAD = 640, 360, 48
_COLOURS = {"truth": "#000000", "model_raw": "#999999", "model_corrected": "#d62728", "interpolation": "#1f77b4"}


def _svg(day, columns) -> str:
    finite = np.concatenate([v[np.isfinite(v)] for v in columns.values()])
    lo, hi = float(finite.min()), float(finite.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    sx = (_SVG_W - 2 * _PAD) / (HOURS_PER_DAY - 1)
    sy = (_SVG_H - 2 * _PAD) / (hi - lo)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_SVG_W}" height="{_SVG_H}" '
             f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
             f'<rect x="0" y="0" width="{_SVG_W}" height="{_SVG_H}" fill="#ffffff"/>',
             f'<text x="{_PAD}" y="24" font-family="sans-serif" font-size="14">Hourly flow {day}</text>',
             f'<line x1="{_PAD}" y1="{_SVG_H - _PAD}" x2="{_SVG_W - _PAD}" y2="{_SVG_H - _PAD}" stroke="#444"/>',
             f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_SVG_H - _PAD}" stroke="#444"/>',
             f'<text x="4" y="{_PAD + 4}" font-family="sans-serif" font-size="10">{hi:.4g}</text>',
             f'<text x="4" y="{_SVG_H - _PAD}" font-family="sans-serif" font-size="10">{lo:.4g}</text>',
             f'<text x="{_SVG_W // 2}" y="{_SVG_H - 12}" font-family="sans-serif" font-size="10">hour (UTC)</text>']
    for k, (name, vals) in enumerate(columns.items()):
        if not np.isfinite(vals).all():
            continue
        pts = " ".join(f"{_PAD + h * sx:.2f},{_SVG_H - _PAD - (v - lo) * sy:.2f}" for h, v in enumerate(vals))
        lines.append(f'<polyline fill="none" stroke="{_COLOURS[name]}" stroke-width="1.5" points="{pts}"/>')
        lines.append(f'<text x="{_SVG_W - _PAD - 110}" y="{_PAD + 14 * k}" font-family="sans-serif" '
                     f'font-size="10" fill="{_COLOURS[name]}">{name}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_figure_data(report: EvalReport, results, out_dir, interpolation: Optional[TimeSeries] = None,
                     days: Optional[Sequence[date]] = None) -> list:
    """Write ``day_<date>.csv`` and ``day_<date>.svg`` for each selected day.

    CSV columns: ``hour,truth,model_raw,model_corrected,interpolation`` (empty
    cell where a series is unavailable). Output depends only on the inputs.
    """
    if not report.rows:
        raise ValueError("empty report")
    by_day = {r.day_id: r for r in results}
    selected = sorted(by_day) if days is None else sorted(days)
    if not selected:
        raise ValueError("no days selected for figures")
    missing = [d for d in selected if d not in by_day]
    if missing:
        raise ValueError(f"no disaggregation result for day(s) {[d.isoformat() for d in missing]}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    nan24 = np.full(HOURS_PER_DAY, np.nan)
    written = []
    for day in selected:
        r = by_day[day]
        columns = {
            "truth": nan24 if r.hourly_flow_truth is None else np.asarray(r.hourly_flow_truth),
            "model_raw": np.asarray(r.hourly_flow_raw),
            "model_corrected": np.asarray(r.hourly_flow_corrected),
            "interpolation": nan24 if interpolation is None else _day_block(interpolation, day, "interpolation"),
        }
        csv_path = out_dir / f"day_{day.isoformat()}.csv"
        with csv_path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["hour", *columns])
            for h in range(HOURS_PER_DAY):
                w.writerow([h, *(_num(v[h]) for v in columns.values())])
        svg_path = out_dir / f"day_{day.isoformat()}.svg"
        svg_path.write_text(_svg(day, columns))
        written += [csv_path, svg_path]
    return written

