"""Open-Meteo historical weather client.

Request: ``GET {ARCHIVE_URL}?latitude=..&longitude=..&start_date=..&end_date=..&hourly=a,b&timezone=GMT``.
The response holds one array per requested variable under ``hourly`` (or
``daily``) next to a ``time`` array; null entries are gaps.
"""
from __future__ import annotations

import json
import logging
from datetime import datetime, timezone

import numpy as np

from ..errors import ConfigurationError, ParseError
from ..timeseries import Resolution, TimeSeries
from .base import FetchRequest, default_transport, get_with_retry
from .cache import SeriesCache, cache_key

log = logging.getLogger(__name__)

ARCHIVE_URL = "https://archive-api.open-meteo.com/v1/archive"

# internal name -> (hourly API name, daily API name, unit)
VARIABLES = {
    "precipitation": ("precipitation", "precipitation_sum", "mm"),
    "temperature": ("temperature_2m", "temperature_2m_mean", "degC"),
    "rain": ("rain", "rain_sum", "mm"),
    "snowfall": ("snowfall", "snowfall_sum", "cm"),
}


def api_names(variables, resolution: Resolution):
    unknown = [v for v in variables if v not in VARIABLES]
    if unknown:
        raise ConfigurationError(f"unsupported weather variable(s) {unknown}; supported: {sorted(VARIABLES)}")
    col = 0 if resolution is Resolution.HOURLY else 1
    return [VARIABLES[v][col] for v in variables]


def parse_archive(text: str, request: FetchRequest) -> TimeSeries:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    section = "hourly" if request.resolution is Resolution.HOURLY else "daily"
    if not isinstance(doc, dict) or not isinstance(doc.get(section), dict):
        raise ParseError(f"missing '{section}' object", section)
    if doc.get("utc_offset_seconds", 0) != 0:
        raise ParseError("response is not in UTC", "utc_offset_seconds")
    block = doc[section]
    times = block.get("time")
    if not isinstance(times, list) or not times:
        raise ParseError("missing or empty time array", f"{section}.time")
    try:
        stamps = [datetime.fromisoformat(t).replace(tzinfo=timezone.utc) for t in times]
    except (TypeError, ValueError):
        raise ParseError("unparseable timestamp", f"{section}.time") from None
    step = request.resolution.step
    for i, ts in enumerate(stamps):
        if ts != stamps[0] + i * step:
            raise ParseError(f"time {times[i]} breaks the {request.resolution.value} grid", f"{section}.time[{i}]")

    cols = []
    for name, api in zip(request.variables, api_names(request.variables, request.resolution)):
        arr = block.get(api)
        if not isinstance(arr, list):
            raise ParseError(f"missing variable array '{api}'", f"{section}.{api}")
        if len(arr) != len(times):
            raise ParseError(f"'{api}' has {len(arr)} entries, time has {len(times)}", f"{section}.{api}")
        col = np.empty(len(arr))
        for i, v in enumerate(arr):
            if v is None:
                col[i] = np.nan
            elif isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v):
                col[i] = float(v)
            else:
                raise ParseError(f"non-numeric value {v!r}", f"{section}.{api}[{i}]")
        cols.append(col)
    units = {v: VARIABLES[v][2] for v in request.variables}
    return TimeSeries(stamps[0], request.resolution, request.variables, np.stack(cols, axis=1), units)


def fetch_weather(request: FetchRequest, transport=None, cache: SeriesCache = None, offline=False) -> TimeSeries:
    """Weather at the station coordinates, from the cache when present."""
    names = api_names(request.variables, request.resolution)
    st = request.station
    key_fields = {"source": "open-meteo", "latitude": st.latitude, "longitude": st.longitude,
                  "start": request.start.isoformat(), "end": request.end.isoformat(),
                  "resolution": request.resolution.value, "variables": list(request.variables)}
    key = cache_key(**key_fields)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            log.info("open-meteo (%s, %s) served from cache", st.latitude, st.longitude)
            return hit
    section = "hourly" if request.resolution is Resolution.HOURLY else "daily"
    params = {"latitude": st.latitude, "longitude": st.longitude, "start_date": request.start.isoformat(),
              "end_date": request.end.isoformat(), section: ",".join(names), "timezone": "GMT"}
    text = get_with_retry(default_transport(offline, transport), ARCHIVE_URL, params, {"Accept": "application/json"})
    series = parse_archive(text, request)
    if cache is not None:
        series = cache.put(key, series, key_fields)
    return series
