"""NVE HydAPI discharge client.

Request: ``GET {HYDAPI_URL}?StationId=..&Parameter=1001&ResolutionTime=1440&ReferenceTime=<start>/<end>``
with the key in the ``X-API-Key`` header. Response shape (see
``tests/fixtures/hydapi_daily.json``)::

    {"data": [{"stationId": "...", "parameter": 1001, "resolutionTime": 1440,
               "observations": [{"time": "2018-12-04T00:00:00Z", "value": 3.1, ...}, ...]}]}

``value`` may be null for a gap. Daily observations are assigned to the UTC
date of their timestamp.
"""
from __future__ import annotations

import json
import logging
import os
from datetime import datetime, timedelta, timezone

import numpy as np

from ..errors import ConfigurationError, ParseError
from ..timeseries import Resolution, TimeSeries, _midnight
from .base import FetchRequest, default_transport, get_with_retry
from .cache import SeriesCache, cache_key

log = logging.getLogger(__name__)

HYDAPI_URL = "https://hydapi.nve.no/api/v1/Observations"
DISCHARGE_PARAMETER = 1001
RESOLUTION_MINUTES = {Resolution.DAILY: 1440, Resolution.HOURLY: 60}


def _grid(request: FetchRequest):
    start = _midnight(request.start)
    if request.resolution is Resolution.DAILY:
        n = (request.end - request.start).days + 1
    else:
        n = ((request.end - request.start).days + 1) * 24
    return start, n


def parse_observations(text: str, request: FetchRequest) -> TimeSeries:
    """HydAPI JSON -> series on the request's grid; absent or null values become NaN."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", f"line {exc.lineno} col {exc.colno}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("data"), list) or not doc["data"]:
        raise ParseError("expected a non-empty 'data' list", "data")
    block = doc["data"][0]
    obs = block.get("observations") if isinstance(block, dict) else None
    if not isinstance(obs, list):
        raise ParseError("expected an 'observations' list", "data[0].observations")

    start, n = _grid(request)
    values = np.full(n, np.nan)
    step = request.resolution.step
    for i, o in enumerate(obs):
        path = f"data[0].observations[{i}]"
        if not isinstance(o, dict) or "time" not in o or "value" not in o:
            raise ParseError("observation needs 'time' and 'value'", path)
        try:
            ts = datetime.fromisoformat(str(o["time"]).replace("Z", "+00:00"))
        except ValueError:
            raise ParseError(f"bad timestamp {o['time']!r}", f"{path}.time") from None
        ts = ts.replace(tzinfo=timezone.utc) if ts.tzinfo is None else ts.astimezone(timezone.utc)
        if request.resolution is Resolution.DAILY:
            ts = _midnight(ts.date())
        idx, rem = divmod(ts - start, step)
        if rem != timedelta(0):
            raise ParseError(f"timestamp {o['time']} is off the {request.resolution.value} grid", f"{path}.time")
        if not 0 <= idx < n:
            continue
        v = o["value"]
        if v is None:
            continue
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
            raise ParseError(f"non-numeric value {v!r}", f"{path}.value")
        values[idx] = float(v)
    return TimeSeries(start, request.resolution, ("flow",), values, {"flow": "m3/s"})


def fetch_flow(request: FetchRequest, transport=None, cache: SeriesCache = None, offline=False,
               env=None) -> TimeSeries:
    """Discharge series for ``request``, from the cache when present."""
    if request.resolution not in RESOLUTION_MINUTES:
        raise ConfigurationError(f"unsupported resolution {request.resolution}")
    key_fields = {"source": "hydapi", "station": request.station.station_id, "start": request.start.isoformat(),
                  "end": request.end.isoformat(), "resolution": request.resolution.value}
    key = cache_key(**key_fields)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            log.info("hydapi %s served from cache", request.station.station_id)
            return hit

    env = os.environ if env is None else env
    api_key = env.get(request.api_key_env)
    if not api_key and not offline:
        raise ConfigurationError(f"HydAPI key missing: set the {request.api_key_env} environment variable")
    params = {"StationId": request.station.station_id, "Parameter": DISCHARGE_PARAMETER,
              "ResolutionTime": RESOLUTION_MINUTES[request.resolution],
              "ReferenceTime": f"{request.start.isoformat()}T00:00:00Z/{request.end.isoformat()}T23:59:59Z"}
    text = get_with_retry(default_transport(offline, transport), HYDAPI_URL, params,
                          {"X-API-Key": api_key or "", "Accept": "application/json"})
    series = parse_observations(text, request)
    if cache is not None:
        series = cache.put(key, series, key_fields)
    return series
