"""Request types, HTTP transport and retry policy shared by the API clients."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from datetime import date
from typing import Mapping, Optional, Protocol

from ..errors import ConfigurationError, FetchError, OfflineError
from ..timeseries import Resolution

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StationSpec:
    station_id: str
    latitude: float
    longitude: float
    name: str = ""

    def __post_init__(self):
        if abs(self.latitude) > 90 or abs(self.longitude) > 180:
            raise ConfigurationError(f"invalid coordinates ({self.latitude}, {self.longitude})")


# HydAPI does not publish an id lookup by name here; set the real id via config or --station-id.
KIRKEVOLL_BRU = StationSpec("KIRKEVOLL_BRU_STATION_ID", 59.69003, 9.03762, "Kirkevoll bru")
STUDY_PERIOD = (date(2018, 12, 4), date(2021, 1, 7))


@dataclass(frozen=True)
class FetchRequest:
    """Inclusive UTC date range ``[start, end]`` for one station."""

    station: StationSpec
    start: date
    end: date
    resolution: Resolution = Resolution.DAILY
    variables: tuple = ("flow",)
    api_key_env: str = "HYDAPI_KEY"

    def __post_init__(self):
        if not self.start < self.end:
            raise ConfigurationError(f"empty date range: start {self.start} must precede end {self.end}")
        if not self.variables:
            raise ConfigurationError("request needs at least one variable")
        object.__setattr__(self, "variables", tuple(self.variables))


class Transport(Protocol):
    def get(self, url: str, params: Mapping, headers: Mapping) -> str:
        """Return the response body; raise FetchError on failure."""


class HttpTransport:
    def __init__(self, timeout=60.0):
        self.timeout = timeout

    def get(self, url, params, headers):
        import requests

        try:
            resp = requests.get(url, params=dict(params), headers=dict(headers), timeout=self.timeout)
        except requests.RequestException as exc:
            raise FetchError(f"GET {url} failed: {exc}") from exc
        if resp.status_code != 200:
            raise FetchError(f"GET {url} returned HTTP {resp.status_code}: {resp.text[:200]}", resp.status_code)
        return resp.text


class OfflineTransport:
    """Refuses every request; used for ``--offline`` runs."""

    def get(self, url, params, headers):
        raise OfflineError(f"offline mode: refusing network request to {url}")


def _retriable(exc: FetchError) -> bool:
    if not exc.retriable:
        return False
    return exc.status is None or exc.status == 429 or exc.status >= 500


def get_with_retry(transport: Transport, url, params, headers, attempts=3, backoff=1.0, sleep=time.sleep) -> str:
    """Up to ``attempts`` tries, waiting backoff, 2*backoff, ... between them."""
    for attempt in range(attempts):
        try:
            return transport.get(url, params, headers)
        except FetchError as exc:
            if attempt == attempts - 1 or not _retriable(exc):
                raise
            wait = backoff * 2 ** attempt
            log.warning("%s; retrying in %.0f s", exc, wait)
            sleep(wait)
    raise AssertionError("unreachable")


def default_transport(offline: bool, transport: Optional[Transport] = None) -> Transport:
    if offline:
        return OfflineTransport()
    return transport if transport is not None else HttpTransport()
