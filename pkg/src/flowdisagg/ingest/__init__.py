"""Data acquisition: NVE HydAPI flow, Open-Meteo weather, local cache, synthetic data."""
from .base import (KIRKEVOLL_BRU, STUDY_PERIOD, FetchRequest, HttpTransport, OfflineTransport, StationSpec,
                   get_with_retry)
from .cache import SeriesCache, cache_key
from .hydapi import fetch_flow, parse_observations
from .openmeteo import fetch_weather, parse_archive
from .synth import SynthConfig, SynthData, mass_balance, synth_generate

__all__ = [
    "KIRKEVOLL_BRU", "STUDY_PERIOD", "FetchRequest", "HttpTransport", "OfflineTransport", "StationSpec",
    "get_with_retry", "SeriesCache", "cache_key", "fetch_flow", "fetch_weather", "parse_observations",
    "parse_archive", "SynthConfig", "SynthData", "mass_balance", "synth_generate",
]
