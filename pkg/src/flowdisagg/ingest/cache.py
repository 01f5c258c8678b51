"""Write-once on-disk cache of fetched series: one CSV plus a JSON manifest per key."""
from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from filelock import FileLock

from ..timeseries import Resolution, TimeSeries, read_csv, write_csv


def cache_key(**request) -> str:
    text = json.dumps(request, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:20]


class SeriesCache:
    def __init__(self, root):
        self.root = Path(root)

    def _paths(self, key):
        return self.root / f"{key}.csv", self.root / f"{key}.json"

    def get(self, key) -> Optional[TimeSeries]:
        csv_path, manifest_path = self._paths(key)
        if not manifest_path.exists():
            return None
        manifest = json.loads(manifest_path.read_text())
        return read_csv(csv_path, Resolution(manifest["resolution"]), manifest.get("units"))

    def put(self, key, series: TimeSeries, request: dict) -> TimeSeries:
        """Store ``series`` unless ``key`` already exists; returns the stored series.

        The manifest is written last, so a key is visible only once complete.
        """
        self.root.mkdir(parents=True, exist_ok=True)
        csv_path, manifest_path = self._paths(key)
        with FileLock(str(self.root / f"{key}.lock")):
            if manifest_path.exists():
                return self.get(key)
            tmp = csv_path.with_suffix(".csv.tmp")
            write_csv(series, tmp)
            os.replace(tmp, csv_path)
            manifest = {"key": key, "request": request, "resolution": series.resolution.value,
                        "variables": list(series.variables), "units": series.units, "rows": len(series),
                        "fetched_at": datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")}
            manifest_path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
        return series
