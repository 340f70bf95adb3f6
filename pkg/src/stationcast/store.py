"""The ingested dataset store: one directory, read-only after ingest.

Layout::

    stations.json   manifest (ids, coordinates, start, n_steps, variables)
    stations.bin    little-endian float64 [time][station][variable]
    filled.bin      uint8 [time][station], 1 where the value was front-filled
    <source>.json   gridpacks copied in at ingest (era5, hrrr-a, hrrr-f)
    ingest_report.json
"""

from __future__ import annotations

import json
import shutil
from pathlib import Path

import numpy as np

from . import VARIABLES
from .errors import DataError
from .grids import GridSeries, read_gridpack
from .stations import StationTable

GRID_NAMES = {"era5": "ERA5", "hrrr-a": "HRRR-A", "hrrr-f": "HRRR-F"}


def grid_name(source: str) -> str:
    return {v: k for k, v in GRID_NAMES.items()}[source]


def write_store(table: StationTable, filled: np.ndarray, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format": "stationstore",
        "version": 1,
        "station_ids": list(table.station_ids),
        "lat": [float(x) for x in table.lat],
        "lon": [float(x) for x in table.lon],
        "start": str(np.datetime64(table.start, "s")) + "Z",
        "n_steps": int(table.n_steps),
        "variables": list(VARIABLES),
        "layout": "time,station,variable",
        "dtype": "<f8",
    }
    (path / "stations.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    (path / "stations.bin").write_bytes(np.ascontiguousarray(table.values, dtype="<f8").tobytes())
    (path / "filled.bin").write_bytes(np.ascontiguousarray(filled, dtype=np.uint8).tobytes())


def read_store(path) -> tuple[StationTable, np.ndarray]:
    path = Path(path)
    try:
        m = json.loads((path / "stations.json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: not a dataset store ({exc})") from None
    n, t = len(m["station_ids"]), m["n_steps"]
    raw = np.fromfile(path / "stations.bin", dtype="<f8")
    if raw.size != t * n * len(VARIABLES):
        raise DataError(f"{path}: station payload has {raw.size} values, expected {t * n * len(VARIABLES)}")
    filled = np.fromfile(path / "filled.bin", dtype=np.uint8).reshape(t, n).astype(bool)
    values = raw.astype(np.float64).reshape(t, n, len(VARIABLES))
    if np.isnan(values).any():
        raise DataError(f"{path}: store contains missing values")
    start = np.datetime64(m["start"].rstrip("Z"), "h")
    return StationTable(m["station_ids"], m["lat"], m["lon"], start, values), filled


def add_grid(store, gridpack) -> str:
    """Copy a gridpack into the store under its canonical name; returns it."""
    grid = read_gridpack(gridpack)
    name = grid_name(grid.source)
    src = Path(gridpack)
    dst = Path(store)
    manifest = json.loads(src.read_text())
    payload = src.parent / manifest["payload"]
    manifest["payload"] = f"{name}.bin"
    (dst / f"{name}.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    shutil.copyfile(payload, dst / f"{name}.bin")
    return name


def load_grid(store, name: str) -> GridSeries | None:
    name = name.lower()
    if name == "none":
        return None
    if name not in GRID_NAMES:
        raise DataError(f"unknown grid {name!r}; choose from none, {', '.join(GRID_NAMES)}")
    p = Path(store) / f"{name}.json"
    if not p.exists():
        raise DataError(f"store {store} has no {name} grid (ingest it with --grid)")
    return read_gridpack(p)
