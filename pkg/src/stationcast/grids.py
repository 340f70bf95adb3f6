"""Gridded large-scale fields and the ``gridpack`` file format.

A gridpack is a JSON manifest next to a raw little-endian float64 payload.
Analysis products (ERA5, HRRR-A, synthetic truth) use layout
``[time][cell][variable]``.  Forecast products (HRRR-F) carry a lead axis,
``[issue time][lead][cell][variable]``, where lead 0 is the analysis valid
at the issue time and lead ``k`` is the forecast valid ``k`` hours later.
Cells are ordered row-major with latitude as the outer index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import VARIABLES
from .errors import DataError, ValidationError

SOURCES = ("ERA5", "HRRR-A", "HRRR-F")
FORECAST_HORIZON = 18


class StoredForecast:
    """Forecast runs held in memory as ``[issue, lead, cell, variable]``."""

    def __init__(self, runs: np.ndarray):
        self.runs = np.asarray(runs, dtype=np.float64)

    @property
    def n_leads(self) -> int:
        return self.runs.shape[1]

    def values(self, issue, leads, cells=None) -> np.ndarray:
        """``[B, len(leads), C, 4]`` forecasts from the given issue indices."""
        issue = np.asarray(issue)
        leads = np.asarray(leads)
        block = self.runs[issue[:, None], leads[None, :]]
        return block if cells is None else block[:, :, cells]

    def to_array(self) -> np.ndarray:
        return self.runs


@dataclass
class GridSeries:
    source: str
    lats: np.ndarray  # [ny], uniform spacing
    lons: np.ndarray  # [nx], uniform spacing
    start: np.datetime64
    values: np.ndarray  # [T, M, 4]; analysis values for forecast products
    forecast: object = None  # StoredForecast-like, HRRR-F only

    def __post_init__(self):
        self.lats = np.asarray(self.lats, dtype=np.float64)
        self.lons = np.asarray(self.lons, dtype=np.float64)
        self.start = np.datetime64(self.start, "h")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.source not in SOURCES:
            raise ValidationError(f"unknown grid source {self.source!r}")
        for name, ax in (("lat", self.lats), ("lon", self.lons)):
            if len(ax) > 2 and not np.allclose(np.diff(ax), ax[1] - ax[0], rtol=1e-9, atol=1e-12):
                raise DataError(f"{name} spacing is not uniform")
        m = len(self.lats) * len(self.lons)
        if self.values.ndim != 3 or self.values.shape[1:] != (m, len(VARIABLES)):
            raise DataError(f"grid values must be [T, {m}, {len(VARIABLES)}], got {self.values.shape}")
        if self.source == "HRRR-F" and self.forecast is None:
            raise DataError("HRRR-F grid needs forecast runs")

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_cells(self) -> int:
        return self.values.shape[1]

    @property
    def is_forecast(self) -> bool:
        return self.forecast is not None

    @property
    def max_lead(self) -> int:
        return self.forecast.n_leads - 1 if self.forecast is not None else 0

    def cell_latlon(self) -> tuple[np.ndarray, np.ndarray]:
        lat, lon = np.meshgrid(self.lats, self.lons, indexing="ij")
        return lat.ravel(), lon.ravel()

    def years(self) -> np.ndarray:
        times = self.start + np.arange(self.n_steps).astype("timedelta64[h]")
        return times.astype("datetime64[Y]").astype(int) + 1970


# ---------------------------------------------------------------- gridpack I/O


def write_gridpack(grid: GridSeries, path) -> None:
    """Write ``path`` (JSON manifest) and ``path`` with suffix ``.bin``."""
    path = Path(path)
    payload = path.with_suffix(".bin")
    if grid.is_forecast:
        data = grid.forecast.to_array()
        layout = "time,lead,cell,variable"
    else:
        data = grid.values
        layout = "time,cell,variable"
    manifest = {
        "format": "gridpack",
        "version": 1,
        "source": grid.source,
        "lats": [float(x) for x in grid.lats],
        "lons": [float(x) for x in grid.lons],
        "start": str(np.datetime64(grid.start, "s")) + "Z",
        "n_steps": int(grid.n_steps),
        "variables": list(VARIABLES),
        "layout": layout,
        "dtype": "<f8",
        "payload": payload.name,
    }
    if grid.is_forecast:
        manifest["n_leads"] = int(grid.forecast.n_leads)
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    payload.write_bytes(np.ascontiguousarray(data, dtype="<f8").tobytes())


def read_gridpack(path) -> GridSeries:
    path = Path(path)
    try:
        m = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read gridpack manifest: {exc}") from None
    if m.get("format") != "gridpack":
        raise DataError(f"{path}: not a gridpack manifest")
    if tuple(m["variables"]) != VARIABLES:
        raise DataError(f"{path}: variable order must be {VARIABLES}")
    raw = np.fromfile(path.parent / m["payload"], dtype="<f8").astype(np.float64)
    t, ny, nx = m["n_steps"], len(m["lats"]), len(m["lons"])
    start = np.datetime64(m["start"].rstrip("Z"), "h")
    if m["layout"] == "time,lead,cell,variable":
        shape = (t, m["n_leads"], ny * nx, len(VARIABLES))
    elif m["layout"] == "time,cell,variable":
        shape = (t, ny * nx, len(VARIABLES))
    else:
        raise DataError(f"{path}: unknown layout {m['layout']!r}")
    if raw.size != int(np.prod(shape)):
        raise DataError(f"{path}: payload has {raw.size} values, manifest implies {int(np.prod(shape))}")
    data = raw.reshape(shape)
    if len(shape) == 4:
        return GridSeries(m["source"], m["lats"], m["lons"], start, data[:, 0], StoredForecast(data))
    return GridSeries(m["source"], m["lats"], m["lons"], start, data)
