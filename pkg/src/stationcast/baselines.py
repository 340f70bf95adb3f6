"""Reference forecasters that need no training.

A forecaster exposes ``name`` and ``predict(samples) -> [S, N, 4]`` in
physical units, one row per anchor of the sample set.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, UnsupportedLeadError
from .grids import FORECAST_HORIZON, GridSeries
from .samples import SampleSet, grid_offset

MODES = ("analysis_as_forecast", "forecast")


def persistence(samples: SampleSet) -> np.ndarray:
    """The observation at the anchor hour, carried to the target hour."""
    return samples.last_raw()


def interpolation(samples: SampleSet, grid: GridSeries, nearest: np.ndarray, mode: str | None = None) -> np.ndarray:
    """Nearest-cell grid value at the target hour.

    ``analysis_as_forecast`` reads the analysis valid at ``t + l``;
    ``forecast`` reads the run issued at ``t`` at lead ``l`` (forecast
    products only, ``l <= 18``).
    """
    if mode is None:
        mode = "forecast" if grid.is_forecast else "analysis_as_forecast"
    if mode not in MODES:
        raise ConfigurationError(f"unknown interpolation mode {mode!r}")
    lead = samples.lead
    tg = samples.anchors + grid_offset(samples.source.table, grid)
    nearest = np.asarray(nearest)
    if mode == "forecast":
        if not grid.is_forecast:
            raise ConfigurationError(f"{grid.source} has no forecast runs")
        if lead > min(FORECAST_HORIZON, grid.max_lead):
            raise UnsupportedLeadError(f"{grid.source} forecasts stop at {min(FORECAST_HORIZON, grid.max_lead)} h, lead {lead} requested")
        return grid.forecast.values(tg, [lead], nearest)[:, 0]
    target = tg + lead
    if target.size and (target.min() < 0 or target.max() >= grid.n_steps):
        raise ConfigurationError("target hours fall outside the grid record")
    return grid.values[target][:, nearest]


class Persistence:
    name = "persistence"
    source = "none"

    def predict(self, samples: SampleSet) -> np.ndarray:
        return persistence(samples)


class Interpolation:
    def __init__(self, grid: GridSeries, nearest, mode: str | None = None):
        self.grid, self.nearest, self.mode = grid, np.asarray(nearest), mode
        self.name = "interpolation"
        self.source = grid.source

    def predict(self, samples: SampleSet) -> np.ndarray:
        return interpolation(samples, self.grid, self.nearest, self.mode)
