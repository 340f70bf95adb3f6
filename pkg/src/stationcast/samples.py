"""Normalisation, train/val/test splits and forecast sample windows.

A sample is keyed by its anchor hour ``t`` and holds every station at once:

* station history ``t - b .. t`` (``b + 1`` steps, the anchor included),
* the grid window ``t - b .. t + l`` for each linked cell, cut at
  ``t + 18`` for forecast products,
* the target observation at ``t + l``.

Samples belong to the split containing the calendar year of their target
hour; history may reach back into the previous split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geometry import HeteroGraph
from .grids import FORECAST_HORIZON, GridSeries
from .stations import StationTable


# ---------------------------------------------------------------- normalisation


@dataclass
class NormStats:
    station_mean: np.ndarray
    station_std: np.ndarray
    grid_mean: np.ndarray | None
    grid_std: np.ndarray | None
    coord_center: np.ndarray
    coord_scale: float

    def __post_init__(self):
        for name in ("station_mean", "station_std", "grid_mean", "grid_std", "coord_center"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=np.float64))
        for name in ("station_std", "grid_std"):
            v = getattr(self, name)
            if v is not None and np.any(v <= 0):
                raise ConfigurationError(f"{name} has a non-positive entry: {v}")
        if self.coord_scale <= 0:
            raise ConfigurationError("coordinate scale must be positive")

    def to_dict(self) -> dict:
        def lst(v):
            return None if v is None else [float(x) for x in v]

        return {
            "station_mean": lst(self.station_mean),
            "station_std": lst(self.station_std),
            "grid_mean": lst(self.grid_mean),
            "grid_std": lst(self.grid_std),
            "coord_center": lst(self.coord_center),
            "coord_scale": float(self.coord_scale),
        }

    @classmethod
    def from_dict(cls, d: dict) -> NormStats:
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> NormStats:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def coords(self, xy) -> np.ndarray:
        return (np.asarray(xy) - self.coord_center) / self.coord_scale


def normalize(block, mean, std) -> np.ndarray:
    """Z-score over the last (variable) axis."""
    std = np.asarray(std, dtype=np.float64)
    if np.any(std <= 0):
        raise ConfigurationError("standard deviation must be positive")
    return (np.asarray(block, dtype=np.float64) - mean) / std


def denormalize(block, mean, std) -> np.ndarray:
    return np.asarray(block, dtype=np.float64) * std + mean


def compute_norm_stats(table: StationTable, grid: GridSeries | None, graph: HeteroGraph, train_years) -> NormStats:
    """Per-variable statistics over the training years only."""
    years = np.asarray(sorted(train_years))
    mask = np.isin(table.years(), years)
    if not mask.any():
        raise ConfigurationError(f"no station hours fall in training years {list(years)}")
    st = table.values[mask]
    g_mean = g_std = None
    if grid is not None:
        gmask = np.isin(grid.years(), years)
        if not gmask.any():
            raise ConfigurationError("no grid hours fall in the training years")
        gv = grid.values[gmask]
        g_mean, g_std = gv.mean(axis=(0, 1)), gv.std(axis=(0, 1))
    xy = graph.station_xy
    return NormStats(
        st.mean(axis=(0, 1)),
        st.std(axis=(0, 1)),
        g_mean,
        g_std,
        xy.mean(axis=0),
        float(xy.std()) if len(xy) > 1 else 1.0,
    )


# ---------------------------------------------------------------- splits


def effective_lead(lead: int, grid: GridSeries | None) -> int:
    """Number of future grid steps a sample sees (forecasts stop at 18 h)."""
    if grid is not None and grid.is_forecast:
        return min(lead, FORECAST_HORIZON, grid.max_lead)
    return lead


def grid_window_length(back_hours: int, lead: int, grid: GridSeries | None) -> int:
    return back_hours + 1 + effective_lead(lead, grid)


def valid_anchors(table: StationTable, grid: GridSeries | None, back_hours: int, lead: int) -> np.ndarray:
    """Station time indices whose history, target and grid window all exist."""
    t = np.arange(table.n_steps)
    ok = (t - back_hours >= 0) & (t + lead <= table.n_steps - 1)
    if grid is not None:
        off = grid_offset(table, grid)
        tg = t + off
        ok &= tg - back_hours >= 0
        ok &= tg + effective_lead(lead, grid) <= grid.n_steps - 1
    return t[ok]


def grid_offset(table: StationTable, grid: GridSeries) -> int:
    return int((table.start - grid.start).astype(np.int64))


def split(table: StationTable, grid, back_hours: int, lead: int, train_years, val_years, test_years):
    """Anchor indices per split, partitioned by the calendar year of the target hour."""
    sets = [set(train_years), set(val_years), set(test_years)]
    if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
        raise ConfigurationError(f"split years overlap: {train_years} / {val_years} / {test_years}")
    anchors = valid_anchors(table, grid, back_hours, lead)
    target_year = table.years()[anchors + lead]
    return {
        name: anchors[np.isin(target_year, sorted(years))]
        for name, years in zip(("train", "val", "test"), sets)
    }


# ---------------------------------------------------------------- samples


@dataclass
class Sample:
    anchor: np.datetime64
    back_hours: int
    lead: int
    history: np.ndarray  # [N, b+1, 4], normalised
    grid: np.ndarray | None  # [C, L, 4], normalised, one row per linked cell
    target: np.ndarray  # [N, 4], normalised
    target_raw: np.ndarray  # [N, 4]
    last_raw: np.ndarray  # [N, 4], observation at the anchor hour


@dataclass
class Batch:
    history: np.ndarray  # [B, N, b+1, 4]
    grid: np.ndarray | None  # [B, C, L, 4]
    target: np.ndarray  # [B, N, 4]
    station_xy: np.ndarray  # [N, 2], normalised coordinates
    cell_xy: np.ndarray | None  # [C, 2]
    links: np.ndarray | None  # [N, k], indices into the C linked cells
    edges: tuple[np.ndarray, np.ndarray] | None = None  # directed (receiver, sender)

    @property
    def size(self) -> int:
        return self.history.shape[0]


class WindowSource:
    """Normalised arrays shared by the samples of one (data, b, l) setup."""

    def __init__(self, table: StationTable, grid: GridSeries | None, graph: HeteroGraph, norm: NormStats, back_hours: int, lead: int):
        if back_hours < 1:
            raise ConfigurationError("back hours must be at least 1")
        if lead < 0:
            raise ConfigurationError("lead must be non-negative")
        if graph.n_stations != table.n_stations:
            raise ConfigurationError("graph and station table disagree on the station count")
        self.table, self.grid, self.graph, self.norm = table, grid, graph, norm
        self.back_hours, self.lead = back_hours, lead
        self.lead_eff = effective_lead(lead, grid)
        self.station = normalize(table.values, norm.station_mean, norm.station_std)
        self.station_xy = norm.coords(graph.station_xy)
        self.edges = graph.directed_edges()
        if grid is None:
            self.cells = self.links = self.cell_xy = self.grid_norm = None
            self.offset = 0
            return
        if norm.grid_mean is None:
            raise ConfigurationError("normalisation stats lack grid statistics")
        if grid.n_cells != len(graph.cell_xy):
            raise ConfigurationError("graph and grid disagree on the cell count")
        self.offset = grid_offset(table, grid)
        self.cells = graph.linked_cells()
        self.links = np.searchsorted(self.cells, graph.grid_links)
        self.cell_xy = norm.coords(graph.cell_xy[self.cells])
        self.grid_norm = normalize(grid.values[:, self.cells], norm.grid_mean, norm.grid_std)

    @property
    def grid_length(self) -> int:
        return self.back_hours + 1 + self.lead_eff

    def history(self, anchors) -> np.ndarray:
        steps = anchors[:, None] + np.arange(-self.back_hours, 1)
        return self.station[steps].transpose(0, 2, 1, 3)

    def grid_window(self, anchors) -> np.ndarray | None:
        if self.grid is None:
            return None
        tg = anchors + self.offset
        if self.grid.is_forecast:
            past = self.grid_norm[tg[:, None] + np.arange(-self.back_hours, 1)]
            leads = np.arange(1, self.lead_eff + 1)
            fut = self.grid.forecast.values(tg, leads, self.cells)
            fut = normalize(fut, self.norm.grid_mean, self.norm.grid_std)
            block = np.concatenate([past, fut], axis=1)
        else:
            block = self.grid_norm[tg[:, None] + np.arange(-self.back_hours, self.lead + 1)]
        return block.transpose(0, 2, 1, 3)


class SampleSet:
    """Anchors over a :class:`WindowSource`; iterates as :class:`Sample` objects."""

    def __init__(self, source: WindowSource, anchors, skipped: int = 0):
        self.source = source
        self.anchors = np.asarray(anchors, dtype=np.intp)
        self.skipped = skipped

    def __len__(self) -> int:
        return len(self.anchors)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i) -> Sample:
        src = self.source
        t = self.anchors[i : i + 1]
        grid = src.grid_window(t)
        return Sample(
            anchor=src.table.start + np.timedelta64(int(t[0]), "h"),
            back_hours=src.back_hours,
            lead=src.lead,
            history=src.history(t)[0],
            grid=None if grid is None else grid[0],
            target=src.station[t[0] + src.lead],
            target_raw=self.target_raw(np.array([i]))[0],
            last_raw=self.last_raw(np.array([i]))[0],
        )

    @property
    def lead(self) -> int:
        return self.source.lead

    def subset(self, idx) -> SampleSet:
        if not isinstance(idx, slice):
            idx = np.asarray(idx, dtype=np.intp)
        return SampleSet(self.source, self.anchors[idx])

    def anchor_times(self, idx=None) -> np.ndarray:
        a = self.anchors if idx is None else self.anchors[idx]
        return self.source.table.start + a.astype("timedelta64[h]")

    def batch(self, idx) -> Batch:
        src = self.source
        a = self.anchors[np.asarray(idx)]
        return Batch(
            history=src.history(a),
            grid=src.grid_window(a),
            target=src.station[a + src.lead],
            station_xy=src.station_xy,
            cell_xy=src.cell_xy,
            links=src.links,
            edges=src.edges,
        )

    def target_raw(self, idx=None) -> np.ndarray:
        a = self.anchors if idx is None else self.anchors[idx]
        return self.source.table.values[a + self.source.lead]

    def last_raw(self, idx=None) -> np.ndarray:
        a = self.anchors if idx is None else self.anchors[idx]
        return self.source.table.values[a]


def make_samples(
    table: StationTable,
    grid: GridSeries | None,
    back_hours: int,
    lead: int,
    graph: HeteroGraph,
    norm: NormStats,
    years=None,
) -> SampleSet:
    """All valid samples, optionally restricted to target years."""
    src = WindowSource(table, grid, graph, norm, back_hours, lead)
    anchors = valid_anchors(table, grid, back_hours, lead)
    skipped = table.n_steps - len(anchors)
    if years is not None:
        anchors = anchors[np.isin(table.years()[anchors + lead], sorted(years))]
    return SampleSet(src, anchors, skipped)


def make_splits(table, grid, back_hours, lead, graph, norm, train_years, val_years, test_years) -> dict[str, SampleSet]:
    src = WindowSource(table, grid, graph, norm, back_hours, lead)
    parts = split(table, grid, back_hours, lead, train_years, val_years, test_years)
    return {k: SampleSet(src, v) for k, v in parts.items()}
