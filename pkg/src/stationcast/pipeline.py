"""Glue between data, graph, normalisation, samples and models for one run.

A run is one (model kind, grid source, lead) combination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .geometry import HeteroGraph, Projection, build_graph
from .grids import GridSeries
from .models import Model
from .samples import NormStats, SampleSet, compute_norm_stats, grid_window_length, make_splits
from .stations import StationTable
from .training import TrainConfig


def project(table: StationTable, grid: GridSeries | None):
    """Station and cell kilometre coordinates around the station centroid."""
    proj = Projection.centered_on(float(np.mean(table.lat)), float(np.mean(table.lon)))
    station_xy = proj(table.lat, table.lon)
    cell_xy = None if grid is None else proj(*grid.cell_latlon())
    return station_xy, cell_xy


def make_graph(table: StationTable, grid: GridSeries | None, k: int = 8, mode: str = "delaunay") -> HeteroGraph:
    station_xy, cell_xy = project(table, grid)
    return build_graph(station_xy, cell_xy, k=k, mode=mode, station_ids=table.station_ids)


@dataclass
class Run:
    cfg: TrainConfig
    model: Model
    graph: HeteroGraph
    norm: NormStats
    splits: dict[str, SampleSet]
    train_years: tuple
    val_years: tuple
    test_years: tuple

    @property
    def train_set(self) -> SampleSet:
        return self.splits["train"].subset(slice(None, None, self.cfg.train_stride))

    @property
    def val_set(self) -> SampleSet:
        return self.splits["val"].subset(slice(None, None, self.cfg.val_stride))

    @property
    def test_set(self) -> SampleSet:
        return self.splits["test"]


def prepare_run(
    table: StationTable,
    grid: GridSeries | None,
    cfg: TrainConfig,
    model_config: dict | None,
    train_years,
    val_years,
    test_years,
    norm: NormStats | None = None,
) -> Run:
    """Build model, graph, normalisation and splits for one run."""
    if (cfg.grid == "none") != (grid is None):
        raise ConfigurationError(f"grid source {cfg.grid!r} does not match the supplied grid")
    if grid is not None and grid.source != cfg.grid:
        raise ConfigurationError(f"config asks for {cfg.grid} but the grid file holds {grid.source}")
    grid_length = None if grid is None else grid_window_length(cfg.back_hours, cfg.lead, grid)
    model = Model(cfg.model, model_config, cfg.back_hours, grid_length)
    graph = make_graph(table, grid, model.graph_k, model.graph_mode)
    if norm is None:
        norm = compute_norm_stats(table, grid, graph, train_years)
    splits = make_splits(table, grid, cfg.back_hours, cfg.lead, graph, norm, train_years, val_years, test_years)
    return Run(cfg, model, graph, norm, splits, tuple(train_years), tuple(val_years), tuple(test_years))
