"""Message passing on the heterogeneous station/grid graph.

encode -> grid pass -> station passes -> grid pass -> decode.  Every named
network is a two-layer MLP; station passes have their own parameters.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigurationError
from .layers import init_mlp2, mlp2, tile_const

N_VARS = 4


@dataclass(frozen=True)
class MPNNConfig:
    latent: int = 128
    n_station_passes: int = 4
    k: int = 8
    graph_mode: str = "delaunay"
    hidden: int | None = None  # MLP hidden width, latent when unset

    def __post_init__(self):
        if self.latent < 1:
            raise ConfigurationError("latent width must be positive")
        if self.n_station_passes < 1:
            raise ConfigurationError("n_station_passes must be at least 1")
        if self.k < 1:
            raise ConfigurationError("each station needs at least one grid link (k >= 1)")
        if self.graph_mode not in ("delaunay", "fully_connected"):
            raise ConfigurationError(f"unknown graph_mode {self.graph_mode!r}")

    @property
    def width(self) -> int:
        return self.latent if self.hidden is None else self.hidden

    @property
    def graph_k(self) -> int:
        return self.k

    def to_dict(self) -> dict:
        return asdict(self)


def init_params(cfg: MPNNConfig, back_hours: int, grid_length: int | None, rng) -> dict:
    p: dict[str, np.ndarray] = {}
    F, H = cfg.latent, cfg.width
    hist = (back_hours + 1) * N_VARS
    init_mlp2(p, rng, "alpha", hist + 2, H, F)
    if grid_length is not None:
        init_mlp2(p, rng, "psi", grid_length * N_VARS + 2, H, F)
        for g in ("grid1", "grid2"):
            init_mlp2(p, rng, f"{g}.chi", 2 * F + 2, H, F)
            init_mlp2(p, rng, f"{g}.omega", 3 * F, H, F)
    for s in range(cfg.n_station_passes):
        init_mlp2(p, rng, f"station{s}.beta", 2 * F + hist + 2, H, F)
        init_mlp2(p, rng, f"station{s}.gamma", 2 * F, H, F)
    init_mlp2(p, rng, "phi", F, H, N_VARS)
    return p


def mpnn_encode(params, batch):
    """Station latents ``f [B, N, F]`` and cell latents ``h [B, C, F]`` (or None)."""
    B, N = batch.history.shape[:2]
    x = np.concatenate([batch.history.reshape(B, N, -1), tile_const(batch.station_xy, B)], axis=-1)
    f = mlp2(params, "alpha", x)
    if batch.grid is None:
        return f, None
    C = batch.grid.shape[1]
    g = np.concatenate([batch.grid.reshape(B, C, -1), tile_const(batch.cell_xy, B)], axis=-1)
    return f, mlp2(params, "psi", g)


def mpnn_station_pass(params, prefix: str, f, batch):
    """``f_i + gamma(f_i, mean_j beta(f_i, f_j, w_i - w_j, p_i - p_j))``."""
    B, N = batch.history.shape[:2]
    recv, send = batch.edges
    w = batch.history.reshape(B, N, -1)
    dw = w[:, recv] - w[:, send]
    dp = tile_const(batch.station_xy[recv] - batch.station_xy[send], B)
    msg_in = ad.concat([ad.take(f, recv, axis=1), ad.take(f, send, axis=1), dw, dp], axis=-1)
    mu = mlp2(params, f"{prefix}.beta", msg_in)
    agg = ad.segment_mean(mu, recv, N, axis=1)
    return ad.add(f, mlp2(params, f"{prefix}.gamma", ad.concat([f, agg], axis=-1)))


def mpnn_grid_pass(params, prefix: str, f, h, batch):
    """``f_i + omega(f_i, h_nearest, mean_r chi(h_r, f_i, p_i - p_r))`` over linked cells."""
    B, N = batch.history.shape[:2]
    links = batch.links
    if links is None or links.shape[1] < 1:
        raise ConfigurationError("grid pass needs at least one linked cell per station")
    k = links.shape[1]
    recv = np.repeat(np.arange(N), k)
    cell = links.ravel()
    dp = tile_const(batch.station_xy[recv] - batch.cell_xy[cell], B)
    nu = mlp2(params, f"{prefix}.chi", ad.concat([ad.take(h, cell, axis=1), ad.take(f, recv, axis=1), dp], axis=-1))
    agg = ad.segment_mean(nu, recv, N, axis=1)
    h_near = ad.take(h, links[:, 0], axis=1)
    return ad.add(f, mlp2(params, f"{prefix}.omega", ad.concat([f, h_near, agg], axis=-1)))


def mpnn_forward(params, batch, cfg: MPNNConfig):
    """Normalised predictions ``[B, N, 4]``."""
    f, h = mpnn_encode(params, batch)
    if h is not None:
        f = mpnn_grid_pass(params, "grid1", f, h, batch)
    for s in range(cfg.n_station_passes):
        f = mpnn_station_pass(params, f"station{s}", f, batch)
    if h is not None:
        f = mpnn_grid_pass(params, "grid2", f, h, batch)
    return mlp2(params, "phi", f)
