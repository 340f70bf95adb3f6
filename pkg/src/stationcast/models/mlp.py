"""Station-wise MLP: no exchange between stations, one shared parameter set."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigurationError
from .layers import init_mlp2, mlp2, tile_const

N_VARS = 4


@dataclass(frozen=True)
class MLPConfig:
    latent: int = 128
    hidden: int | None = None

    def __post_init__(self):
        if self.latent < 1:
            raise ConfigurationError("latent width must be positive")

    @property
    def width(self) -> int:
        return self.latent if self.hidden is None else self.hidden

    @property
    def graph_k(self) -> int:
        return 1

    def to_dict(self) -> dict:
        return asdict(self)


def init_params(cfg: MLPConfig, back_hours: int, grid_length: int | None, rng) -> dict:
    p: dict[str, np.ndarray] = {}
    F, H = cfg.latent, cfg.width
    init_mlp2(p, rng, "alpha", (back_hours + 1) * N_VARS + 2, H, F)
    trunk_in = F
    if grid_length is not None:
        init_mlp2(p, rng, "psi", grid_length * N_VARS + 2, H, F)
        trunk_in += F
    init_mlp2(p, rng, "trunk", trunk_in, H, F)
    init_mlp2(p, rng, "head", F, H, N_VARS)
    return p


def mlp_forward(params, batch, cfg: MLPConfig):
    """Normalised predictions ``[B, N, 4]``."""
    B, N = batch.history.shape[:2]
    x = np.concatenate([batch.history.reshape(B, N, -1), tile_const(batch.station_xy, B)], axis=-1)
    z = mlp2(params, "alpha", x)
    if batch.grid is not None:
        near = batch.links[:, 0]
        g = batch.grid[:, near].reshape(B, N, -1)
        g = np.concatenate([g, tile_const(batch.cell_xy[near], B)], axis=-1)
        z = ad.concat([z, mlp2(params, "psi", g)], axis=-1)
    return mlp2(params, "head", ad.relu(mlp2(params, "trunk", z)))
