"""Trainable forecasters: transformer, MPNN and station-wise MLP.

All three map a :class:`~stationcast.samples.Batch` to normalised
predictions ``[B, N, 4]`` and share the same wrapper, :class:`Model`.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigurationError
from . import mlp, mpnn, transformer
from .mlp import MLPConfig, mlp_forward
from .mpnn import MPNNConfig, mpnn_encode, mpnn_forward, mpnn_grid_pass, mpnn_station_pass
from .transformer import TransformerConfig, attention_block, embed_station_token, transformer_forward

KINDS = {
    "transformer": (TransformerConfig, transformer.init_params, transformer_forward),
    "mpnn": (MPNNConfig, mpnn.init_params, mpnn_forward),
    "mlp": (MLPConfig, mlp.init_params, mlp_forward),
}


def make_config(kind: str, values: dict | None = None):
    """Model config from a JSON-style dict; unknown keys are rejected."""
    if kind not in KINDS:
        raise ConfigurationError(f"unknown model kind {kind!r}; choose from {sorted(KINDS)}")
    cls = KINDS[kind][0]
    values = dict(values or {})
    known = {f.name for f in dataclasses.fields(cls)}
    extra = sorted(set(values) - known)
    if extra:
        raise ConfigurationError(f"unknown {kind} config keys: {extra}")
    return cls(**values)


class Model:
    """A model kind, its config and the input window sizes it was built for.

    ``grid_length`` is the number of grid steps per window, or ``None`` for
    the variant without gridded input.
    """

    def __init__(self, kind: str, config=None, back_hours: int = 48, grid_length: int | None = None):
        if isinstance(config, dict) or config is None:
            config = make_config(kind, config)
        self.kind = kind
        self.config = config
        self.back_hours = int(back_hours)
        self.grid_length = None if grid_length is None else int(grid_length)
        self._init, self._forward = KINDS[kind][1:]

    @property
    def graph_k(self) -> int:
        return self.config.graph_k

    @property
    def graph_mode(self) -> str:
        return getattr(self.config, "graph_mode", "delaunay")

    def spec(self) -> dict:
        return {
            "kind": self.kind,
            "config": self.config.to_dict(),
            "back_hours": self.back_hours,
            "grid_length": self.grid_length,
        }

    @classmethod
    def from_spec(cls, spec: dict) -> Model:
        return cls(spec["kind"], spec["config"], spec["back_hours"], spec["grid_length"])

    def init_params(self, seed: int = 0) -> dict[str, np.ndarray]:
        rng = np.random.default_rng(seed)
        return self._init(self.config, self.back_hours, self.grid_length, rng)

    def _check(self, batch):
        if batch.history.shape[2] != self.back_hours + 1:
            raise ConfigurationError(
                f"history window: model expects {self.back_hours + 1} steps, batch has {batch.history.shape[2]}"
            )
        has = None if batch.grid is None else batch.grid.shape[2]
        if has != self.grid_length:
            raise ConfigurationError(f"grid window: model expects {self.grid_length} steps, batch has {has}")

    def forward(self, params, batch):
        self._check(batch)
        return self._forward(params, batch, self.config)

    def loss(self, params, batch):
        return ad.mse(self.forward(params, batch), batch.target)

    def predict(self, params, batch) -> np.ndarray:
        """Normalised predictions without recording a tape."""
        return self.forward(params, batch).numpy()

    def loss_and_grad(self, params, batch):
        tape = ad.Tape()
        watched = tape.watch_all(params)
        loss = self.loss(watched, batch)
        return float(loss.numpy()), ad.backward(tape, loss, watched)


def describe(params: dict[str, np.ndarray]) -> str:
    """One line per parameter (name, shape, count) plus the total."""
    lines = []
    total = 0
    width = max((len(k) for k in params), default=4)
    for name in sorted(params):
        v = params[name]
        total += v.size
        lines.append(f"{name:<{width}}  {str(list(v.shape)):<14} {v.size}")
    lines.append(f"{'total':<{width}}  {'':<14} {total}")
    return "\n".join(lines)


__all__ = [
    "KINDS",
    "MLPConfig",
    "MPNNConfig",
    "Model",
    "TransformerConfig",
    "attention_block",
    "describe",
    "embed_station_token",
    "make_config",
    "mlp_forward",
    "mpnn_encode",
    "mpnn_forward",
    "mpnn_grid_pass",
    "mpnn_station_pass",
    "transformer_forward",
]
