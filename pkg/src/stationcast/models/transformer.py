"""Per-station-token transformer encoder.

Each station becomes one token built from its history window and the grid
window of its nearest cell (or its k linked cells stacked).  Tokens attend
to every other station; a shared MLP head reads out each token.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..errors import ConfigurationError
from .layers import dense, init_linear, init_mlp2, mlp2

N_VARS = 4


@dataclass(frozen=True)
class TransformerConfig:
    d: int = 128
    n_heads: int = 4
    n_blocks: int = 4
    d_h: int | None = None  # FFN width, 4d when unset
    grid_mode: str = "nearest"  # or "stacked_k"
    k: int = 8  # cells stacked per token when grid_mode == "stacked_k"
    pos_width: int = 16
    attn_scale: str = "head"  # "head": 1/sqrt(d/h), "model": 1/sqrt(d)
    ln_eps: float = 1e-5

    def __post_init__(self):
        if self.d < 2 or self.n_heads < 1 or self.n_blocks < 0 or self.pos_width < 1:
            raise ConfigurationError(f"invalid transformer sizes: {self}")
        if self.d % self.n_heads:
            raise ConfigurationError(f"d={self.d} is not divisible by n_heads={self.n_heads}")
        if self.ffn_width < self.d:
            raise ConfigurationError(f"d_h={self.ffn_width} must be at least d={self.d}")
        if self.grid_mode not in ("nearest", "stacked_k"):
            raise ConfigurationError(f"unknown grid_mode {self.grid_mode!r}")
        if self.attn_scale not in ("head", "model"):
            raise ConfigurationError(f"unknown attn_scale {self.attn_scale!r}")
        if self.k < 1:
            raise ConfigurationError("k must be at least 1")

    @property
    def ffn_width(self) -> int:
        return 4 * self.d if self.d_h is None else self.d_h

    @property
    def cells_per_token(self) -> int:
        return self.k if self.grid_mode == "stacked_k" else 1

    @property
    def graph_k(self) -> int:
        return self.cells_per_token

    def to_dict(self) -> dict:
        return asdict(self)


def token_width(cfg: TransformerConfig, back_hours: int, grid_length: int | None) -> int:
    width = (back_hours + 1) * N_VARS
    if grid_length is not None:
        width += cfg.cells_per_token * grid_length * N_VARS
    return width


def init_params(cfg: TransformerConfig, back_hours: int, grid_length: int | None, rng) -> dict:
    p: dict[str, np.ndarray] = {}
    d = cfg.d
    init_mlp2(p, rng, "embed", token_width(cfg, back_hours, grid_length), d, d)
    init_mlp2(p, rng, "pos", 2, cfg.pos_width, cfg.pos_width)
    init_linear(p, rng, "proj", d + cfg.pos_width, d)
    for i in range(cfg.n_blocks):
        b = f"block{i}"
        for m in ("q", "k", "v", "o"):
            init_linear(p, rng, f"{b}.attn.{m}", d, d, bias=False)
        for ln in ("ln1", "ln2"):
            p[f"{b}.{ln}.gain"] = np.ones(d)
            p[f"{b}.{ln}.bias"] = np.zeros(d)
        init_mlp2(p, rng, f"{b}.ffn", d, cfg.ffn_width, d)
    init_mlp2(p, rng, "head", d, d, N_VARS)
    return p


def _token_inputs(batch, cfg: TransformerConfig) -> np.ndarray:
    """``[B, N, F]`` flattened history plus grid window(s) per station."""
    B, N = batch.history.shape[:2]
    parts = [batch.history.reshape(B, N, -1)]
    if batch.grid is not None:
        links = batch.links[:, : cfg.cells_per_token]
        if links.shape[1] != cfg.cells_per_token:
            raise ConfigurationError(f"token needs {cfg.cells_per_token} linked cells, graph has {links.shape[1]}")
        parts.append(batch.grid[:, links].reshape(B, N, -1))
    return np.concatenate(parts, axis=-1)


def embed_tokens(params, inputs: np.ndarray, coords: np.ndarray):
    """Data token MLP, coordinate MLP, concatenated and projected to ``d``."""
    want = params["embed.0.w"].shape[0]
    if inputs.shape[-1] != want:
        raise ConfigurationError(f"embedder input width: expected {want}, got {inputs.shape[-1]}")
    B = inputs.shape[0]
    tok = mlp2(params, "embed", inputs)
    pos = ad.tile(mlp2(params, "pos", coords), B)
    return dense(params, "proj", ad.concat([tok, pos], axis=-1))


def embed_station_token(history, grid_window, coords, params):
    """Data token ``[d]`` of one station (before the positional part)."""
    parts = [np.asarray(history, dtype=np.float64).ravel()]
    if grid_window is not None:
        parts.append(np.asarray(grid_window, dtype=np.float64).ravel())
    x = np.concatenate(parts)
    want = params["embed.0.w"].shape[0]
    if x.size != want:
        raise ConfigurationError(f"embedder input width: expected {want}, got {x.size}")
    return ad.reshape(mlp2(params, "embed", x[None]), (-1,))


def multi_head_attention(params, prefix: str, x, n_heads: int, scale: str = "head"):
    """``Concat(head_1..head_h) W_O`` for tokens ``x`` of shape ``[B, N, d]``."""
    B, N, d = x.shape
    dh = d // n_heads

    def heads(name):
        y = ad.linear(x, params[f"{prefix}.{name}.w"])
        y = ad.transpose(ad.reshape(y, (B, N, n_heads, dh)), (0, 2, 1, 3))
        return ad.reshape(y, (B * n_heads, N, dh))

    q, k, v = heads("q"), heads("k"), heads("v")
    c = 1.0 / np.sqrt(dh if scale == "head" else d)
    scores = ad.scale(ad.bmm(q, ad.transpose(k, (0, 2, 1))), c)
    att = ad.bmm(ad.softmax_rows(scores), v)
    att = ad.reshape(ad.transpose(ad.reshape(att, (B, n_heads, N, dh)), (0, 2, 1, 3)), (B, N, d))
    return ad.linear(att, params[f"{prefix}.o.w"])


def attention_block(params, prefix: str, x, cfg: TransformerConfig):
    """Post-norm encoder block: ``LN(x + MHA(x))`` then ``LN(y + FFN(y))``."""
    squeeze = x.ndim == 2
    if squeeze:
        x = ad.reshape(x, (1,) + x.shape)
    h = ad.add(x, multi_head_attention(params, f"{prefix}.attn", x, cfg.n_heads, cfg.attn_scale))
    h = ad.layer_norm(h, params[f"{prefix}.ln1.gain"], params[f"{prefix}.ln1.bias"], cfg.ln_eps)
    h = ad.add(h, mlp2(params, f"{prefix}.ffn", h))
    h = ad.layer_norm(h, params[f"{prefix}.ln2.gain"], params[f"{prefix}.ln2.bias"], cfg.ln_eps)
    return ad.reshape(h, h.shape[1:]) if squeeze else h


def transformer_forward(params, batch, cfg: TransformerConfig):
    """Normalised predictions ``[B, N, 4]``."""
    x = embed_tokens(params, _token_inputs(batch, cfg), batch.station_xy)
    for i in range(cfg.n_blocks):
        x = attention_block(params, f"block{i}", x, cfg)
    return mlp2(params, "head", x)
