"""Adam, the mini-batch training loop and best-validation model selection.

``train`` is duck-typed: a model needs ``init_params(seed)``,
``loss_and_grad(params, batch)`` and ``loss(params, batch)``; a dataset
needs ``__len__`` and ``batch(indices)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigurationError, DivergenceError, NumericalError

GRID_CHOICES = ("none", "ERA5", "HRRR-A", "HRRR-F")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    batch_size: int = 128
    epochs: int = 200
    seed: int = 0
    lead: int = 1
    model: str = "transformer"
    grid: str = "none"
    back_hours: int = 48
    clip_norm: float | None = 1.0  # None disables clipping
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    train_stride: int = 1  # keep every n-th training anchor
    val_stride: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ConfigurationError("learning rate must be positive and weight decay non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigurationError("batch size must be positive and epochs non-negative")
        if self.lead < 0 or self.back_hours < 1:
            raise ConfigurationError("lead must be >= 0 and back hours >= 1")
        if self.grid not in GRID_CHOICES:
            raise ConfigurationError(f"grid must be one of {GRID_CHOICES}, got {self.grid!r}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ConfigurationError("clip_norm must be positive (or null to disable)")
        if self.train_stride < 1 or self.val_stride < 1:
            raise ConfigurationError("strides must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- Adam


def adam_init(params: dict) -> dict:
    return {
        "step": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0):
    """One Adam update with coupled L2 decay (``g + weight_decay * theta``).

    Returns ``(new_params, new_state)``; inputs are left untouched.
    """
    bad = sorted(k for k, g in grads.items() if not np.all(np.isfinite(g)))
    if bad:
        raise NumericalError(f"non-finite gradient in {bad}")
    t = state["step"] + 1
    new_p, new_m, new_v = {}, {}, {}
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for k, theta in params.items():
        g = grads[k] + weight_decay * theta if weight_decay else grads[k]
        m = beta1 * state["m"][k] + (1.0 - beta1) * g
        v = beta2 * state["v"][k] + (1.0 - beta2) * g * g
        new_p[k] = theta - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        new_m[k], new_v[k] = m, v
    return new_p, {"step": t, "m": new_m, "v": new_v}


def clip_by_global_norm(grads: dict, max_norm: float) -> tuple[dict, float]:
    norm = math.sqrt(math.fsum(float(np.vdot(g, g)) for g in grads.values()))
    if norm <= max_norm:
        return grads, norm
    s = max_norm / norm
    return {k: g * s for k, g in grads.items()}, norm


# ---------------------------------------------------------------- loop


@dataclass
class TrainResult:
    params: dict
    best_epoch: int
    best_val: float
    history: list = field(default_factory=list)  # (epoch, train_loss, val_loss)

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss"])
        for e, tr, va in self.history:
            w.writerow([e, "" if tr is None else repr(tr), repr(va)])
        return buf.getvalue()


def dataset_loss(model, params, data, batch_size: int) -> float:
    """Sample-weighted mean of the per-batch losses."""
    n = len(data)
    total = []
    for s in range(0, n, batch_size):
        idx = np.arange(s, min(n, s + batch_size))
        total.append(float(model.loss(params, data.batch(idx)).numpy()) * len(idx))
    return math.fsum(total) / n


def train(model, train_data, val_data, cfg: TrainConfig, params=None, log=None) -> TrainResult:
    """Train and keep the parameters with the lowest validation loss.

    Epoch 0 in the history is the initialisation.  ``log`` (a callable)
    receives each history row as it is produced.  A non-finite loss raises
    :class:`DivergenceError` whose ``result`` holds the best parameters so far.
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise ConfigurationError("training and validation sets must be non-empty")
    params = model.init_params(cfg.seed) if params is None else dict(params)
    state = adam_init(params)
    val = dataset_loss(model, params, val_data, cfg.batch_size)
    result = TrainResult(params, 0, val, [(0, None, val)])
    if log:
        log(result.history[-1])
    if not math.isfinite(val):
        raise DivergenceError("validation loss is not finite at initialisation")
    n = len(train_data)
    for epoch in range(1, cfg.epochs + 1):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
        losses = []
        try:
            for s in range(0, n, cfg.batch_size):
                idx = order[s : s + cfg.batch_size]
                loss, grads = model.loss_and_grad(params, train_data.batch(idx))
                if not math.isfinite(loss):
                    raise NumericalError(f"training loss {loss}")
                if cfg.clip_norm is not None:
                    grads, _ = clip_by_global_norm(grads, cfg.clip_norm)
                params, state = adam_step(
                    params, grads, state, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay
                )
                losses.append(loss * len(idx))
            val = dataset_loss(model, params, val_data, cfg.batch_size)
        except NumericalError as exc:
            err = DivergenceError(f"diverged in epoch {epoch}: {exc}")
            err.result = result
            raise err from None
        if not math.isfinite(val):
            err = DivergenceError(f"validation loss is {val} after epoch {epoch}")
            err.result = result
            raise err
        row = (epoch, math.fsum(losses) / n, val)
        result.history.append(row)
        if log:
            log(row)
        if val < result.best_val:
            result.params, result.best_epoch, result.best_val = params, epoch, val
    return result


class ModelForecaster:
    """A trained model behind the forecaster interface (physical units out)."""

    def __init__(self, model, params, norm, name: str | None = None, source: str = "none", batch_size: int = 256):
        self.model, self.params, self.norm = model, params, norm
        self.name = name or model.kind
        self.source = source
        self.batch_size = batch_size

    def predict(self, samples) -> np.ndarray:
        out = []
        for s in range(0, len(samples), self.batch_size):
            idx = np.arange(s, min(len(samples), s + self.batch_size))
            out.append(self.model.predict(self.params, samples.batch(idx)))
        z = np.concatenate(out, axis=0)
        return z * self.norm.station_std + self.norm.station_mean
