import numpy as np
import pytest
from helpers import BatchData, toy_batch

from stationcast import autodiff as ad
from stationcast import checkpoint
from stationcast.errors import ConfigurationError, DivergenceError, NumericalError
from stationcast.models import Model
from stationcast.training import TrainConfig, adam_init, adam_step, clip_by_global_norm, dataset_loss, train

OVERFIT = {
    "transformer": {"d": 32, "n_heads": 4, "n_blocks": 2, "pos_width": 8},
    "mpnn": {"latent": 32, "n_station_passes": 2, "k": 3},
    "mlp": {"latent": 64},
}


# ---------------------------------------------------------------- Adam


def test_first_step_is_signed_lr():
    p = {"w": np.array([1.0, -2.0, 3.0])}
    g = {"w": np.array([0.5, -4.0, 1e-3])}
    new, state = adam_step(p, g, adam_init(p), lr=0.01)
    assert np.allclose(new["w"] - p["w"], -0.01 * np.sign(g["w"]), rtol=1e-4)
    assert state["step"] == 1


def test_zero_gradient_no_decay_is_fixed_point():
    p = {"w": np.array([[1.0, 2.0]])}
    new, _ = adam_step(p, {"w": np.zeros((1, 2))}, adam_init(p), lr=0.1)
    assert np.array_equal(new["w"], p["w"])


def test_coupled_weight_decay_enters_gradient():
    p = {"w": np.array([2.0, -3.0])}
    new, _ = adam_step(p, {"w": np.zeros(2)}, adam_init(p), lr=0.01, weight_decay=0.1)
    assert np.allclose(new["w"] - p["w"], [-0.01, 0.01], rtol=1e-6)


def _scalar_adam_oracle(theta, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t in range(1, steps + 1):
        g = 2 * theta
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1**t)) / ((v / (1 - b2**t)) ** 0.5 + eps)
    return theta


def test_quadratic_converges():
    p = {"t": np.array(1.0)}
    state = adam_init(p)
    for _ in range(100):
        p, state = adam_step(p, {"t": 2 * p["t"]}, state, lr=0.1)
    assert abs(float(p["t"])) < 0.05
    assert abs(float(p["t"]) - _scalar_adam_oracle(1.0, 0.1, 100)) < 1e-12


def test_nonfinite_gradient_aborts():
    p = {"a": np.zeros(2), "b": np.zeros(2)}
    with pytest.raises(NumericalError, match="'b'"):
        adam_step(p, {"a": np.zeros(2), "b": np.array([0.0, np.nan])}, adam_init(p), lr=0.1)


def test_inputs_not_mutated():
    p = {"w": np.ones(3)}
    s = adam_init(p)
    adam_step(p, {"w": np.ones(3)}, s, lr=0.1)
    assert np.all(p["w"] == 1) and s["step"] == 0 and np.all(s["m"]["w"] == 0)


def test_clip_by_global_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    c, n = clip_by_global_norm(g, 1.0)
    assert n == 5.0 and np.allclose([c["a"][0], c["b"][0]], [0.6, 0.8])
    same, _ = clip_by_global_norm(g, 10.0)
    assert same is g


def test_train_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ConfigurationError):
        TrainConfig(grid="GFS")
    with pytest.raises(ConfigurationError):
        TrainConfig(clip_norm=-1)
    d = TrainConfig()
    assert (d.learning_rate, d.weight_decay, d.batch_size, d.epochs) == (1e-4, 1e-4, 128, 200)


# ---------------------------------------------------------------- loop with a linear model


class Linear:
    """y = x W + b with MSE; duck-typed for ``train``."""

    def __init__(self, n_in, n_out):
        self.n_in, self.n_out = n_in, n_out

    def init_params(self, seed):
        rng = np.random.default_rng(seed)
        return {"w": rng.normal(size=(self.n_in, self.n_out)) * 0.1, "b": np.zeros(self.n_out)}

    def loss(self, params, batch):
        x, y = batch
        return ad.mse(ad.linear(x, params["w"], params["b"]), y)

    def loss_and_grad(self, params, batch):
        tape = ad.Tape()
        w = tape.watch_all(params)
        loss = self.loss(w, batch)
        return float(loss.numpy()), ad.backward(tape, loss, w)


class XY:
    def __init__(self, x, y):
        self.x, self.y = x, y

    def __len__(self):
        return len(self.x)

    def batch(self, idx):
        return self.x[idx], self.y[idx]


def _planted(seed=0, n=400, noise=0.01):
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(3, 2))
    b = np.array([0.5, -1.0])
    x = rng.normal(size=(n, 3))
    y = x @ w + b + noise * rng.normal(size=(n, 2))
    return x, y, w, b


def test_recovers_planted_linear_weights():
    x, y, w, b = _planted()
    ls = np.linalg.lstsq(np.c_[x, np.ones(len(x))], y, rcond=None)[0]
    cfg = TrainConfig(learning_rate=0.05, weight_decay=0.0, batch_size=32, epochs=200, clip_norm=None)
    res = train(Linear(3, 2), XY(x[:300], y[:300]), XY(x[300:], y[300:]), cfg)
    assert np.max(np.abs(res.params["w"] - ls[:3])) < 1e-2
    assert np.max(np.abs(res.params["b"] - ls[3])) < 1e-2
    assert np.max(np.abs(res.params["w"] - w)) < 1e-2


def test_zero_epochs_returns_initialisation():
    x, y, *_ = _planted(n=50)
    m = Linear(3, 2)
    res = train(m, XY(x, y), XY(x, y), TrainConfig(epochs=0, seed=4))
    init = m.init_params(4)
    assert all(np.array_equal(res.params[k], init[k]) for k in init)
    assert res.best_epoch == 0 and len(res.history) == 1


def test_best_checkpoint_minimises_logged_validation():
    x, y, *_ = _planted(n=200, noise=1.0)
    rows = []
    cfg = TrainConfig(learning_rate=0.2, weight_decay=0.0, batch_size=8, epochs=30)
    res = train(Linear(3, 2), XY(x[:20], y[:20]), XY(x[20:], y[20:]), cfg, log=rows.append)
    assert rows == res.history
    assert all(res.best_val <= v for _, _, v in res.history)
    assert res.best_val == dataset_loss(Linear(3, 2), res.params, XY(x[20:], y[20:]), 8)
    assert res.log_csv().splitlines()[0] == "epoch,train_loss,val_loss"


class Exploding(Linear):
    """Gradients turn non-finite after a fixed number of steps."""

    def __init__(self, after):
        super().__init__(3, 2)
        self.calls, self.after = 0, after

    def loss_and_grad(self, params, batch):
        self.calls += 1
        loss, grads = super().loss_and_grad(params, batch)
        if self.calls > self.after:
            grads["w"] = grads["w"] * np.inf
        return loss, grads


def test_divergence_keeps_last_good():
    x, y, *_ = _planted(n=64)
    cfg = TrainConfig(learning_rate=0.05, weight_decay=0.0, batch_size=16, epochs=5, clip_norm=None)
    with pytest.raises(DivergenceError, match="epoch 3") as info:
        train(Exploding(after=8), XY(x, y), XY(x, y), cfg)
    res = info.value.result
    assert res.best_epoch == 2 and [r[0] for r in res.history] == [0, 1, 2]
    assert all(np.all(np.isfinite(v)) for v in res.params.values())


def test_nan_loss_diverges():
    class NanLoss(Linear):
        def loss_and_grad(self, params, batch):
            return float("nan"), super().loss_and_grad(params, batch)[1]

    x, y, *_ = _planted(n=16)
    with pytest.raises(DivergenceError, match="epoch 1"):
        train(NanLoss(3, 2), XY(x, y), XY(x, y), TrainConfig(epochs=2))


def test_empty_split_rejected():
    x, y, *_ = _planted(n=10)
    with pytest.raises(ConfigurationError):
        train(Linear(3, 2), XY(x[:0], y[:0]), XY(x, y), TrainConfig())


# ---------------------------------------------------------------- real models


def test_same_seed_bitwise_identical_checkpoints():
    data = BatchData(toy_batch(seed=0, batch=12, k=3))
    cfg = TrainConfig(learning_rate=1e-3, batch_size=4, epochs=3, seed=7)
    blobs = []
    for _ in range(2):
        m = Model("mpnn", OVERFIT["mpnn"], 4, 6)
        res = train(m, data, data, cfg)
        blobs.append(checkpoint.encode(res.params, {"train": cfg.to_dict()}))
        blobs.append(res.log_csv().encode())
    assert blobs[0] == blobs[2] and blobs[1] == blobs[3]


@pytest.mark.parametrize("kind", ["transformer", "mpnn", "mlp"])
def test_overfit_ten_samples(kind):
    data = BatchData(toy_batch(seed=0, batch=10, k=3))
    m = Model(kind, OVERFIT[kind], 4, 6)
    cfg = TrainConfig(learning_rate=3e-3, weight_decay=0.0, batch_size=10, epochs=200, clip_norm=None)
    res = train(m, data, data, cfg)
    first = dataset_loss(m, m.init_params(cfg.seed), data, 10)
    assert dataset_loss(m, res.params, data, 10) < 0.01 * first
