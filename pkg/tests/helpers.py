from itertools import combinations

import numpy as np


def central_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of scalar ``f`` at ``x``."""
    x = np.array(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = f(x)
        flat[i] = old - h
        fm = f(x)
        flat[i] = old
        gf[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-wise relative error, robust to all-zero gradients."""
    num = np.linalg.norm(np.ravel(a) - np.ravel(b))
    den = max(np.linalg.norm(np.ravel(a)), np.linalg.norm(np.ravel(b)), 1e-12)
    return float(num / den)


# ---------------------------------------------------------------- toy model inputs

TOY_CONFIGS = {
    "transformer": {"d": 8, "n_heads": 2, "n_blocks": 1, "pos_width": 4},
    "mpnn": {"latent": 16, "n_station_passes": 2, "k": 3, "hidden": 8},
    "mlp": {"latent": 16, "hidden": 8},
}


def toy_batch(seed=0, n_stations=4, back_hours=4, lead=1, k=3, batch=2, with_grid=True, mesh=3):
    """Random normalised batch on a small mesh with a real station graph."""
    from stationcast.geometry import build_graph
    from stationcast.samples import Batch

    rng = np.random.default_rng(seed)
    xs = np.linspace(-1.5, 1.5, mesh)
    cell_xy = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1).reshape(-1, 2)
    station_xy = rng.uniform(-1.2, 1.2, (n_stations, 2))
    graph = build_graph(station_xy, cell_xy, k=k) if n_stations >= 3 else None
    L = back_hours + 1 + lead
    edges = graph.directed_edges() if graph else (np.array([0, 1]), np.array([1, 0]))
    links = graph.grid_links if graph else np.argsort(((station_xy[:, None] - cell_xy) ** 2).sum(-1), axis=1)[:, :k]
    return Batch(
        history=rng.normal(size=(batch, n_stations, back_hours + 1, 4)),
        grid=rng.normal(size=(batch, len(cell_xy), L, 4)) if with_grid else None,
        target=rng.normal(size=(batch, n_stations, 4)),
        station_xy=station_xy,
        cell_xy=cell_xy,
        links=links,
        edges=edges,
    )


def permute_batch(b, perm):
    """Relabel stations: new station i is old station perm[i]."""
    from stationcast.samples import Batch

    inv = np.argsort(perm)
    recv, send = b.edges
    return Batch(
        history=b.history[:, perm],
        grid=b.grid,
        target=b.target[:, perm],
        station_xy=b.station_xy[perm],
        cell_xy=b.cell_xy,
        links=b.links[perm],
        edges=(inv[recv], inv[send]),
    )


def model_gradient_errors(model, params, batch, h=1e-5):
    """Norm-wise relative error between tape and finite-difference gradients."""
    _, grads = model.loss_and_grad(params, batch)
    out = {}
    for name, value in params.items():
        def f(x, name=name):
            q = dict(params)
            q[name] = x
            return float(model.loss(q, batch).numpy())

        out[name] = rel_err(grads[name], central_diff(f, value, h))
    return out


class BatchData:
    """A fixed batch exposed as a dataset of its rows."""

    def __init__(self, batch):
        self.full = batch

    def __len__(self):
        return self.full.history.shape[0]

    def batch(self, idx):
        from dataclasses import replace

        idx = np.asarray(idx)
        b = self.full
        return replace(b, history=b.history[idx], grid=None if b.grid is None else b.grid[idx], target=b.target[idx])


def brute_force_delaunay(points, rtol=1e-9):
    """O(n^4) oracle: edges of every triangle with an empty open circumcircle.

    Vectorised over all point triples: each triple's circumcentre and radius
    are computed, then every point is tested against the circle.
    """
    p = np.asarray(points, dtype=np.float64)
    n = len(p)
    tri = np.array(list(combinations(range(n), 3)))
    a, b, c = p[tri[:, 0]], p[tri[:, 1]], p[tri[:, 2]]
    d = 2 * (a[:, 0] * (b[:, 1] - c[:, 1]) + b[:, 0] * (c[:, 1] - a[:, 1]) + c[:, 0] * (a[:, 1] - b[:, 1]))
    keep = d != 0
    tri, a, b, c, d = tri[keep], a[keep], b[keep], c[keep], d[keep]
    a2, b2, c2 = (a**2).sum(1), (b**2).sum(1), (c**2).sum(1)
    ux = (a2 * (b[:, 1] - c[:, 1]) + b2 * (c[:, 1] - a[:, 1]) + c2 * (a[:, 1] - b[:, 1])) / d
    uy = (a2 * (c[:, 0] - b[:, 0]) + b2 * (a[:, 0] - c[:, 0]) + c2 * (b[:, 0] - a[:, 0])) / d
    r2 = (a[:, 0] - ux) ** 2 + (a[:, 1] - uy) ** 2
    edges = set()
    for lo in range(0, len(tri), 4096):
        sl = np.s_[lo : lo + 4096]
        dist2 = (p[None, :, 0] - ux[sl, None]) ** 2 + (p[None, :, 1] - uy[sl, None]) ** 2
        inside = dist2 < r2[sl, None] * (1 - rtol)
        for i, j, k in tri[sl][~inside.any(axis=1)]:
            edges |= {(int(i), int(j)), (int(i), int(k)), (int(j), int(k))}
    return edges
