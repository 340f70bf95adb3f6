"""Spatial graph construction for stations and grid cells.

Coordinates are projected with an equirectangular map (longitude scaled by
the cosine of a reference latitude) before any distance is taken.  Station
links are either the Delaunay triangulation or the complete graph; each
station additionally receives directed links from its ``k`` nearest grid
cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .errors import ConfigurationError, GeometryError

EARTH_RADIUS_KM = 6371.0088

_ORIENT_BOUND = (3.0 + 16.0 * 2.0**-53) * 2.0**-53
_INCIRCLE_BOUND = (10.0 + 96.0 * 2.0**-53) * 2.0**-53


@dataclass(frozen=True)
class Projection:
    lat0: float
    lon0: float

    @classmethod
    def centered_on(cls, lat, lon) -> Projection:
        return cls(float(np.mean(lat)), float(np.mean(lon)))

    def __call__(self, lat, lon) -> np.ndarray:
        """Return ``[..., 2]`` kilometre coordinates (east, north)."""
        lat = np.asarray(lat, dtype=np.float64)
        lon = np.asarray(lon, dtype=np.float64)
        k = np.pi / 180.0 * EARTH_RADIUS_KM
        x = (lon - self.lon0) * np.cos(np.deg2rad(self.lat0)) * k
        y = (lat - self.lat0) * k
        return np.stack([x, y], axis=-1)


# ---------------------------------------------------------------- predicates


def orient2d(a, b, c) -> int:
    """Sign of twice the signed area of (a, b, c): +1 counter-clockwise."""
    acx, acy = a[0] - c[0], a[1] - c[1]
    bcx, bcy = b[0] - c[0], b[1] - c[1]
    left, right = acx * bcy, acy * bcx
    det = left - right
    if abs(det) > _ORIENT_BOUND * (abs(left) + abs(right)):
        return 1 if det > 0 else -1
    fa = [Fraction(v) for v in (*a, *b, *c)]
    ex = (fa[0] - fa[4]) * (fa[3] - fa[5]) - (fa[1] - fa[5]) * (fa[2] - fa[4])
    return (ex > 0) - (ex < 0)


def incircle(a, b, c, d) -> int:
    """+1 if d is strictly inside the circle through CCW (a, b, c), 0 if on it."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    bc, cb = bdx * cdy, cdx * bdy
    ca, ac = cdx * ady, adx * cdy
    ab, ba = adx * bdy, bdx * ady
    det = alift * (bc - cb) + blift * (ca - ac) + clift * (ab - ba)
    perm = (abs(bc) + abs(cb)) * alift + (abs(ca) + abs(ac)) * blift + (abs(ab) + abs(ba)) * clift
    if abs(det) > _INCIRCLE_BOUND * perm:
        return 1 if det > 0 else -1
    F = Fraction
    ax_, ay_ = F(a[0]) - F(d[0]), F(a[1]) - F(d[1])
    bx_, by_ = F(b[0]) - F(d[0]), F(b[1]) - F(d[1])
    cx_, cy_ = F(c[0]) - F(d[0]), F(c[1]) - F(d[1])
    ex = (
        (ax_ * ax_ + ay_ * ay_) * (bx_ * cy_ - cx_ * by_)
        + (bx_ * bx_ + by_ * by_) * (cx_ * ay_ - ax_ * cy_)
        + (cx_ * cx_ + cy_ * cy_) * (ax_ * by_ - bx_ * ay_)
    )
    return (ex > 0) - (ex < 0)


# ---------------------------------------------------------------- Delaunay

_GHOST = -1


def delaunay_triangles(points) -> list[tuple[int, int, int]]:
    """Counter-clockwise Delaunay triangles by incremental (Bowyer-Watson) insertion.

    The convex hull is closed with ghost triangles sharing a vertex at
    infinity, so no bounding super-triangle is needed and hull edges are
    exact.
    """
    pts = [tuple(map(float, p)) for p in np.asarray(points, dtype=np.float64)]
    n = len(pts)
    if n < 3:
        raise GeometryError(f"Delaunay needs at least 3 points, got {n}")
    if len(set(pts)) != n:
        raise GeometryError("duplicate points")

    i0, i1 = 0, 1
    i2 = next((i for i in range(2, n) if orient2d(pts[i0], pts[i1], pts[i]) != 0), None)
    if i2 is None:
        raise GeometryError("all points are collinear")
    if orient2d(pts[i0], pts[i1], pts[i2]) < 0:
        i1, i2 = i2, i1
    tris = {(i0, i1, i2), (i1, i0, _GHOST), (i2, i1, _GHOST), (i0, i2, _GHOST)}

    def in_circle(tri, p) -> bool:
        a, b, c = tri
        if c == _GHOST:
            o = orient2d(pts[a], pts[b], p)
            if o > 0:
                return True
            if o < 0:
                return False
            # on the hull line: inside only strictly between a and b
            pa, pb = pts[a], pts[b]
            dot = (p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])
            len2 = (pb[0] - pa[0]) ** 2 + (pb[1] - pa[1]) ** 2
            return 0 < dot < len2
        return incircle(pts[a], pts[b], pts[c], p) > 0

    for idx in range(n):
        if idx in (i0, i1, i2):
            continue
        p = pts[idx]
        cavity = [t for t in tris if in_circle(t, p)]
        edges = set()
        for a, b, c in cavity:
            edges.update(((a, b), (b, c), (c, a)))
        for t in cavity:
            tris.discard(t)
        for a, b in edges:
            if (b, a) in edges:
                continue
            if a == _GHOST:
                tris.add((b, idx, _GHOST))
            elif b == _GHOST:
                tris.add((idx, a, _GHOST))
            else:
                tris.add((a, b, idx))
    out = []
    for t in tris:
        if _GHOST in t:
            continue
        k = t.index(min(t))
        out.append(t[k:] + t[:k])
    return sorted(out)


def _edges_of(triangles) -> set[tuple[int, int]]:
    edges = set()
    for a, b, c in triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            edges.add((min(u, v), max(u, v)))
    return edges


def delaunay(points) -> set[tuple[int, int]]:
    """Undirected Delaunay edge set as ``(i, j)`` pairs with ``i < j``."""
    return _edges_of(delaunay_triangles(points))


def is_delaunay(points, triangles) -> bool:
    """True if no point lies strictly inside any triangle's circumcircle."""
    pts = [tuple(map(float, p)) for p in np.asarray(points, dtype=np.float64)]
    for a, b, c in triangles:
        for i, p in enumerate(pts):
            if i not in (a, b, c) and incircle(pts[a], pts[b], pts[c], p) > 0:
                return False
    return True


def fully_connected(points) -> set[tuple[int, int]]:
    return set(combinations(range(len(points)), 2))


# ---------------------------------------------------------------- grid links


def knn_grid_links(station_xy, cell_xy, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest cells per station, nearest first.

    Distances within 1e-10 (relative to the squared mean cell spacing) are
    treated as ties and broken by lower cell index.
    """
    station_xy = np.asarray(station_xy, dtype=np.float64).reshape(-1, 2)
    cell_xy = np.asarray(cell_xy, dtype=np.float64).reshape(-1, 2)
    m = len(cell_xy)
    if k < 1 or k > m:
        raise ConfigurationError(f"k={k} must be between 1 and the number of cells ({m})")
    d2 = ((station_xy[:, None, :] - cell_xy[None, :, :]) ** 2).sum(axis=-1)
    ref = _spacing2(cell_xy)
    key = np.round(d2 / ref, 10)
    idx = np.broadcast_to(np.arange(m), d2.shape)
    order = np.lexsort((idx, key), axis=-1)
    return np.ascontiguousarray(order[:, :k])


def nearest_cell(station_xy, cell_xy) -> np.ndarray:
    """Nearest cell per station with lower-index tie-break."""
    return knn_grid_links(station_xy, cell_xy, 1)[:, 0]


def _spacing2(cell_xy: np.ndarray) -> float:
    if len(cell_xy) < 2:
        return 1.0
    span = np.ptp(cell_xy, axis=0)
    s = float(np.prod(span[span > 0]) / len(cell_xy)) if np.any(span > 0) else 1.0
    return s if s > 0 else 1.0


# ---------------------------------------------------------------- graph


@dataclass
class HeteroGraph:
    """Stations, grid cells, undirected station edges and grid-to-station links."""

    station_xy: np.ndarray
    cell_xy: np.ndarray
    station_edges: np.ndarray  # [E, 2], i < j, sorted
    grid_links: np.ndarray  # [N, k] global cell indices, nearest first
    mode: str = "delaunay"
    station_ids: list[str] = field(default_factory=list)

    @property
    def n_stations(self) -> int:
        return len(self.station_xy)

    @property
    def k(self) -> int:
        return self.grid_links.shape[1]

    @property
    def nearest(self) -> np.ndarray:
        return self.grid_links[:, 0]

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(receiver, sender) arrays covering both directions of every edge."""
        e = self.station_edges
        if len(e) == 0:
            return np.zeros(0, dtype=np.intp), np.zeros(0, dtype=np.intp)
        recv = np.concatenate([e[:, 0], e[:, 1]])
        send = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((send, recv))
        return recv[order], send[order]

    def linked_cells(self) -> np.ndarray:
        return np.unique(self.grid_links)

    def to_json(self) -> str:
        doc = {
            "mode": self.mode,
            "stations": [
                {"id": sid, "x_km": float(x), "y_km": float(y)}
                for sid, (x, y) in zip(self.station_ids or [str(i) for i in range(self.n_stations)], self.station_xy)
            ],
            "n_cells": int(len(self.cell_xy)),
            "station_edges": self.station_edges.tolist(),
            "grid_links": self.grid_links.tolist(),
        }
        return json.dumps(doc, indent=1)


def build_graph(
    station_xy,
    cell_xy,
    k: int = 8,
    mode: str = "delaunay",
    station_ids=None,
) -> HeteroGraph:
    """Station graph plus ``k`` nearest grid links; ``cell_xy=None`` gives no links."""
    station_xy = np.asarray(station_xy, dtype=np.float64)
    if mode == "delaunay" and len(station_xy) < 3:
        # one or two stations: the Delaunay graph is every pair
        edges = fully_connected(station_xy)
    elif mode == "delaunay":
        edges = delaunay(station_xy)
    elif mode == "fully_connected":
        edges = fully_connected(station_xy)
    else:
        raise ConfigurationError(f"unknown station graph mode {mode!r}")
    edge_arr = np.array(sorted(edges), dtype=np.intp).reshape(-1, 2)
    if cell_xy is None:
        cell_xy = np.zeros((0, 2))
        links = np.zeros((len(station_xy), 0), dtype=np.intp)
    else:
        cell_xy = np.asarray(cell_xy, dtype=np.float64)
        links = knn_grid_links(station_xy, cell_xy, k)
    return HeteroGraph(station_xy, cell_xy, edge_arr, links, mode, list(station_ids or []))
