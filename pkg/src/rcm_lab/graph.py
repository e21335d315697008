"""Random-connection-model graphs: exact and grid-pruned builders, component
census by union-find (with a BFS oracle), and a plain-text instance dump."""
from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .connfn import ScaledModel, tail_moment
from .geometry import Domain, PointSet
from .rng import Stream

_EMPTY = np.empty(0, dtype=np.int64)
_BLOCK_PAIRS = 2_000_000


class CutoffError(ValueError):
    """No pruning radius below the domain diameter meets the edge budget."""


@dataclass(frozen=True, eq=False)
class NetworkInstance:
    domain: Domain
    points: PointSet
    r: float
    edges: np.ndarray  # (E, 2), i < j, lexicographically sorted
    key: tuple[int, int] = (0, 0)
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.points)

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR (indptr, indices) with each node's neighbours sorted."""
        e = self.edges
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        return indptr, dst[order]

    def neighbours(self, i: int) -> np.ndarray:
        indptr, idx = self.adjacency
        return idx[indptr[i]:indptr[i + 1]]


@dataclass(frozen=True, eq=False)
class ComponentStats:
    component_sizes: np.ndarray  # descending
    isolated_count: int
    order_histogram: dict[int, int]
    M: int
    count_gt_M: int
    connected: bool

    def __eq__(self, other):
        if not isinstance(other, ComponentStats):
            return NotImplemented
        return (
            np.array_equal(self.component_sizes, other.component_sizes)
            and self.isolated_count == other.isolated_count
            and self.order_histogram == other.order_histogram
            and self.M == other.M
            and self.count_gt_M == other.count_gt_M
            and self.connected == other.connected
        )

    def xi(self, k: int) -> int:
        return self.order_histogram.get(k, 0)


def _pair_distances(coords, i, j, domain):
    x, y = coords[:, 0], coords[:, 1]
    dx = np.abs(x[i] - x[j])
    dy = np.abs(y[i] - y[j])
    if domain is Domain.TORUS:
        dx = np.minimum(dx, 1.0 - dx)
        dy = np.minimum(dy, 1.0 - dy)
    return np.hypot(dx, dy)


def _draw(i, j, p, stream):
    """Keep (i, j) iff its keyed uniform falls below p.  Uniforms lie in
    [0, 1), so pairs with p in {0, 1} are decided without drawing."""
    keep = p >= 1.0
    mid = (p > 0.0) & (p < 1.0)
    if mid.any():
        keep[mid] = stream.pair_uniforms(i[mid], j[mid]) < p[mid]
    return keep


def _finish(pts, model, domain, stream, parts, meta):
    if parts:
        edges = np.concatenate(parts, axis=0)
        n = max(len(pts), 1)
        code = np.sort(edges[:, 0] * n + edges[:, 1])
        edges = np.stack([code // n, code % n], axis=1)
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    return NetworkInstance(domain, pts, model.r, edges, stream.key, meta)


def build_exact(pts: PointSet, model: ScaledModel, domain: Domain, stream: Stream) -> NetworkInstance:
    """Draw every unordered pair with probability g(distance / r)."""
    coords = pts.coords
    n = len(pts)
    parts = []
    rows = max(1, _BLOCK_PAIRS // max(n, 1))
    for s in range(0, max(n - 1, 0), rows):
        e = min(n, s + rows)
        I, J = np.nonzero(np.arange(n)[None, :] > np.arange(s, e)[:, None])
        I = I + s
        p = model.evaluate(_pair_distances(coords, I, J, domain))
        keep = _draw(I, J, np.asarray(p, dtype=float), stream)
        parts.append(np.stack([I[keep], J[keep]], axis=1))
    return _finish(pts, model, domain, stream, parts, {"builder": "exact"})


def choose_cutoff(model: ScaledModel, rho: float, eps_miss: float, step: float = 0.125) -> float:
    """Smallest R on the grid r * step * k whose suppressed-edge bound
    rho^2 * 2 pi r^2 * int_{R/r}^inf x g(x) dx is at most ``eps_miss``."""
    if not eps_miss > 0:
        raise ValueError("eps_miss must be positive")
    r = model.r
    base = model.base
    if math.isfinite(base.support):
        return base.support * r
    limit = math.sqrt(2.0)
    scale = rho * rho * 2.0 * math.pi * r * r
    a = step
    while a * r <= limit:
        if scale * tail_moment(base, a).value <= eps_miss:
            return a * r
        a += step
    raise CutoffError(f"suppressed-edge bound exceeds {eps_miss} at every R below the domain diameter")


def candidate_pairs(coords: np.ndarray, R: float, domain: Domain):
    """All pairs i < j within distance R, found with a uniform cell grid.

    Returns (i, j, dist).  Cells have side >= R so each pair lives in the
    same or an adjacent cell; a half stencil visits each cell pair once.
    """
    n = coords.shape[0]
    if n < 2:
        return _EMPTY, _EMPTY, np.empty(0)
    ncell = int(math.floor(1.0 / R)) if R > 0 else 1
    ncell = max(1, min(ncell, 4096))
    if ncell < 3:
        I, J = np.triu_indices(n, 1)
        d = _pair_distances(coords, I, J, domain)
        sel = d <= R
        return I[sel], J[sel], d[sel]

    cell = np.floor((coords + 0.5) * ncell).astype(np.int64)
    np.clip(cell, 0, ncell - 1, out=cell)
    cid = cell[:, 0] * ncell + cell[:, 1]
    order = np.argsort(cid, kind="stable")
    counts = np.bincount(cid, minlength=ncell * ncell)
    starts = np.cumsum(counts) - counts
    cx, cy = cell[order, 0], cell[order, 1]
    xs = np.ascontiguousarray(coords[order, 0])
    ys = np.ascontiguousarray(coords[order, 1])
    a_all = np.arange(n)
    As, Bs, Ds = [], [], []
    for dx, dy in ((0, 0), (1, -1), (1, 0), (1, 1), (0, 1)):
        nx = cx + dx
        ny = cy + dy
        if domain is Domain.TORUS:
            nx %= ncell
            ny %= ncell
            a = a_all
        else:
            ok = (nx >= 0) & (nx < ncell) & (ny >= 0) & (ny < ncell)
            a, nx, ny = a_all[ok], nx[ok], ny[ok]
        nb = nx * ncell + ny
        k = counts[nb]
        total = int(k.sum())
        if total == 0:
            continue
        rep_a = np.repeat(a, k)
        b = np.repeat(starts[nb] - (np.cumsum(k) - k), k) + np.arange(total)
        if dx == 0 and dy == 0:
            sel = b > rep_a
            rep_a, b = rep_a[sel], b[sel]
        ddx = np.abs(xs[rep_a] - xs[b])
        ddy = np.abs(ys[rep_a] - ys[b])
        if domain is Domain.TORUS:
            ddx = np.minimum(ddx, 1.0 - ddx)
            ddy = np.minimum(ddy, 1.0 - ddy)
        d = np.hypot(ddx, ddy)
        sel = d <= R
        As.append(rep_a[sel])
        Bs.append(b[sel])
        Ds.append(d[sel])
    if not As:
        return _EMPTY, _EMPTY, np.empty(0)
    I = order[np.concatenate(As)]
    J = order[np.concatenate(Bs)]
    return np.minimum(I, J), np.maximum(I, J), np.concatenate(Ds)


def build_pruned(pts: PointSet, model: ScaledModel, domain: Domain, stream: Stream, R: float,
                 eps_miss: float | None = None) -> NetworkInstance:
    """As ``build_exact`` but only pairs within R are considered."""
    I, J, d = candidate_pairs(pts.coords, R, domain)
    p = np.asarray(model.evaluate(d), dtype=float)
    keep = _draw(I, J, p, stream)
    meta = {"builder": "pruned", "R": R, "eps_miss": eps_miss}
    return _finish(pts, model, domain, stream, [np.stack([I[keep], J[keep]], axis=1)], meta)


def _stats_from_labels(labels: np.ndarray, n: int, M: int) -> ComponentStats:
    if n == 0:
        return ComponentStats(np.empty(0, dtype=np.int64), 0, {}, M, 0, True)
    sizes = np.bincount(labels, minlength=n)
    sizes = np.sort(sizes[sizes > 0])[::-1]
    ks, cnt = np.unique(sizes, return_counts=True)
    hist = {int(k): int(c) for k, c in zip(ks, cnt)}
    return ComponentStats(
        component_sizes=sizes,
        isolated_count=hist.get(1, 0),
        order_histogram=hist,
        M=M,
        count_gt_M=int((sizes > M).sum()),
        connected=len(sizes) <= 1,
    )


def union_find_labels(n: int, edges: np.ndarray) -> np.ndarray:
    """Root label per node, vectorised union-find.

    Each round hooks every root that still has a crossing edge onto the
    smallest neighbouring root, then compresses paths by pointer jumping.
    Parents only ever decrease, so no cycles form.
    """
    parent = np.arange(n, dtype=np.int64)
    u = edges[:, 0].astype(np.int64)
    v = edges[:, 1].astype(np.int64)
    while u.size:
        ru, rv = parent[u], parent[v]
        live = ru != rv
        if not live.any():
            break
        u, v, ru, rv = u[live], v[live], ru[live], rv[live]
        np.minimum.at(parent, np.maximum(ru, rv), np.minimum(ru, rv))
        while True:
            pp = parent[parent]
            if np.array_equal(pp, parent):
                break
            parent = pp
    return parent


def components(inst: NetworkInstance, M: int = 20) -> ComponentStats:
    return _stats_from_labels(union_find_labels(inst.n, inst.edges), inst.n, M)


def components_bfs(inst: NetworkInstance, M: int = 20) -> ComponentStats:
    """Breadth-first reference implementation (test oracle)."""
    n = inst.n
    labels = np.full(n, -1, dtype=np.int64)
    for s in range(n):
        if labels[s] >= 0:
            continue
        labels[s] = s
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in inst.neighbours(u):
                if labels[w] < 0:
                    labels[w] = s
                    queue.append(int(w))
    return _stats_from_labels(labels, n, M)


def isolated_count(inst: NetworkInstance) -> int:
    if inst.n == 0:
        return 0
    deg = np.bincount(inst.edges.ravel(), minlength=inst.n)
    return int((deg == 0).sum())


def degree_counter(inst: NetworkInstance) -> Counter:
    return Counter(np.bincount(inst.edges.ravel(), minlength=inst.n).tolist())


def dump_instance(inst: NetworkInstance, path: "str | Path") -> None:
    """Header ``n r domain seed`` then one ``i j`` line per edge."""
    seed = inst.key[0] | (inst.key[1] << 32)
    lines = [f"{inst.n} {inst.r!r} {inst.domain.value} {seed}"]
    lines += [f"{i} {j}" for i, j in inst.edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_edges(path: "str | Path") -> tuple[dict, np.ndarray]:
    text = Path(path).read_text().splitlines()
    n, r, dom, seed = text[0].split()
    header = {"n": int(n), "r": float(r), "domain": Domain(dom), "seed": int(seed)}
    edges = np.array([[int(a) for a in ln.split()] for ln in text[1:] if ln.strip()], dtype=np.int64)
    return header, edges.reshape(-1, 2)
