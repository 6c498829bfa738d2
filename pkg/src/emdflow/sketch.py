"""l1 sketch of supplies that preconditions min-cost flow on the graph.

Row p of the sketch (p in P) holds ``b_p * ||p - N_L(p)||``; the row of a
level-l net point u holds ``eps0 * side_l / (4 (L + 1))`` times the total
supply of u's subtree: the points and the net points of levels >= l whose
subcell lies inside u's. A net point never joins the row of a finer
subcell, even when its position lies there; otherwise a coarse net point
and the finest net point at its corner get identical columns and B loses
full column rank. The l1 norm
of the sketch is within a factor ``gamma`` of the min-cost-flow value,
and :func:`route_flow` builds a flow that achieves the upper end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .graph import Graph
from .quadtree import Quadtree


@dataclass
class Sketch:
    """Sparse 0/1 membership pattern scaled by a per-row coefficient.

    ``rows[t], cols[t]`` lists the nonzeros of B sorted by row; the value of
    that entry is ``coef[rows[t]]``.
    """

    coef: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    gamma: float
    n: int

    @property
    def num_rows(self) -> int:
        return len(self.coef)

    @property
    def nnz(self) -> int:
        return len(self.rows)

    @property
    def leaf_weights(self) -> np.ndarray:
        return self.coef[: self.n]

    def members(self, row: int) -> np.ndarray:
        lo, hi = np.searchsorted(self.rows, [row, row + 1])
        return self.cols[lo:hi]

    def to_sparse(self):
        import scipy.sparse as sp

        return sp.csr_matrix((self.coef[self.rows], (self.rows, self.cols)), shape=(self.num_rows, self.num_rows))


def build_sketch(q: Quadtree, g: Graph) -> Sketch:
    n, L, V = g.n, q.L, g.num_vertices
    coef = np.empty(V)
    coef[:n] = g.costs[:n]
    for lvl in range(L + 1):
        lo, hi = n + q.net_offset[lvl], n + q.net_offset[lvl + 1]
        coef[lo:hi] = q.eps0 * q.side(lvl) / (4 * (L + 1))

    rows, cols = [np.arange(n)], [np.arange(n)]
    for lvl in range(L + 1):
        rows.append(n + q.point_net(lvl))
        cols.append(np.arange(n))

    for lvl in range(L + 1):
        own = np.arange(q.net_offset[lvl], q.net_offset[lvl + 1])
        rows.append(n + own)
        cols.append(n + own)
        # coarser rows via the parent chain
        anc = own
        for up in range(lvl, 0, -1):
            anc = q.net_parent(up)[anc - q.net_offset[up]]
            rows.append(n + anc)
            cols.append(n + own)
    rows = np.concatenate(rows).astype(np.int64)
    cols = np.concatenate(cols).astype(np.int64)
    order = np.lexsort((cols, rows))
    gamma = 4 * math.sqrt(q.d) * (L + 1) / q.eps0
    return Sketch(coef, rows[order], cols[order], gamma, n)


def apply_B(s: Sketch, b: np.ndarray) -> np.ndarray:
    return s.coef * np.bincount(s.rows, weights=b[s.cols], minlength=s.num_rows)


def apply_B_transpose(s: Sketch, z: np.ndarray) -> np.ndarray:
    return np.bincount(s.cols, weights=(s.coef * z)[s.rows], minlength=s.num_rows)


def sketch_norm(s: Sketch, b: np.ndarray) -> float:
    return float(np.abs(apply_B(s, b)).sum())


class RoutingError(ValueError):
    pass


def route_flow(s: Sketch, q: Quadtree, g: Graph, b: np.ndarray) -> np.ndarray:
    """Feasible flow for supplies ``b`` of cost at most ``gamma * ||B b||_1``.

    Surpluses are settled bottom-up: points push their supply to N_L, then
    inside every parent subcell opposite surpluses are cancelled along E2
    and what is left moves to the subcell center along E3.
    """
    b = np.asarray(b, dtype=np.float64)
    total = float(b.sum())
    scale = float(np.abs(b).sum())
    if abs(total) > 1e-9 * max(scale, 1e-300) and abs(total) > 1e-12:
        raise RoutingError(f"supplies sum to {total!r}, expected 0")
    n, L, K = g.n, q.L, q.K
    f = np.zeros(g.num_edges)
    if scale == 0.0:
        return f
    delta = -b.copy()
    if n:
        f[:n] = b[:n]
        delta[:n] = 0.0
        np.subtract.at(delta, g.heads[:n], b[:n])
    npairs = K * (K - 1) // 2
    e3_base = g.e3_offset - n - int(q.net_offset[1]) if L > 0 else 0
    for lvl in range(L, -1, -1):
        base = n + int(q.net_offset[lvl])
        count = int(q.net_offset[lvl + 1] - q.net_offset[lvl])
        ids = np.arange(base, base + count, dtype=np.int64)
        if lvl > 0:
            parent = n + q.net_parent(lvl)
            order = np.argsort(parent, kind="stable")
            ids_sorted = ids[order]
            grp = parent[order]
            starts = np.flatnonzero(np.r_[True, grp[1:] != grp[:-1]])
            group_ptr = np.r_[starts, count].astype(np.int64)
        else:
            ids_sorted = ids
            group_ptr = np.array([0, count], dtype=np.int64)
        _backend.kernels.cancel_groups(ids_sorted, group_ptr, delta, f, base, int(g.e2_offset[lvl]), K, npairs)
        if lvl > 0:
            left = delta[base : base + count]
            nz = left != 0.0
            f[e3_base + ids[nz]] += left[nz]
            np.add.at(delta, parent[nz], left[nz])
            delta[base : base + count] = 0.0
    return f
