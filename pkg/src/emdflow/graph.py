"""Sparse graph over points and net points, plus canonical-path helpers.

Vertex ids: points of P take ``0..n-1``; net point ``j`` of the quadtree
takes ``n + j``. Edges are stored oriented from the lower to the higher
vertex id and laid out as E1 (one per point), then E2 by level, cell and
pair, then E3 by child net point, so edge ids can be computed
arithmetically.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .instance import Instance
from .quadtree import Quadtree


def pair_index(i, j, K):
    """Position of the pair (i, j), i < j, in the row-major upper triangle of a K-clique."""
    return i * (2 * K - i - 1) // 2 + (j - i - 1)


@dataclass
class Graph:
    n: int
    positions: np.ndarray  # (V, d)
    vertex_level: np.ndarray  # -1 for points of P
    tails: np.ndarray
    heads: np.ndarray
    costs: np.ndarray
    e2_offset: np.ndarray  # e2_offset[l] = first E2 edge of level l; last entry = E3 start
    K: int

    @property
    def num_vertices(self) -> int:
        return len(self.positions)

    @property
    def num_edges(self) -> int:
        return len(self.tails)

    @property
    def e3_offset(self) -> int:
        return int(self.e2_offset[-1])

    def edge_sets(self) -> dict:
        return {
            "E1": slice(0, self.n),
            "E2": slice(self.n, self.e3_offset),
            "E3": slice(self.e3_offset, self.num_edges),
        }

    # Lookup structures cost ~8 words per edge, so they are built on first use.

    @cached_property
    def _edge_keys(self):
        keys = self.tails * self.num_vertices + self.heads
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        if len(keys) > 1 and np.any(keys[1:] == keys[:-1]):
            raise AssertionError("duplicate edge")
        return keys, order

    @cached_property
    def _adjacency(self):
        m, V = self.num_edges, self.num_vertices
        ends = np.concatenate([self.tails, self.heads])
        order = np.argsort(ends, kind="stable")
        indptr = np.concatenate([[0], np.cumsum(np.bincount(ends, minlength=V))]).astype(np.int64)
        other = np.concatenate([self.heads, self.tails])[order]
        eid = np.concatenate([np.arange(m), np.arange(m)])[order]
        sign = np.concatenate([np.ones(m, np.int8), -np.ones(m, np.int8)])[order]
        return indptr, other, eid, sign

    def edge_id(self, u: int, v: int) -> int:
        """Id of the edge joining u and v; raises KeyError if absent."""
        keys, order = self._edge_keys
        a, b = (u, v) if u < v else (v, u)
        key = a * self.num_vertices + b
        pos = np.searchsorted(keys, key)
        if pos >= len(keys) or keys[pos] != key:
            raise KeyError((u, v))
        return int(order[pos])

    def neighbors(self, u: int):
        """Neighbor vertices, edge ids and orientation signs (+1 if u is the tail)."""
        indptr, other, eid, sign = self._adjacency
        s = slice(indptr[u], indptr[u + 1])
        return other[s], eid[s], sign[s]

    def stats(self, q: Quadtree | None = None) -> str:
        sets = self.edge_sets()
        lines = [
            f"vertices {self.num_vertices} (points {self.n}, net points {self.num_vertices - self.n})",
            f"edges {self.num_edges} (E1 {sets['E1'].stop}, E2 {self.e3_offset - self.n}, E3 {self.num_edges - self.e3_offset})",
        ]
        if q is not None:
            lines.append(f"levels L={q.L} eps0=1/{q.k} delta={q.delta:g}")
            e2 = np.diff(self.e2_offset)
            for lvl, cells in enumerate(q.cell_counts()):
                lines.append(f"  level {lvl}: cells {cells} net points {cells * q.K} E2 {int(e2[lvl])}")
        return "\n".join(lines)


def build_graph(q: Quadtree, inst: Instance) -> Graph:
    """Materialize V = P + N_0 + ... + N_L and E = E1 + E2 + E3."""
    n, K, L = inst.n, q.K, q.L
    positions = [inst.points]
    vlevel = [np.full(n, -1, dtype=np.int64)]
    for lvl in range(L + 1):
        positions.append(q.net_positions(lvl))
        vlevel.append(np.full(len(q.levels[lvl]) * K, lvl, dtype=np.int64))
    positions = np.concatenate(positions).reshape(-1, inst.d)
    vlevel = np.concatenate(vlevel)
    V = len(positions)

    tails = [np.arange(n, dtype=np.int64)]
    heads = [n + q.point_net(L)] if n else [np.zeros(0, dtype=np.int64)]

    I, J = np.triu_indices(K, k=1)
    I = I.astype(np.int64)
    J = J.astype(np.int64)
    e2_counts = []
    for lvl in range(L + 1):
        cells = len(q.levels[lvl])
        base = n + q.net_offset[lvl] + np.arange(cells, dtype=np.int64)[:, None] * K
        tails.append((base + I).ravel())
        heads.append((base + J).ravel())
        e2_counts.append(cells * len(I))
    for lvl in range(1, L + 1):
        cells = len(q.levels[lvl])
        child = n + q.net_offset[lvl] + np.arange(cells * K, dtype=np.int64)
        tails.append(n + q.net_parent(lvl))
        heads.append(child)
    tails = np.concatenate(tails)
    heads = np.concatenate(heads)
    assert np.all(tails < heads)
    costs = np.empty(len(tails))
    for lo in range(0, len(tails), 1 << 20):
        sl = slice(lo, lo + (1 << 20))
        costs[sl] = np.linalg.norm(positions[tails[sl]] - positions[heads[sl]], axis=1)
    e2_offset = n + np.concatenate([[0], np.cumsum(e2_counts)]).astype(np.int64)
    return Graph(n, positions, vlevel, tails, heads, costs, e2_offset, K)


def sep_level(q: Quadtree, i: int, j: int) -> int:
    """Deepest level whose cell contains both points i and j of P."""
    for lvl in range(q.L, -1, -1):
        pc = q.levels[lvl].point_cell
        if pc[i] == pc[j]:
            return lvl
    raise AssertionError("root cell contains every point")


def canonical_path(g: Graph, q: Quadtree, i: int, j: int) -> list[tuple[int, int, int]]:
    """Up-across-down path between points i and j as (from, to, edge id) hops."""
    if i == j:
        raise ValueError("canonical path needs two distinct points")
    top = sep_level(q, i, j)
    up = [i] + [g.n + int(q.point_net(lvl)[i]) for lvl in range(q.L, top - 1, -1)]
    down = [g.n + int(q.point_net(lvl)[j]) for lvl in range(top, q.L + 1)] + [j]
    verts = up + down
    return [(a, b, g.edge_id(a, b)) for a, b in zip(verts[:-1], verts[1:])]


def path_length(g: Graph, path) -> float:
    return float(sum(g.costs[e] for _, _, e in path))
