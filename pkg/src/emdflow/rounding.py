"""Turn a feasible flow on the graph into a transportation map.

Cancel-Vertex shortcuts every path through a vertex (v -> u -> w becomes
v -> w), which keeps divergences and never increases Euclidean cost.
Running it on all net points, finest level first, leaves flow only
between points of P.
"""

from __future__ import annotations

import numpy as np

from . import _backend
from .graph import Graph
from .instance import Instance, TransportMap
from .quadtree import Quadtree


class RoundingError(RuntimeError):
    pass


class SparseFlow:
    """Antisymmetric flow on vertex pairs.

    ``adj[u][v]`` is the flow from u to v; ``adj[v][u]`` always holds its
    negation. Entries that reach exactly zero are removed.
    """

    def __init__(self, num_vertices: int):
        self.adj: list[dict[int, float]] = [dict() for _ in range(num_vertices)]

    @classmethod
    def from_edges(cls, tails, heads, values, tau: float = 0.0) -> "SparseFlow":
        f = cls(int(max(np.max(tails, initial=-1), np.max(heads, initial=-1))) + 1)
        for t, h, x in zip(np.asarray(tails).tolist(), np.asarray(heads).tolist(), np.asarray(values).tolist()):
            if abs(x) > tau:
                f.add(t, h, x)
        return f

    @classmethod
    def from_graph_flow(cls, g: Graph, flow: np.ndarray, tau: float) -> "SparseFlow":
        f = cls(g.num_vertices)
        keep = np.abs(flow) > tau
        for t, h, x in zip(g.tails[keep].tolist(), g.heads[keep].tolist(), flow[keep].tolist()):
            f.add(t, h, x)
        return f

    def __len__(self):
        return len(self.adj)

    def value(self, u: int, v: int) -> float:
        return self.adj[u].get(v, 0.0)

    def add(self, u: int, v: int, x: float):
        """Add x units of flow from u to v."""
        val = self.adj[u].get(v, 0.0) + x
        if val == 0.0:
            self.adj[u].pop(v, None)
            self.adj[v].pop(u, None)
        else:
            self.adj[u][v] = val
            self.adj[v][u] = -val

    def divergence(self, u: int) -> float:
        return sum(self.adj[u].values())

    def divergences(self) -> np.ndarray:
        return np.array([sum(a.values()) for a in self.adj])

    def support_size(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def degree(self, u: int, tau: float = 0.0) -> int:
        return sum(1 for x in self.adj[u].values() if abs(x) > tau)

    def cost(self, positions: np.ndarray) -> float:
        total = 0.0
        for u, a in enumerate(self.adj):
            for v, x in a.items():
                if u < v:
                    total += abs(x) * float(np.linalg.norm(positions[u] - positions[v]))
        return total

    def copy(self) -> "SparseFlow":
        f = SparseFlow(0)
        f.adj = [dict(a) for a in self.adj]
        return f

    def point_entries(self, n: int):
        src, dst, amt = [], [], []
        for u in range(min(n, len(self.adj))):
            for v, x in self.adj[u].items():
                if v < n and x > 0:
                    src.append(u)
                    dst.append(v)
                    amt.append(x)
        return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(amt, dtype=np.float64)


def check_nfp(f: SparseFlow, u: int, tau: float = 0.0) -> bool:
    """True when all flow at u goes one way (no flow passes through u)."""
    signs = {x > 0 for x in f.adj[u].values() if abs(x) > tau}
    return len(signs) <= 1


def cancel_vertex(f: SparseFlow, u: int, tau: float = 0.0) -> int:
    """Reroute v -> u -> w flow directly as v -> w until u has uniform parity.

    In- and out-neighbours are visited in vertex-id order. Returns the
    number of reroutings.
    """
    adj = f.adj[u]
    ins = sorted(v for v, x in adj.items() if x < -tau)
    outs = sorted(w for w, x in adj.items() if x > tau)
    i = j = iters = 0
    while i < len(ins) and j < len(outs):
        v, w = ins[i], outs[j]
        x = min(-adj[v], adj[w])
        f.add(v, u, -x)
        f.add(u, w, -x)
        f.add(v, w, x)
        iters += 1
        if -adj.get(v, 0.0) <= tau:
            i += 1
        if adj.get(w, 0.0) <= tau:
            j += 1
    return iters


def sweep_order(q: Quadtree, n: int) -> np.ndarray:
    """Net point vertex ids, level L first, id order inside a level."""
    parts = [np.arange(n + q.net_offset[lvl], n + q.net_offset[lvl + 1], dtype=np.int64) for lvl in range(q.L, -1, -1)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def extract_map(g: Graph, q: Quadtree, inst: Instance, flow: np.ndarray, tau: float | None = None) -> TransportMap:
    """Transportation map of cost at most ``flow_cost(g, flow)``.

    ``flow`` must satisfy the supplies on P and conserve flow at every net
    point (up to float error). Small discrepancies left by dropped
    sub-``tau`` entries are repaired by a greedy matching.
    """
    if tau is None:
        tau = inst.tau
    n = inst.n
    if n == 0:
        return TransportMap.empty()
    src, dst, amt = _backend.kernels.cancel_sweep(g.tails, g.heads, np.asarray(flow, dtype=np.float64), sweep_order(q, n), n, tau)
    return _finish_map(inst, src, dst, amt, tau)


def _finish_map(inst: Instance, src, dst, amt, tau):
    mu = inst.supplies
    sources, sinks = inst.sources, inst.sinks
    pos = np.full(inst.n, -1, dtype=np.int64)
    pos[sources] = np.arange(len(sources))
    pos[sinks] = np.arange(len(sinks))
    ok = (mu[src] > 0) & (mu[dst] < 0) & (amt > 0)
    i, j, a = pos[src[ok]], pos[dst[ok]], amt[ok].copy()

    need_out = mu[sources].astype(float)
    need_in = -mu[sinks].astype(float)
    # trim over-shipping proportionally, sources then sinks
    out = np.bincount(i, weights=a, minlength=len(sources))
    over = out > need_out
    if over.any():
        a *= np.where(over[i], need_out[i] / np.where(out[i] > 0, out[i], 1.0), 1.0)
    inn = np.bincount(j, weights=a, minlength=len(sinks))
    over = inn > need_in
    if over.any():
        a *= np.where(over[j], need_in[j] / np.where(inn[j] > 0, inn[j], 1.0), 1.0)

    gap_out = need_out - np.bincount(i, weights=a, minlength=len(sources))
    gap_in = need_in - np.bincount(j, weights=a, minlength=len(sinks))
    gap_out[gap_out < 0] = 0.0
    gap_in[gap_in < 0] = 0.0
    limit = 1e-6 * max(1, inst.total_supply)
    if gap_out.sum() > limit or gap_in.sum() > limit:
        raise RoundingError(f"flow leaves {max(gap_out.sum(), gap_in.sum()):.3g} units unrouted; input flow is infeasible")

    extra_i, extra_j, extra_a = [], [], []
    si = sj = 0
    gap_out, gap_in = gap_out.copy(), gap_in.copy()
    while si < len(gap_out) and sj < len(gap_in):
        if gap_out[si] <= 0:
            si += 1
            continue
        if gap_in[sj] <= 0:
            sj += 1
            continue
        x = min(gap_out[si], gap_in[sj])
        extra_i.append(si)
        extra_j.append(sj)
        extra_a.append(x)
        gap_out[si] -= x
        gap_in[sj] -= x

    i = np.concatenate([i, np.array(extra_i, dtype=np.int64)])
    j = np.concatenate([j, np.array(extra_j, dtype=np.int64)])
    a = np.concatenate([a, np.array(extra_a, dtype=np.float64)])
    # merge duplicate pairs, keep a deterministic (source, sink) order
    key = i * max(1, len(sinks)) + j
    uniq, inv = np.unique(key, return_inverse=True)
    a = np.bincount(inv.ravel(), weights=a, minlength=len(uniq))
    i, j = uniq // max(1, len(sinks)), uniq % max(1, len(sinks))
    keep = a > tau
    return TransportMap(i[keep], j[keep], a[keep])
