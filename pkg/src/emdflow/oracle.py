"""Exact solvers for desk-scale verification.

Both oracles reduce to a transportation problem between supply and demand
vertices and solve it by successive shortest augmenting paths with node
potentials, so that all reduced costs stay nonnegative. Optimality is
certified at the end by checking reduced costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .instance import Instance, TransportMap


class OracleError(ValueError):
    pass


@dataclass
class OracleResult:
    cost: float
    plan: np.ndarray  # (S, T) optimal amounts
    sources: np.ndarray  # row labels (point or vertex ids)
    sinks: np.ndarray  # column labels
    certified: bool
    map: TransportMap | None = None


def transport_ssp(cost: np.ndarray, supply: np.ndarray, demand: np.ndarray):
    """Min-cost transportation plan via successive shortest paths.

    Arcs source -> sink are uncapacitated with the given cost; residual
    sink -> source arcs exist wherever the plan is positive. Returns
    ``(plan, u, v, certified)`` with dual potentials ``u`` (sources) and
    ``v`` (sinks) such that ``cost + u - v >= 0`` everywhere and ``= 0`` on
    the support of ``plan``.
    """
    C = np.asarray(cost, dtype=np.float64)
    S, T = C.shape
    a = np.asarray(supply, dtype=np.float64).copy()
    b = np.asarray(demand, dtype=np.float64).copy()
    scale = max(a.sum(), 1e-300)
    if abs(a.sum() - b.sum()) > 1e-9 * scale:
        raise OracleError("supply and demand totals differ")
    floor = 1e-13 * scale
    plan = np.zeros((S, T))
    ps = np.zeros(S)
    pt = np.zeros(T)
    if S == 0 or T == 0:
        return plan, ps, pt, True
    while a.sum() > floor and b.sum() > floor:
        ds = np.where(a > floor, 0.0, np.inf)
        dt = np.full(T, np.inf)
        done_s = np.zeros(S, bool)
        done_t = np.zeros(T, bool)
        pred_t = np.full(T, -1)
        pred_s = np.full(S, -1)
        target = -1
        while True:
            cs = np.where(done_s, np.inf, ds)
            ct = np.where(done_t, np.inf, dt)
            i, j = int(np.argmin(cs)), int(np.argmin(ct))
            if cs[i] == np.inf and ct[j] == np.inf:
                raise OracleError("demand unreachable")
            if cs[i] <= ct[j]:
                done_s[i] = True
                cand = ds[i] + np.maximum(C[i] + ps[i] - pt, 0.0)
                better = (cand < dt) & ~done_t
                dt[better] = cand[better]
                pred_t[better] = i
            else:
                done_t[j] = True
                if b[j] > floor:
                    target = j
                    break
                back = plan[:, j] > 0
                cand = dt[j] + np.maximum(-(C[:, j] + ps - pt[j]), 0.0)
                better = back & (cand < ds) & ~done_s
                ds[better] = cand[better]
                pred_s[better] = j
        cap = dt[target]
        ps += np.minimum(ds, cap)
        pt += np.minimum(dt, cap)
        # walk back and find the bottleneck
        path = []
        x = b[target]
        t = target
        while True:
            s = pred_t[t]
            path.append((s, t))
            tb = pred_s[s]
            if tb < 0:
                x = min(x, a[s])
                break
            x = min(x, plan[s, tb])
            path.append((s, -1 - tb))
            t = tb
        for s, t in path:
            if t >= 0:
                plan[s, t] += x
            else:
                plan[s, -1 - t] -= x
                if plan[s, -1 - t] <= floor * 1e-3:
                    plan[s, -1 - t] = 0.0
        a[path[-1][0]] -= x
        b[target] -= x
    rc = C + ps[:, None] - pt[None, :]
    tol = 1e-9 * max(1.0, float(np.abs(C).max()))
    certified = bool(rc.min() >= -tol and np.all(np.abs(rc[plan > 0]) <= tol))
    return plan, ps, pt, certified


def exact_emd(inst: Instance) -> OracleResult:
    """Optimal transportation map on the complete bipartite graph."""
    if inst.n > 512 or inst.total_supply > 10**6:
        raise OracleError("instance too large for the exact oracle (n <= 512, U <= 1e6)")
    src, snk = inst.sources, inst.sinks
    C = np.linalg.norm(inst.points[src][:, None, :] - inst.points[snk][None, :, :], axis=2)
    plan, _, _, certified = transport_ssp(C, inst.supplies[src], -inst.supplies[snk])
    i, j = np.nonzero(plan)
    tmap = TransportMap(i, j, plan[i, j])
    return OracleResult(float((plan * C).sum()), plan, src, snk, certified, tmap)


# Dijkstra runs times (|V| + |E|) allowed by exact_mincost_on_graph.
GRAPH_ORACLE_WORK = 2 * 10**8


def exact_mincost_on_graph(g: Graph, b: np.ndarray) -> float:
    """Exact min-cost flow value on the graph for supplies ``b``.

    The graph is uncapacitated and undirected, so the optimum is the
    transportation cost between the positive and negative parts of ``b``
    under the shortest-path metric.
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import dijkstra

    b = np.asarray(b, dtype=np.float64)
    scale = float(np.abs(b).sum())
    if abs(b.sum()) > 1e-9 * max(scale, 1.0):
        raise OracleError("supplies do not sum to zero")
    src, snk = np.flatnonzero(b > 0), np.flatnonzero(b < 0)
    if len(src) == 0:
        return 0.0
    if min(len(src), len(snk)) * (g.num_vertices + g.num_edges) > GRAPH_ORACLE_WORK:
        raise OracleError("graph too large for the exact oracle")
    if len(src) > len(snk):
        return exact_mincost_on_graph(g, -b)
    V = g.num_vertices
    adj = csr_matrix((g.costs, (g.tails, g.heads)), shape=(V, V))
    dist = dijkstra(adj, directed=False, indices=src)[:, snk]
    supply, demand = b[src], -b[snk]
    demand *= supply.sum() / demand.sum()
    plan, _, _, _ = transport_ssp(dist, supply, demand)
    return float((plan * dist).sum())
