"""End-to-end approximation: quadtree, graph, sketch, flow solve, rounding."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

from .flow import supply_vector
from .graph import Graph, build_graph
from .instance import Instance, TransportMap, map_cost
from .mwu import SolveReport, normalize, solve_flow
from .quadtree import Quadtree, _inverse_even, build_levels, choose_eps0, sample_shift
from .rounding import extract_map
from .sketch import Sketch, build_sketch

log = logging.getLogger(__name__)

# Net points per cell allowed by the default policy. The theoretical choice
# gives eps0 ~ eps / (3 d (L + 1)), i.e. thousands of net points per cell and
# millions of intra-cell edges even for tiny inputs.
MAX_CELL_NETPOINTS = 36
# Default subcells per side never exceed 2 * ceil(EPS_TO_K / eps): 6 at
# eps = 0.25, 4 at eps = 0.5, 2 at eps = 1.
EPS_TO_K = 0.75


def resolve_eps0(eps: float, L: int, d: int, eps0: float | None = None, max_cell_netpoints: int = MAX_CELL_NETPOINTS) -> float:
    """Subcell ratio used by the pipeline.

    An explicit ``eps0`` is validated and returned. Otherwise the value
    from :func:`choose_eps0` is coarsened to at most ``1 / (2 ceil(0.75 /
    eps))``, keeping the theory's proportionality to ``eps``, and further
    until a cell has at most ``max_cell_netpoints`` net points (never
    below ``1/2``).
    """
    if eps0 is not None:
        _inverse_even(eps0)
        return float(eps0)
    k = min(round(1.0 / choose_eps0(eps, L, d)), 2 * math.ceil(EPS_TO_K / eps))
    while k > 2 and k**d > max_cell_netpoints:
        k -= 2
    return 1.0 / k


@dataclass
class TrialResult:
    seed: int
    eps0: float
    L: int
    flow_cost: float
    map: TransportMap | None
    cost: float
    report: SolveReport
    num_vertices: int
    num_edges: int
    seconds: float
    timings: dict = field(default_factory=dict)


def prepare(inst: Instance, eps: float, seed: int, eps0: float | None = None) -> tuple[Quadtree, Graph, Sketch]:
    shift = sample_shift(inst, seed)
    levels = build_levels(inst, shift)
    e0 = resolve_eps0(eps, len(levels) - 1, inst.d, eps0)
    q = Quadtree(inst, shift, levels, e0)
    g = build_graph(q, inst)
    return q, g, build_sketch(q, g)


def run_trial(inst: Instance, eps: float, seed: int, *, eps0: float | None = None, with_map: bool = True) -> TrialResult:
    """One independent run of the pipeline under the shift drawn from ``seed``."""
    t0 = time.perf_counter()
    timings = {}
    q, g, s = prepare(inst, eps, seed, eps0)
    t1 = time.perf_counter()
    timings["build"] = t1 - t0
    b = supply_vector(inst, g)
    rep = solve_flow(g, q, s, b, eps, sys=normalize(g, s))
    t2 = time.perf_counter()
    timings["solve"] = t2 - t1
    tmap = None
    cost = rep.cost
    if with_map:
        tmap = extract_map(g, q, inst, rep.flow)
        cost = map_cost(inst, tmap)
        timings["round"] = time.perf_counter() - t2
    log.info("seed %d: eps0=1/%d L=%d |V|=%d |E|=%d flow=%.6g cost=%.6g rounds=%d", seed, round(1 / q.eps0), q.L, g.num_vertices, g.num_edges, rep.cost, cost, rep.mwu_rounds)
    return TrialResult(seed, q.eps0, q.L, rep.cost, tmap, cost, rep, g.num_vertices, g.num_edges, time.perf_counter() - t0, timings)


def approximate_emd(inst: Instance, eps: float = 0.25, seed: int = 0, trials: int = 1, *, eps0: float | None = None, with_map: bool = True) -> TrialResult:
    """Best of ``trials`` runs with seeds ``seed, seed + 1, ...`` (minimum cost)."""
    if not 0 < eps <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    best = None
    for i in range(trials):
        res = run_trial(inst, eps, seed + i, eps0=eps0, with_map=with_map)
        if best is None or res.cost < best.cost:
            best = res
    return best


def all_trials(inst: Instance, eps: float, seeds, *, eps0: float | None = None) -> list[TrialResult]:
    return [run_trial(inst, eps, s, eps0=eps0) for s in seeds]

