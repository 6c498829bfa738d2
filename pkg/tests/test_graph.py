import math

import numpy as np
import pytest

from emdflow.graph import build_graph, canonical_path, pair_index, path_length, sep_level
from emdflow.instance import Instance
from emdflow.quadtree import build

from conftest import random_instance


def single_point_graph(eps0, d=1):
    inst = Instance(np.zeros((1, d)), np.array([0]), d, 1.0, np.zeros(d))
    q = build(inst, eps0, 0)
    return inst, q, build_graph(q, inst)


def sizes(g):
    s = g.edge_sets()
    return tuple(sl.stop - sl.start for sl in (s["E1"], s["E2"], s["E3"]))


def test_single_cell_graph():
    _, q, g = single_point_graph(0.5)
    assert q.L == 0
    assert sizes(g) == (1, 1, 0)


def test_clique_size_per_cell():
    _, q, g = single_point_graph(0.5, d=2)
    assert sizes(g)[1] == 6


def test_pair_index_enumerates_upper_triangle():
    K = 7
    got = [pair_index(i, j, K) for i in range(K) for j in range(i + 1, K)]
    assert got == list(range(K * (K - 1) // 2))


@pytest.mark.parametrize("d,eps0", [(1, 0.5), (2, 0.25), (3, 0.5)])
def test_structure(rng, d, eps0):
    for trial in range(8):
        inst = random_instance(rng, n_max=15, d=d)
        q = build(inst, eps0, trial)
        g = build_graph(q, inst)
        n, L = inst.n, q.L
        e1, e2, e3 = sizes(g)
        assert e1 == n
        assert e2 <= (L + 1) * n * eps0 ** (-2 * d)
        assert e3 <= q.num_net_points
        assert np.all(g.tails < g.heads)
        assert np.all(g.costs > 0)
        assert np.allclose(g.costs, np.linalg.norm(g.positions[g.tails] - g.positions[g.heads], axis=1))
        # E3 offsets are identical by alignment
        lvl_child = g.vertex_level[g.heads[g.e3_offset :]]
        expect = math.sqrt(d) * q.eps0 * np.array([q.side(l) for l in lvl_child]) / 2
        assert np.allclose(g.costs[g.e3_offset :], expect)
        # E1 goes to the closest level-L net point: inside the point's own subcell
        h = q.side(L) * q.eps0
        assert np.all(np.abs(g.positions[g.heads[:n]] - inst.points) <= h / 2 + 1e-9 * q.side(0))
        for e in rng.choice(g.num_edges, size=50):
            assert g.edge_id(int(g.tails[e]), int(g.heads[e])) == e
            assert g.edge_id(int(g.heads[e]), int(g.tails[e])) == e


def test_hierarchical_locality(rng):
    inst = random_instance(rng, n_max=12)
    q = build(inst, 0.25, 1)
    g = build_graph(q, inst)
    n = g.n

    def cell(v):
        lvl = g.vertex_level[v]
        return lvl, (v - n - q.net_offset[lvl]) // q.K

    for e in range(g.num_edges):
        a, b = int(g.tails[e]), int(g.heads[e])
        if a < n:
            assert g.vertex_level[b] == q.L
            continue
        (la, ca), (lb, cb) = cell(a), cell(b)
        if la == lb:
            assert ca == cb
        else:
            assert lb == la + 1
            assert q.levels[lb].parent[cb] == ca


def test_missing_edge():
    _, _, g = single_point_graph(0.5)
    with pytest.raises(KeyError):
        g.edge_id(0, 2)


def test_sep_level_and_path_shapes(rng):
    for trial in range(10):
        inst = random_instance(rng, n_max=10)
        q = build(inst, 0.25, trial)
        g = build_graph(q, inst)
        for i in range(inst.n):
            for j in range(i + 1, inst.n):
                lvl = sep_level(q, i, j)
                assert lvl < q.L
                path = canonical_path(g, q, i, j)
                assert len(path) == 2 * (q.L - lvl) + 3
                assert path[0][0] == i and path[-1][1] == j
                for (a, b, _), (c, _, _) in zip(path[:-1], path[1:]):
                    assert b == c
                dist = float(np.linalg.norm(inst.points[i] - inst.points[j]))
                length = path_length(g, path)
                assert length >= dist - 1e-9 * q.side(0)
                assert length <= dist + 3 * math.sqrt(inst.d) * q.eps0 * q.side(lvl) + 1e-9 * q.side(0)


def test_path_edge_counts_examples():
    inst = Instance.from_arrays([[0.0], [3.0]], [1, -1])
    seen = set()
    for seed in range(40):
        q = build(inst, 0.5, seed)
        g = build_graph(q, inst)
        top = sep_level(q, 0, 1)
        path = canonical_path(g, q, 0, 1)
        if top == q.L - 1:
            assert len(path) == 5
        if top == 0:
            # p -> N_L(p) -> ... -> N_0(p) -> N_0(q) -> ... -> q
            assert len(path) == 2 * q.L + 3
        seen.add(top)
    assert 0 in seen
    # L = 0 would need all points in one cell to be distinct cells, so two
    # points always give L >= 1 and the three-hop path never occurs


def test_canonical_path_needs_two_points(rng):
    inst = random_instance(rng)
    q = build(inst, 0.5, 0)
    with pytest.raises(ValueError):
        canonical_path(build_graph(q, inst), q, 0, 0)


def test_neighbors_match_edges(rng):
    inst = random_instance(rng, n_max=12)
    q = build(inst, 0.5, 2)
    g = build_graph(q, inst)
    deg = np.bincount(np.r_[g.tails, g.heads], minlength=g.num_vertices)
    for u in rng.choice(g.num_vertices, size=min(30, g.num_vertices), replace=False):
        other, eids, sign = g.neighbors(int(u))
        assert len(other) == deg[u]
        for v, e, sg in zip(other, eids, sign):
            assert {int(g.tails[e]), int(g.heads[e])} == {int(u), int(v)}
            assert (g.tails[e] == u) == (sg == 1)
