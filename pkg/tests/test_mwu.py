import math
import warnings

import numpy as np
import pytest

from emdflow.flow import apply_incidence, supply_vector
from emdflow.graph import build_graph
from emdflow.instance import Instance
from emdflow.mwu import (
    PreconditionedSystem,
    SolverFailure,
    certificate_holds,
    mwu_budget,
    mwu_feasibility,
    normalize,
    solve_flow,
    value_search,
)
from emdflow.oracle import exact_mincost_on_graph
from emdflow.pipeline import prepare
from emdflow.quadtree import build
from emdflow.sketch import build_sketch, sketch_norm

from conftest import random_instance


def toy(M):
    return PreconditionedSystem.from_matrix(np.asarray(M, dtype=float))


def small(rng, seed=0, eps0=0.25, **kw):
    inst = random_instance(rng, **kw)
    q = build(inst, eps0, seed)
    g = build_graph(q, inst)
    s = build_sketch(q, g)
    return inst, q, g, s


def test_normalize_columns_and_adjoint(rng):
    for seed in range(5):
        inst, q, g, s = small(rng, seed)
        sys = normalize(g, s)
        norms = sys.column_norms(chunk=97)
        assert abs(norms.max() - 1.0) <= 1e-12
        assert sys.scale > 0
        x, y = rng.normal(size=g.num_edges), rng.normal(size=sys.num_rows)
        assert sys.apply(x) @ y == pytest.approx(x @ sys.apply_transpose(y), rel=1e-10)
        # Direct summation: column e of M is B(e_tail - e_head) / (c_e s).
        edges = rng.choice(g.num_edges, size=20, replace=False)
        cols = sys.columns(edges).toarray()
        for k, e in enumerate(edges):
            b = np.zeros(g.num_vertices)
            b[g.tails[e]] += 1
            b[g.heads[e]] -= 1
            col = sys.target(b) / g.costs[e]
            assert np.allclose(cols[:, k], col)
            assert np.allclose(sys.apply(np.eye(1, g.num_edges, e).ravel()), col)
            assert norms[e] == pytest.approx(np.abs(col).sum())


def test_explicit_matrix_system(rng):
    M = rng.normal(size=(4, 7))
    sys = PreconditionedSystem.from_matrix(M)
    x, y = rng.normal(size=7), rng.normal(size=4)
    assert np.allclose(sys.apply(x), M @ x)
    assert np.allclose(sys.apply_transpose(y), M.T @ y)
    assert np.allclose(sys.columns(np.arange(7)).toarray(), M)
    assert np.allclose(sys.column_norms(chunk=3), np.abs(M).sum(axis=0))


def test_budget():
    assert mwu_budget(0.1, 3) == math.ceil(800 * math.log(6))


def test_zero_target():
    sys = toy([[1, 0, -1], [0, 1, 1]])
    res = mwu_feasibility(sys, np.zeros(2), 1.0, 0.1)
    assert res.status == "solution" and res.rounds == 0
    assert np.array_equal(res.g, np.zeros(3))


@pytest.mark.parametrize("gstar", [[0.5, -0.3, 0.2], [0.0, 1.0, 0.0], [-0.25, 0.25, -0.5]])
def test_planted_toy(backend, gstar):
    M = np.array([[0.5, -0.2, 0.3], [-0.5, 0.8, 0.1]])
    target = M @ np.array(gstar)
    res = mwu_feasibility(toy(M), target, 1.0, 0.1)
    assert res.status == "solution"
    assert res.rounds <= mwu_budget(0.1, 3)
    assert np.abs(res.g).sum() <= 1 + 1e-9
    assert np.abs(M @ res.g - target).sum() <= 0.1


def test_planted_random(rng, backend):
    for _ in range(20):
        M = rng.normal(size=(4, 8))
        M /= np.abs(M).sum(axis=0).max()
        gstar = rng.normal(size=8)
        gstar /= np.abs(gstar).sum()
        t = float(rng.uniform(0.5, 3.0))
        target = t * (M @ gstar)
        res = mwu_feasibility(toy(M), target, t, 0.2)
        assert res.status == "solution"
        assert np.abs(res.g).sum() <= t * (1 + 1e-9)
        assert np.abs(M @ res.g - target).sum() <= 0.2 * t * (1 + 1e-9)


def test_infeasible_gives_certificate(backend):
    # Columns have norm 1, so ||M g||_1 <= ||g||_1 <= 1 < ||target||_1.
    M = np.array([[1.0, 0.0, 0.5], [0.0, -1.0, 0.5]])
    target = np.array([2.0, -1.5])
    res = mwu_feasibility(toy(M), target, 1.0, 0.1)
    assert res.status == "certificate"
    assert certificate_holds(toy(M), res.certificate, target)


def test_every_certificate_separates(rng, backend):
    seen = 0
    for _ in range(40):
        M = rng.normal(size=(3, 6))
        M /= np.abs(M).sum(axis=0).max()
        target = rng.normal(size=3) * rng.uniform(0.2, 3.0)
        res = mwu_feasibility(toy(M), target, 1.0, 0.25, max_rounds=400)
        if res.status == "certificate":
            seen += 1
            ybar = res.certificate
            assert ybar @ target < -np.abs(M.T @ ybar).max()
            # The inequality rules out the whole unit ball; spot-check vertices.
            for e in range(6):
                for sgn in (1, -1):
                    assert np.abs(M[:, e] * sgn - target).sum() > 0
                    assert ybar @ (M[:, e] * sgn) > ybar @ target
    assert seen > 0


def test_bad_arguments():
    sys = toy([[1.0]])
    with pytest.raises(ValueError):
        mwu_feasibility(sys, np.ones(1), 0.0, 0.1)
    with pytest.raises(ValueError):
        mwu_feasibility(sys, np.ones(1), 1.0, 1.0)


def test_value_search_zero(rng):
    inst, q, g, s = small(rng)
    sys = normalize(g, s)
    res = value_search(sys, np.zeros(sys.num_rows), 0.25)
    assert res.t == 0.0 and not res.g.any() and res.calls == 0


@pytest.mark.parametrize("pts", [([0.0], [3.0]), ([1.0, 2.0], [7.0, 5.0]), ([0.0, 0.0], [0.5, 9.0])])
def test_value_search_pair(pts):
    inst = Instance.from_arrays(list(pts), [1, -1])
    q = build(inst, 0.5, 1)
    g = build_graph(q, inst)
    s = build_sketch(q, g)
    sys = normalize(g, s)
    b = supply_vector(inst, g)
    opt = exact_mincost_on_graph(g, b)
    eps = 0.25
    res = value_search(sys, sys.target(b), eps)
    assert opt * (1 - 1e-9) <= res.t <= (1 + eps) * s.gamma * opt
    assert res.calls <= math.ceil(math.log(s.gamma) / math.log1p(eps)) + 1


@pytest.mark.parametrize("pts", [([0.0], [3.0]), ([1.0, 2.0], [7.0, 5.0]), ([0.0, 0.0], [0.5, 9.0])])
def test_value_search_pair_guaranteed_range(pts):
    # What an eps'-accurate answer certifies: t >= ||B b||_1 from the grid,
    # and the residual M g - target is at most eps' t in sketch units.
    inst = Instance.from_arrays(list(pts), [1, -1])
    q = build(inst, 0.5, 1)
    g = build_graph(q, inst)
    s = build_sketch(q, g)
    sys = normalize(g, s)
    b = supply_vector(inst, g)
    opt = exact_mincost_on_graph(g, b)
    eps = 0.25
    res = value_search(sys, sys.target(b), eps)
    assert sketch_norm(s, b) * (1 - 1e-12) <= res.t <= (1 + eps) * s.gamma * opt
    assert np.abs(res.g).sum() <= res.t * (1 + 1e-9)
    assert np.abs(sys.apply(res.g) - sys.target(b)).sum() <= eps * res.t * (1 + 1e-9)
    assert res.calls <= math.ceil(math.log(s.gamma) / math.log1p(eps)) + 1


def test_value_search_exhausted_grid():
    # Target outside the range of M: no grid value can succeed.
    sys = PreconditionedSystem.from_matrix(np.array([[1.0, 1.0], [0.0, 0.0]]), kappa_bound=2.0)
    with pytest.raises(SolverFailure):
        value_search(sys, np.array([0.0, 1.0]), 0.1)


def test_solve_flow_zero(rng):
    inst = Instance.from_arrays([[0.0, 0.0], [1.0, 2.0]], [0, 0])
    q = build(inst, 0.5, 0)
    g = build_graph(q, inst)
    s = build_sketch(q, g)
    rep = solve_flow(g, q, s, supply_vector(inst, g), 0.25)
    assert rep.cost == 0.0 and rep.mwu_rounds == 0 and not rep.flow.any()


def test_solve_flow_feasible_and_above_opt(rng, backend):
    for seed in range(15):
        inst, q, g, s = small(rng, seed, n_max=20)
        b = supply_vector(inst, g)
        rep = solve_flow(g, q, s, b, 0.25)
        assert np.abs(apply_incidence(g, rep.flow) - b).sum() <= 1e-9 * inst.total_supply
        assert rep.cost >= exact_mincost_on_graph(g, b) * (1 - 1e-9)


def test_refinement_history(rng):
    inst, q, g, s = small(rng, 4, n_max=25)
    b = supply_vector(inst, g)
    rep = solve_flow(g, q, s, b, 0.25)
    assert rep.history[0] == pytest.approx(sketch_norm(s, b))
    assert all(y < x for x, y in zip(rep.history[1:], rep.history[2:]))
    floor = 0.25 / s.gamma**2 * rep.history[0]
    for x, y in zip(rep.history[1:], rep.history[2:]):
        if y > 0.9 * max(x / 2, floor):
            warnings.warn(f"refinement stage shrank the residual only {x:.4g} -> {y:.4g}")


def test_solve_flow_rejects_eps():
    with pytest.raises(ValueError):
        solve_flow(None, None, None, np.zeros(2), 0.0)


@pytest.mark.slow
def test_solve_flow_ratio_half_of_draws():
    # Each instance under its own shift; 200 instances, eps = 0.25.
    rng = np.random.default_rng(2024)
    good = 0
    for i in range(200):
        inst = random_instance(rng, n_max=20)
        q, g, s = prepare(inst, 0.25, i)
        b = supply_vector(inst, g)
        rep = solve_flow(g, q, s, b, 0.25)
        good += rep.cost <= 1.25 * exact_mincost_on_graph(g, b) + 1e-9
    assert good >= 100, f"only {good}/200 draws within 1.25 of the graph optimum"
