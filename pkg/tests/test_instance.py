import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emdflow.instance import (
    DimensionError,
    Instance,
    ParseError,
    SupplyImbalanceError,
    TransportMap,
    format_instance,
    load_instance,
    map_cost,
    map_feasible,
)
from emdflow.oracle import exact_emd


def test_two_point_instance():
    inst = load_instance("1\n0 1\n3 -1\n")
    assert (inst.n, inst.delta, inst.total_supply) == (2, 3.0, 1)


def test_duplicates_merged():
    inst = load_instance("1\n0 1\n0 1\n3 -2\n")
    assert inst.n == 2
    assert inst.supplies.tolist() == [2, -2]


def test_imbalance_rejected():
    with pytest.raises(SupplyImbalanceError):
        load_instance("2\n0 0 1\n1 1 1\n")


def test_comments_blank_lines_and_stream():
    inst = load_instance(io.StringIO("# header\n\n2\n# row\n1 2 3\n4 6 -3\n"))
    assert inst.n == 2 and inst.d == 2
    assert np.allclose(inst.points + inst.offset, [[1, 2], [4, 6]])


@pytest.mark.parametrize(
    "text,exc",
    [
        ("", ParseError),
        ("x\n", ParseError),
        ("1 2\n", ParseError),
        ("0\n", DimensionError),
        ("2\n0 1\n", DimensionError),
        ("1\n0 1.5\n1 -1.5\n", ParseError),
        ("1\nnan? 1\n", ParseError),
    ],
)
def test_malformed(text, exc):
    with pytest.raises(exc):
        load_instance(text)


def test_zero_supply_points_dropped():
    inst = load_instance("1\n0 1\n5 0\n3 -1\n")
    assert inst.n == 2
    assert inst.delta == 3.0


def test_format_roundtrip(rng):
    pts = rng.uniform(-5, 5, (7, 3))
    mu = rng.integers(-4, 5, 7)
    mu[-1] -= mu.sum()
    inst = Instance.from_arrays(pts, mu)
    back = load_instance(format_instance(inst))
    assert np.array_equal(back.supplies, inst.supplies)
    assert np.allclose(back.points, inst.points)


def test_map_cost_single_edge():
    inst = Instance.from_arrays([[0.0], [3.0]], [1, -1])
    assert map_cost(inst, TransportMap([0], [0], [1.0])) == 3.0


def test_map_cost_split_source():
    inst = Instance.from_arrays([[0.0], [1.0], [4.0]], [2, -1, -1])
    assert map_cost(inst, TransportMap([0, 0], [0, 1], [1.0, 1.0])) == 5.0


def test_map_cost_planar():
    inst = Instance.from_arrays([[0.0, 0.0], [3.0, 4.0]], [2, -2])
    assert map_cost(inst, TransportMap([0], [0], [2.0])) == 10.0


def test_map_cost_index_check():
    inst = Instance.from_arrays([[0.0], [3.0]], [1, -1])
    with pytest.raises(IndexError):
        map_cost(inst, TransportMap([1], [0], [1.0]))


def test_feasible_exact_map():
    inst = Instance.from_arrays([[0.0], [1.0], [4.0]], [2, -1, -1])
    assert map_feasible(inst, exact_emd(inst).map, 0.0)


def test_missing_unit_reported():
    inst = Instance.from_arrays([[0.0], [1.0], [4.0]], [2, -1, -1])
    rep = map_feasible(inst, TransportMap([0], [0], [1.0]), 0.0)
    assert not rep.ok
    assert rep.sink_violations == {1: 1.0}
    assert rep.source_violations == {0: 1.0}


def test_negative_amount_rejected():
    inst = Instance.from_arrays([[0.0], [3.0]], [1, -1])
    rep = map_feasible(inst, TransportMap([0, 0], [0, 0], [1.5, -0.5]), 0.0)
    assert not rep.ok and rep.negative_entries == [1]


coords = st.integers(-50, 50).map(float)


@st.composite
def instances(draw):
    d = draw(st.integers(1, 3))
    n = draw(st.integers(1, 12))
    pts = draw(st.lists(st.lists(coords, min_size=d, max_size=d), min_size=n, max_size=n))
    mu = draw(st.lists(st.integers(-9, 9), min_size=n, max_size=n))
    mu[-1] -= sum(mu)
    return format_instance_text(d, pts, mu)


def format_instance_text(d, pts, mu):
    return f"{d}\n" + "".join(" ".join(repr(x) for x in p) + f" {m}\n" for p, m in zip(pts, mu))


@settings(max_examples=60, deadline=None)
@given(instances())
def test_loaded_instances_are_normalized(text):
    inst = load_instance(text)
    assert inst.supplies.sum() == 0
    assert np.all(inst.supplies != 0)
    assert len({tuple(p) for p in inst.points.tolist()}) == inst.n
    assert np.all(inst.points >= 0) and np.all(inst.points <= inst.delta)


def _northwest_corner(inst):
    a = inst.supplies[inst.sources].astype(float)
    b = -inst.supplies[inst.sinks].astype(float)
    i = j = 0
    src, dst, amt = [], [], []
    while i < len(a) and j < len(b):
        x = min(a[i], b[j])
        src.append(i)
        dst.append(j)
        amt.append(x)
        a[i] -= x
        b[j] -= x
        if a[i] == 0:
            i += 1
        if b[j] == 0:
            j += 1
    return TransportMap(src, dst, amt)


@settings(max_examples=40, deadline=None)
@given(instances(), st.floats(0, 10))
def test_cost_linear_and_feasible_maps_dominate_oracle(text, lam):
    inst = load_instance(text)
    m = _northwest_corner(inst)
    assert map_feasible(inst, m, 0.0)
    c = map_cost(inst, m)
    assert map_cost(inst, m.scaled(lam)) == pytest.approx(lam * c, rel=1e-12, abs=1e-12)
    assert c >= exact_emd(inst).cost - 1e-9 * max(1.0, c)


def test_transport_map_text():
    m = TransportMap([0, 1], [2, 0], [1.5, 2.0])
    assert m.to_text() == "0 2 1.5\n1 0 2.0\n"
