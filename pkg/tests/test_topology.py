import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noc_forge.errors import ConfigurationError, ConstraintViolation, PreconditionError
from noc_forge.topology import (Placement, TileKind, Topology, make_custom, make_hetnoc, make_mesh,
                                mesh_link_budget, mesh_opt_placement, validate, wihetnoc_placement)
from noc_forge.wireless import WirelessInterface, WirelessPlan


def test_mesh_counts():
    t = make_mesh(2, 2)
    assert t.n_routers == 4
    assert len(t.edges) == 4
    assert len(t.wire_links) == 8
    t = make_mesh(8, 8)
    assert t.n_routers == 64
    assert len(t.edges) == 112
    assert all(l.length == 1 for l in t.wire_links)


def test_mesh_too_small():
    with pytest.raises(ConfigurationError):
        make_mesh(1, 4)


def test_placement_size_mismatch():
    with pytest.raises(ConfigurationError):
        make_mesh(4, 4, wihetnoc_placement(8, 8))
    with pytest.raises(ConfigurationError):
        Placement(2, 2, (TileKind.GPU,) * 3)


def test_default_placements():
    for p in (wihetnoc_placement(), mesh_opt_placement()):
        c = p.counts()
        assert c[TileKind.CPU] == 4 and c[TileKind.MC] == 4 and c[TileKind.GPU] == 56
    p = wihetnoc_placement()
    # one MC per quadrant, CPUs in the centre
    assert sorted(p.quadrant(m) for m in p.routers_of(TileKind.MC)) == [0, 1, 2, 3]
    assert sorted(p.position(c) for c in p.routers_of(TileKind.CPU)) == [(3, 3), (3, 4), (4, 3), (4, 4)]


def test_custom_ring():
    p = Placement(2, 2, (TileKind.GPU,) * 4)
    t = make_custom(2, 2, p, [(0, 1), (1, 3), (3, 2), (2, 0)], k_max=2)
    assert t.is_connected()
    assert list(t.degrees()) == [2, 2, 2, 2]
    assert validate(t, k_max=2) == []


def test_custom_duplicate_edge():
    p = Placement(2, 2, (TileKind.GPU,) * 4)
    with pytest.raises(ConstraintViolation, match="duplicate"):
        make_custom(2, 2, p, [(0, 1), (0, 1), (2, 3), (2, 3)])


def test_custom_disconnected():
    p = Placement(2, 2, (TileKind.GPU,) * 4)
    with pytest.raises(ConstraintViolation, match="disconnected"):
        make_custom(2, 2, p, [(0, 1), (2, 3)], link_budget=None)


def test_custom_degree_bound():
    p = Placement(2, 3, (TileKind.GPU,) * 6)
    star = [(0, k) for k in range(1, 6)] + [(1, 2), (3, 4)]
    with pytest.raises(ConstraintViolation, match="k_max"):
        make_custom(2, 3, p, star, k_max=4)


def test_custom_self_loop_and_range():
    p = Placement(2, 2, (TileKind.GPU,) * 4)
    with pytest.raises(ConstraintViolation):
        make_custom(2, 2, p, [(0, 0), (0, 1), (1, 3), (3, 2)])
    with pytest.raises(ConstraintViolation):
        make_custom(2, 2, p, [(0, 9), (0, 1), (1, 3), (3, 2)])


def test_custom_link_length_is_manhattan():
    p = Placement(3, 3, (TileKind.GPU,) * 9)
    edges = [(0, 8), (0, 1), (1, 2), (2, 5), (5, 4), (4, 3), (3, 6), (6, 7), (7, 8), (1, 4), (4, 7), (2, 3)]
    t = make_custom(3, 3, p, edges)
    lengths = {(l.src, l.dst): l.length for l in t.wire_links}
    assert lengths[(0, 8)] == lengths[(8, 0)] == 4
    assert lengths[(2, 3)] == 3


def test_validate_mesh_clean():
    assert validate(make_mesh(8, 8), k_max=4) == []


def test_validate_link_removed():
    m = make_mesh(4, 4)
    t = Topology(m.placement, m.edges[1:])
    v = validate(t)
    assert t.is_connected()
    assert [x.constraint for x in v] == ["link_budget"]


def test_validate_star():
    p = Placement(8, 8, (TileKind.GPU,) * 64)
    t = Topology(p, tuple((0, k) for k in range(1, 64)))
    v = validate(t, k_max=6, link_budget=None)
    assert any(x.constraint == "k_max" and x.element == 0 for x in v)


def _wihetnoc_with_channel(hosts, placement):
    plan = WirelessPlan(tuple(WirelessInterface(k, r, 0) for k, r in enumerate(hosts)))
    return make_mesh(placement.rows, placement.cols, placement).with_wireless(plan)


def test_hetnoc_long_wire():
    p = Placement.from_mapping(8, 8, {(3, 3): TileKind.CPU, (1, 1): TileKind.MC})
    cpu, mc = p.router_at(3, 3), p.router_at(1, 1)
    wi = _wihetnoc_with_channel([cpu, mc], p)
    het = make_hetnoc(wi)
    assert het.wireless is None
    assert het.has_edge(cpu, mc)
    assert het.link_length(cpu, mc) == 4
    assert len(het.edges) == len(wi.edges) + 1


def test_hetnoc_no_wis_is_identity():
    m = make_mesh(4, 4, wihetnoc_placement(4, 4))
    het = make_hetnoc(m.with_wireless(WirelessPlan(())))
    assert het.edges == m.edges


def test_hetnoc_needs_plan():
    with pytest.raises(PreconditionError):
        make_hetnoc(make_mesh(4, 4))


def test_hetnoc_link_count_matches_shortcuts():
    from noc_forge.routing import route_for
    from noc_forge.traffic import aggregate_matrix, workload_preset
    from noc_forge.wireless import place_wis

    p = wihetnoc_placement()
    m = make_mesh(8, 8, p)
    tm = aggregate_matrix(p, workload_preset("lenet"), 1.0)
    plan = place_wis(m, tm, 24, 4, route_for(m))
    wi = m.with_wireless(plan)
    new = {tuple(sorted(s)) for s in plan.shortcuts(p)} - set(m.edges)
    assert len(make_hetnoc(wi).edges) == mesh_link_budget(8, 8) + len(new)


def test_json_roundtrip(tmp_path):
    p = wihetnoc_placement(4, 4)
    plan = WirelessPlan((WirelessInterface(0, 5, 0), WirelessInterface(1, 6, 0)))
    t = make_mesh(4, 4, p, name="x").with_wireless(plan)
    t.save(tmp_path / "t.json")
    back = Topology.load(tmp_path / "t.json")
    assert back == t
    assert back.dumps() == t.dumps()


def test_from_dict_malformed():
    with pytest.raises(ConfigurationError):
        Topology.from_dict({"grid": [2, 2]})


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 8), st.integers(2, 8))
def test_mesh_invariants(rows, cols):
    t = make_mesh(rows, cols)
    assert len(t.edges) == mesh_link_budget(rows, cols) == rows * (cols - 1) + cols * (rows - 1)
    assert t.is_mesh() and t.is_connected()
    assert validate(t, k_max=4) == []
    deg = t.degrees()
    assert deg.max() <= 4 and deg.min() >= 2
    assert np.isclose(deg.mean(), 2 * len(t.edges) / t.n_routers)
