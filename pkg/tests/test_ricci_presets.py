import copy

import numpy as np
import pytest

from liyau.errors import DomainError, RegularityError
from liyau.graph import WeightedGraph
from liyau.presets import build_preset, interior_mask, prism
from liyau.ricci import RicciFlatStructure, find_eta_maps, verify_ricci_flat


# -- presets -------------------------------------------------------------------

def test_two_point_sizes():
    g = build_preset("preset:two-point").graph
    assert g.n == 2 and g.n_edges == 1


def test_complete_four():
    g = build_preset("complete(4)").graph
    assert g.n == 4 and g.n_edges == 6
    assert set(g.degrees()) == {3}


def test_tau_ball_measure():
    g = build_preset("tauZ-ball(1,5,0.5)").graph
    assert g.n == 11
    assert np.all(g.mu == 0.25)


@pytest.mark.parametrize("d,r,n", [(1, 3, 7), (2, 2, 13), (3, 2, 25)])
def test_z_ball_sizes(d, r, n):
    g = build_preset(f"Z-ball({d},{r})").graph
    assert g.n == n and np.all(g.w == 1) and np.all(g.mu == 1)


def test_hexagon_patch_is_ten_vertex_tree():
    g = build_preset("hexagon-patch").graph
    assert g.n == 10 and g.n_edges == 9 and g.is_connected()


def test_star_and_path_conventions():
    s = build_preset("star(3)").graph
    assert s.degree("x*") == 3 and np.all(s.mu == 1)
    p = build_preset("path3").graph
    assert p.mu.tolist() == [1.0, 2.0, 1.0]


@pytest.mark.parametrize("spec", ["nope", "complete(1)", "star(0)", "Z-ball(1,0)", "cycle(2)", "tauZ-ball(1,2,-1)",
                                  "Z-ball(1,2,mu0=0)", "complete(n=3,x=1)", "complete(2.5)"])
def test_bad_presets(spec):
    with pytest.raises(DomainError):
        build_preset(spec)


# -- Ricci-flat verification ------------------------------------------------------

@pytest.mark.parametrize("spec", ["Z-ball(1,5)", "Z-ball(2,4)", "Z-ball(3,3)", "cycle(5)", "cycle(8)",
                                  "complete(3)", "complete(4)", "complete(6)", "two-point", "triangle"])
def test_structures_verify_everywhere_interior(spec):
    pre = build_preset(spec)
    g, s = pre.graph, pre.ricci
    interior = interior_mask(g, 2)
    checked = 0
    for i, x in enumerate(g.vertices):
        if not interior[i]:
            continue
        rep = verify_ricci_flat(g, s, x, n_random=100)
        assert rep.passed, rep.failures
        assert rep.sum_residual <= 1e-12
        checked += 1
    assert checked > 0


def test_lattice_star_map_is_shift_by_d():
    d = 3
    pre = build_preset(f"Z-ball({d},3)")
    rep = verify_ricci_flat(pre.graph, pre.ricci, "0,0,0")
    assert rep.star == [(i + d) % (2 * d) for i in range(2 * d)]


def test_injectivity_violation_reported():
    pre = build_preset("cycle(6)")
    s = copy.deepcopy(pre.ricci)
    m0, m1 = s.eta["0"]
    m1["0"] = m0["0"]
    rep = verify_ricci_flat(pre.graph, s, "0")
    assert not rep.passed
    assert any(f.startswith("(ii)") for f in rep.failures)


def test_adjacency_violation_reported():
    pre = build_preset("cycle(6)")
    s = copy.deepcopy(pre.ricci)
    s.eta["0"][0]["0"] = "3"
    rep = verify_ricci_flat(pre.graph, s, "0")
    assert any(f.startswith("(i)") for f in rep.failures)


def test_commutation_violation_reported():
    # swap the images of one neighbour in eta_0 and eta_1 at a cycle vertex
    pre = build_preset("cycle(8)")
    s = copy.deepcopy(pre.ricci)
    m0, m1 = s.eta["0"]
    m0["1"], m1["1"] = m1["1"], m0["1"]
    rep = verify_ricci_flat(pre.graph, s, "0")
    assert any(f.startswith("(iii)") for f in rep.failures)


def test_irregular_vertex_rejected():
    g = build_preset("star(3)").graph
    with pytest.raises(RegularityError):
        verify_ricci_flat(g, RicciFlatStructure(3), "x*")
    with pytest.raises(RegularityError):
        find_eta_maps(g, "x*")


# -- search -------------------------------------------------------------------------

@pytest.mark.parametrize("spec,x", [("triangle", "x*"), ("cycle(6)", "2"), ("complete(5)", "0"),
                                    ("Z-ball(2,4)", "0,0"), ("Z-ball(1,4)", "1")])
def test_search_is_sound(spec, x):
    g = build_preset(spec).graph
    s = find_eta_maps(g, x)
    assert s is not None
    assert verify_ricci_flat(g, s, x).passed


def test_cycle_search_finds_both_rotations():
    g = build_preset("cycle(6)").graph
    s = find_eta_maps(g, "0")
    images = sorted(m["0"] for m in s.maps_at("0"))
    assert images == ["1", "5"]
    # each map is a rotation of the closed neighbourhood
    for m in s.maps_at("0"):
        shift = (int(m["0"]) - 0) % 6
        assert all(int(m[y]) == (int(y) + shift) % 6 for y in m)


def test_search_fails_on_non_ricci_flat_regular_graph():
    # the Petersen graph has girth 5, so no commuting neighbour maps exist
    outer = [(i, (i + 1) % 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    g = WeightedGraph(range(10), [(a, b, 1.0) for a, b in outer + inner + spokes])
    assert find_eta_maps(g, "0") is None


def test_prism_preset_verifies():
    pre = prism()
    for x in pre.graph.vertices:
        assert verify_ricci_flat(pre.graph, pre.ricci, x).passed
