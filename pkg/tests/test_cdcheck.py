import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import graph_and_positive
from liyau.cdcheck import (CDCheckProblem, c_alpha, c_zero_reference, cutoff_cd_check, cutoff_function, family,
                           l_alpha, neighbour_power_bound, search_violation, search_violation_parallel,
                           star_c0_formula, theta_check, tightness_witness)
from liyau.cdfunc import complete, make_cd, ricci_flat_alpha
from liyau.errors import DomainError
from liyau.graph import UPSILON, laplacian, psi
from liyau.presets import build_preset, hexagon_patch, star, two_point


# -- operators ------------------------------------------------------------------------------

def test_l_half_two_point_example():
    g = two_point().graph
    val = l_alpha(g, 0.5, [0.0, -1.0], "x1")
    assert val == pytest.approx(-2 * (math.exp(-0.5) - 1), rel=1e-15)
    assert val == pytest.approx(0.78694, abs=5e-6)


def test_l_zero_is_minus_laplacian(rng):
    g = build_preset("random(7,2)").graph
    v = rng.normal(size=g.n)
    assert np.allclose(l_alpha(g, 0.0, v), -laplacian(g, v), rtol=0, atol=1e-14)


@given(graph_and_positive(max_n=6), st.floats(0.05, 0.95))
def test_l_alpha_identity(data, alpha):
    g, u = data
    v = np.log(u)
    lhs = l_alpha(g, alpha, v)
    rhs = -laplacian(g, v) - psi(g, UPSILON, alpha * v) / alpha
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9 * (1 + np.max(np.abs(lhs))))


def test_l_alpha_small_alpha_limit(rng):
    g = build_preset("Z-ball(2,3)").graph
    for _ in range(20):
        v = rng.normal(size=g.n)
        diff = np.max(np.abs(l_alpha(g, 1e-6, v) - l_alpha(g, 0.0, v)))
        assert diff <= 1e-5 * np.linalg.norm(v)


@given(graph_and_positive(max_n=6), st.floats(0.0, 0.95))
def test_positive_l_alpha_implies_positive_lv(data, alpha):
    g, u = data
    v = np.log(u)
    La, Lv = l_alpha(g, alpha, v), l_alpha(g, 0.0, v)
    assert np.all(Lv[La > 0] > 0)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 0.7])
def test_constant_v_gives_zero(alpha):
    g = build_preset("cycle(5)").graph
    v = np.full(g.n, 1.7)
    assert np.all(l_alpha(g, alpha, v) == 0) and np.all(c_alpha(g, alpha, v) == 0)


def test_alpha_out_of_range():
    g = two_point().graph
    with pytest.raises(DomainError):
        l_alpha(g, 1.0, [0.0, 1.0])
    with pytest.raises(DomainError):
        c_alpha(g, -0.1, [0.0, 1.0])


@given(graph_and_positive(max_n=7))
def test_c_zero_matches_generic_operators(data):
    g, u = data
    v = np.log(u) / 3
    a, b = c_alpha(g, 0.0, v), c_zero_reference(g, v)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-13 * (1 + np.max(np.abs(b))))


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_two_point_c0_is_two_sinh(a, b):
    g = two_point().graph
    v = np.array([a, b])
    Lv = a - b
    assert c_alpha(g, 0.0, v, "x1") == pytest.approx(2 * math.sinh(Lv), rel=1e-12, abs=1e-12)


def test_c_alpha_needs_two_ball():
    g = build_preset("Z-ball(1,6)").graph
    v = np.full(g.n, np.nan)
    for k in range(-2, 3):
        v[g.index(str(k))] = 0.1 * k * k
    assert math.isfinite(c_alpha(g, 0.3, v, "0"))
    v[g.index("2")] = np.nan
    with pytest.raises(DomainError):
        c_alpha(g, 0.3, v, "0")


# -- margins ---------------------------------------------------------------------------------

def test_two_point_margin_is_zero_when_feasible(rng):
    g = two_point().graph
    P = CDCheckProblem(g, "x1", 0.0, "two_point")
    for _ in range(50):
        v = rng.normal(scale=5, size=2)
        m = P.margin(v)
        if m.feasible:
            assert abs(m.value) <= 1e-12 * max(1.0, abs(m.c_alpha))


def test_infeasible_reported():
    g = two_point().graph
    m = CDCheckProblem(g, "x1", 0.0, "two_point").margin([0.0, 1.0])
    assert not m.feasible and m.l_alpha < 0


@given(st.floats(-50, 50))
def test_margin_shift_invariant(c):
    g = build_preset("Z-ball(2,3)").graph
    P = CDCheckProblem(g, "0,0", 0.4, "ricci_flat_alpha(D=4,mu0=1,alpha=0.4)")
    v = np.random.default_rng(3).normal(size=g.n)
    a, b = P.margin(v), P.margin(v + c)
    assert a.feasible == b.feasible
    assert b.value == pytest.approx(a.value, rel=1e-9, abs=1e-9)


def test_locality():
    g = build_preset("Z-ball(2,4)").graph
    P = CDCheckProblem(g, "0,0", 0.3, "ricci_flat_alpha(D=4,mu0=1,alpha=0.3)")
    assert P.check_locality(n=10) <= 1e-12


def test_boundary_base_point_refused():
    g = build_preset("Z-ball(1,3)").graph
    with pytest.raises(DomainError):
        CDCheckProblem(g, "2", 0.0, "ricci_flat(2)")


def test_batch_matches_full_operators(rng):
    g = build_preset("Z-ball(2,3)").graph
    P = CDCheckProblem(g, "0,0", 0.25, "ricci_flat_alpha(D=4,mu0=1,alpha=0.25)")
    for _ in range(10):
        v = rng.normal(size=g.n)
        m = P.margin(v)
        assert m.c_alpha == pytest.approx(c_alpha(g, 0.25, v, "0,0"), rel=1e-12, abs=1e-12)
        assert m.Lv == pytest.approx(l_alpha(g, 0.0, v, "0,0"), rel=1e-12, abs=1e-12)
        assert m.l_alpha == pytest.approx(l_alpha(g, 0.25, v, "0,0"), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("D", [1, 2, 3, 4])
@pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5])
def test_complete_graph_sweep(D, alpha):
    g = build_preset(f"complete({D + 1})").graph
    P = CDCheckProblem(g, g.vertices[0], alpha, complete(D, 1.0, alpha))
    rng = np.random.default_rng(D)
    values = []
    while sum(len(v) for v in values) < 10_000:
        r = P.evaluate(P._from_free(rng.uniform(-3, 3, size=(20_000, P.m - 1))))
        values.append(r["value"][r["feasible"]])
    assert np.min(np.concatenate(values)[:10_000]) >= -1e-10


# -- families ----------------------------------------------------------------------------------

def test_star_family_laplacians():
    pre = star(3)
    g = pre.graph
    v = family("star", 1.0)
    Lv = -laplacian(g, v)
    assert Lv[g.index("x*")] == 1.0 and Lv[g.index("x1")] == 1.0
    assert Lv[g.index("x2")] == -1.0 and Lv[g.index("x3")] == -1.0


@pytest.mark.parametrize("t", [0.3, 1.0, 2.0, 5.0, 10.0])
def test_star_c0_formula(t):
    g = star(3).graph
    val = c_alpha(g, 0.0, family("star", t), "x*")
    assert val == pytest.approx(6 - math.exp(t) - 5 * math.exp(-t), rel=1e-12)
    assert val == pytest.approx(float(star_c0_formula(t)), rel=1e-12)


def test_star_c0_values():
    assert float(star_c0_formula(2.0)) == pytest.approx(-2.06573, abs=5e-6)
    assert float(star_c0_formula(10.0)) == pytest.approx(-22020.5, abs=0.05)


@pytest.mark.parametrize("t", [0.5, 1.0, 3.0])
def test_hexagon_equals_star(t):
    g = hexagon_patch().graph
    val = c_alpha(g, 0.0, family("hexagon", t), "x*")
    assert val == pytest.approx(6 - math.exp(t) - 5 * math.exp(-t), rel=1e-12)


@pytest.mark.parametrize("t", [2.0, 4.0, 6.0])
def test_star_family_is_feasible_with_negative_margin(t):
    g = star(3).graph
    P = CDCheckProblem(g, "x*", 0.0, "two_point")
    m = P.margin(family("star", t))
    assert m.feasible and m.value < 0


def test_family_rejects():
    with pytest.raises(DomainError):
        family("star", 0.0)
    with pytest.raises(DomainError):
        family("square", 1.0)


# -- tightness ------------------------------------------------------------------------------------

def test_tightness_d1():
    w = tightness_witness(1, 1.0, 2.0)
    l1 = w.graph.meta["l1"]
    assert set(w.v[l1 == 0]) == {1.0} and set(w.v[l1 == 1]) == {0.0} and set(w.v[l1 == 2]) == {-3.0}
    assert w.Lv == pytest.approx(2.0, rel=1e-15)
    assert w.residual <= 1e-10
    assert w.is_local_max


@pytest.mark.parametrize("d,mu0,a", [(2, 1.0, 1.0), (3, 1.0, 0.5), (1, 0.5, 3.0), (2, 2.0, 4.0)])
def test_tightness_general(d, mu0, a):
    w = tightness_witness(d, mu0, a)
    assert w.Lv == pytest.approx(a, rel=1e-13)
    assert w.residual <= 1e-10 * max(1.0, abs(w.rhs))


def test_tightness_rejects():
    with pytest.raises(DomainError):
        tightness_witness(1, 1.0, 0.0)


# -- search ------------------------------------------------------------------------------------------

def test_search_finds_star_violation():
    P = CDCheckProblem(star(3).graph, "x*", 0.0, "two_point")
    res = search_violation(P, samples=10_000, seed=1)
    assert res.found_violation and res.best.value < -100
    assert res.best.feasible
    assert P.margin(res.witness).value == pytest.approx(res.best.value)


def test_search_negative_control_ricci_flat():
    g = build_preset("Z-ball(1,3)").graph
    P = CDCheckProblem(g, "0", 0.0, "ricci_flat(D=2,mu0=1)")
    res = search_violation(P, samples=10_000, seed=0)
    assert res.feasible_count > 0
    assert res.best.relative >= -1e-8
    assert "no violation found" in res.summary()


def test_search_detects_oversized_f():
    P = CDCheckProblem(two_point().graph, "x1", 0.0, make_cd("scale(two_point,alpha=1.05,beta=1)"))
    res = search_violation(P, samples=2_000, seed=0)
    assert res.found_violation


def test_search_deterministic_and_parallel_merge():
    P = CDCheckProblem(star(3).graph, "x*", 0.0, "two_point")
    a = search_violation(P, samples=2_000, seed=4)
    b = search_violation(P, samples=2_000, seed=4)
    assert a.best.value == b.best.value and np.array_equal(a.witness, b.witness)
    serial = search_violation_parallel(P, [1, 2, 3], jobs=1, samples=1_000)
    threaded = search_violation_parallel(P, [1, 2, 3], jobs=3, samples=1_000)
    assert serial.best.value == threaded.best.value and serial.seed == threaded.seed


def test_search_bad_objective():
    P = CDCheckProblem(two_point().graph, "x1", 0.0, "two_point")
    with pytest.raises(DomainError):
        search_violation(P, objective="nope")


# -- cut-off variant -----------------------------------------------------------------------------------

def test_cutoff_with_unit_psi_reduces_to_cd(rng):
    g = build_preset("Z-ball(1,5)").graph
    alpha = 0.5
    P = CDCheckProblem(g, "0", alpha, ricci_flat_alpha(2, 1.0, alpha))
    checked = 0
    for _ in range(300):
        v = rng.normal(scale=2, size=g.n)
        rep = cutoff_cd_check(g, alpha, np.ones(g.n), v, "0")
        m = P.margin(v)
        assert rep.vacuous == (not m.feasible)
        if not rep.vacuous:
            assert rep.correction == 0.0
            assert rep.slack == pytest.approx(m.value, rel=1e-12, abs=1e-12)
            assert rep.passed
            checked += 1
    assert checked > 20


def test_cutoff_function_shape():
    g = build_preset("Z-ball(1,8)").graph
    p = cutoff_function(g, "0", 3)
    assert p[g.index("2")] == 1.0 and p[g.index("3")] == 1.0
    assert p[g.index("4")] == pytest.approx(2 / 3) and p[g.index("6")] == 0.0


def test_cutoff_sweep_on_z_ball():
    g = build_preset("Z-ball(1,8)").graph
    rng = np.random.default_rng(11)
    admissible = 0
    for r in (2, 3):
        p = cutoff_function(g, "0", r)
        for x in [str(k) for k in range(-2 * r + 1, 2 * r)]:
            for alpha in (0.25, 0.5):
                for _ in range(150):
                    v = rng.normal(scale=1.5, size=g.n)
                    rep = cutoff_cd_check(g, alpha, p, v, x, D=2, mu0=1.0)
                    assert rep.passed, (x, alpha, rep)
                    admissible += not rep.vacuous
    assert admissible >= 1000


def test_power_bound(rng):
    g = build_preset("Z-ball(2,3)").graph
    hits = 0
    for _ in range(2000):
        u = np.exp(rng.normal(scale=2, size=g.n))
        for alpha in (0.25, 0.5, 0.75):
            chk = neighbour_power_bound(g, alpha, u, "0,0")
            assert chk.passed
            hits += chk.hypothesis
    assert hits > 100


@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5))
def test_theta_decomposition(vals):
    v = np.array(vals)
    chk = theta_check(v, 2)
    assert chk.decomposition_slack >= -1e-10 * max(1.0, abs(chk.c0))
    if chk.theta_slack is not None:
        assert chk.theta_slack >= -1e-10 * max(1.0, abs(chk.theta))


def test_theta_on_lattice_ball_matches_c0(rng):
    g = build_preset("Z-ball(1,6)").graph
    for _ in range(20):
        v = rng.normal(size=g.n)
        line = np.array([v[g.index(str(k))] for k in range(-2, 3)])
        assert theta_check(line, 2).c0 == pytest.approx(c_alpha(g, 0.0, v, "0"), rel=1e-12, abs=1e-12)
