import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graph_and_positive
from liyau.errors import DomainError, PreconditionError
from liyau.heat import (SpectralSolver, UniformizedSolver, log_equation_residual, refined_grid, solve_on_ball,
                        solve_rk, solve_spectral, solve_uniformized, two_point_closed_form)
from liyau.presets import build_preset, two_point

TIMES = np.array([0.0, 0.1, 0.5, 1.0, 3.0, 10.0])


def test_two_point_closed_form():
    g = two_point().graph
    traj = solve_spectral(g, [3.0, 1.0], TIMES)
    assert np.allclose(traj.U, two_point_closed_form(3.0, 1.0, TIMES), rtol=1e-13)
    # u1(t) = (u1 - u2)/2 e^{-2t} + (u1 + u2)/2
    assert traj.U[3, 0] == pytest.approx(np.exp(-2.0) + 2.0, rel=1e-14)


@pytest.mark.parametrize("solver", [solve_spectral, solve_rk, solve_uniformized])
def test_constant_initial_data_is_stationary(solver):
    g = build_preset("random(6,3)").graph
    traj = solver(g, np.full(g.n, 2.5), TIMES)
    assert np.allclose(traj.U, 2.5, rtol=1e-10)


def test_k4_spectral_vs_rk():
    g = build_preset("complete(4)").graph
    t = [0.1, 1.0, 10.0]
    a = solve_spectral(g, [1.0, 2.0, 3.0, 4.0], t)
    b = solve_rk(g, [1.0, 2.0, 3.0, 4.0], t)
    assert np.allclose(a.U, b.U, rtol=1e-8, atol=0)


@pytest.mark.parametrize("seed", range(50))
def test_random_graphs_spectral_vs_rk(seed):
    g = build_preset(f"random({3 + seed % 6},{seed})").graph
    u0 = np.exp(np.random.default_rng(seed).normal(size=g.n))
    t = [0.05, 0.5, 2.0]
    a, b = solve_spectral(g, u0, t), solve_rk(g, u0, t)
    assert np.allclose(a.U, b.U, rtol=1e-8, atol=0)


@pytest.mark.parametrize("seed", range(10))
def test_uniformized_vs_rk(seed):
    g = build_preset(f"random(7,{seed})").graph
    u0 = np.exp(np.random.default_rng(seed).normal(scale=3, size=g.n))
    t = [0.01, 0.3, 1.0, 5.0]
    a, b = solve_uniformized(g, u0, t), solve_rk(g, u0, t)
    assert np.allclose(a.U, b.U, rtol=1e-9, atol=0)


def test_uniformized_keeps_tiny_values_accurate():
    # entries near 1e-12 keep a small relative error where spectral evaluation cannot
    g = build_preset("Z-ball(1,10)").graph
    u0 = np.full(g.n, 1e-12)
    u0[g.index("0")] = 1.0
    t = [1e-3, 1e-2]
    a = solve_uniformized(g, u0, t)
    b = solve_rk(g, u0, t, tol=1e-13)
    assert np.allclose(a.U, b.U, rtol=1e-8, atol=0)


@given(graph_and_positive(max_n=7))
@settings(max_examples=40)
def test_mass_and_max_principle(data):
    g, u0 = data
    traj = solve_uniformized(g, u0, np.geomspace(1e-3, 10, 30))
    m = traj.mass()
    assert np.allclose(m, m[0], rtol=1e-10)
    assert np.all(np.diff(traj.U.min(axis=1)) >= -1e-12 * traj.U.max())
    assert np.all(np.diff(traj.U.max(axis=1)) <= 1e-12 * traj.U.max())
    assert np.all(traj.U > 0)


@given(graph_and_positive(max_n=6), st.floats(0.01, 3), st.floats(0.01, 3))
@settings(max_examples=30)
def test_semigroup(data, t1, t2):
    g, u0 = data
    S = SpectralSolver(g)
    direct = S(u0, [t1 + t2]).U[0]
    mid = S(u0, [t1]).U[0]
    chained = S(mid, [t2]).U[0]
    assert np.allclose(direct, chained, rtol=1e-10)


def test_linearity(rng):
    g = build_preset("random(6,8)").graph
    u, w = np.exp(rng.normal(size=g.n)), np.exp(rng.normal(size=g.n))
    t = [0.2, 2.0]
    lhs = solve_rk(g, 2 * u + 3 * w, t).U
    rhs = 2 * solve_rk(g, u, t).U + 3 * solve_rk(g, w, t).U
    assert np.allclose(lhs, rhs, rtol=1e-9)


def test_loose_tolerance_positivity(rng):
    g = build_preset("random(8,1)").graph
    u0 = np.exp(rng.normal(scale=3, size=g.n))
    traj = solve_rk(g, u0, np.geomspace(1e-3, 10, 50), tol=1e-3)
    assert np.all(traj.U > 0)


def test_rejects_bad_input():
    g = two_point().graph
    with pytest.raises(PreconditionError):
        solve_spectral(g, [1.0, 0.0], [1.0])
    with pytest.raises(DomainError):
        solve_spectral(g, [1.0, 1.0, 1.0], [1.0])
    with pytest.raises(DomainError):
        solve_rk(g, [1.0, 2.0], [1.0, 0.5])
    with pytest.raises(DomainError):
        UniformizedSolver(g)([1.0, 2.0], [-1.0])


def test_trajectory_is_read_only():
    traj = solve_spectral(two_point().graph, [1.0, 2.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        traj.U[0, 0] = 5.0


# -- log equations ---------------------------------------------------------------------

def test_log_residuals_two_point():
    g = two_point().graph
    t = refined_grid(5.0, n=4000, t_min=1e-2)
    traj = solve_spectral(g, [3.0, 0.5], t)
    rep = log_equation_residual(traj)
    assert rep.first_order <= 1e-6 and rep.rewritten <= 1e-6
    assert rep.differentiated <= 1e-5


def test_log_residuals_random_graph():
    g = build_preset("random(6,4)").graph
    u0 = np.exp(np.random.default_rng(4).normal(size=g.n))
    # fast modes (diagonal up to ~40) need a finer grid; residuals shrink at second order
    coarse = log_equation_residual(solve_uniformized(g, u0, refined_grid(3.0, n=6000, t_min=0.1)))
    fine = log_equation_residual(solve_uniformized(g, u0, refined_grid(3.0, n=20_000, t_min=0.1)))
    assert fine.first_order <= 1e-6 and fine.differentiated <= 1e-5
    assert fine.max_residual <= 0.2 * coarse.max_residual


def test_log_residuals_constant():
    g = build_preset("cycle(5)").graph
    rep = log_equation_residual(solve_spectral(g, np.ones(g.n), [0.1, 0.2, 0.3]))
    assert rep.max_residual <= 1e-13


def test_log_residual_needs_three_samples():
    with pytest.raises(DomainError):
        log_equation_residual(solve_spectral(two_point().graph, [1.0, 2.0], [0.1, 0.2]))


# -- lattice balls ---------------------------------------------------------------------

def test_ball_solution_matches_larger_pad():
    t = np.linspace(0.01, 1.0, 20)
    u0 = lambda p: 1.0 + np.exp(-0.3 * abs(p[0]))
    a = solve_on_ball(1, 4, u0, t, pad=20)
    assert a.influence <= 1e-12
    b = solve_on_ball(1, 4, u0, t, pad=80)
    assert np.allclose(a.trajectory.U, b.trajectory.U, rtol=1e-12, atol=0)


def test_ball_constant_data():
    sol = solve_on_ball(1, 3, lambda p: 1.0, [0.5, 1.0])
    assert np.allclose(sol.trajectory.U, 1.0, rtol=1e-13)


def test_ball_dirac_data_positive():
    sol = solve_on_ball(1, 4, {(0,): 1.0}, np.geomspace(1e-3, 1.0, 20), fill=1e-6)
    assert np.all(sol.trajectory.U > 0)
    assert sol.influence <= 1e-12


def test_ball_equation_holds_on_inner_ball():
    t = np.linspace(0.1, 0.5, 401)
    sol = solve_on_ball(1, 4, lambda p: 2.0 + np.sin(p[0]), t)
    g = sol.full.graph
    inner = np.flatnonzero(g.meta["l1"] <= 8)
    U = sol.full.U
    dU = (U[2:] - U[:-2]) / (t[2:] - t[:-2])[:, None]
    lap = (g.laplacian_matrix() @ U[1:-1].T).T
    assert np.max(np.abs(dU - lap)[:, inner]) <= 1e-4


def test_ball_rejects_bad_u0():
    with pytest.raises(DomainError):
        solve_on_ball(1, 2, [1.0, 2.0], [1.0])
