"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""

import math

import numpy as np
import pytest

from liyau.cdcheck import (CDCheckProblem, c_alpha, family, neighbour_power_bound, search_violation,
                           star_c0_formula, theta_check, tightness_witness)
from liyau.cdfunc import (complete, eta_root, make_cd, ratio_function, superadditivity_gamma,
                          superadditivity_violation, two_point_alpha)
from liyau.estimates import (DEFAULT_TIMES, as_relaxation, continuum_sweep, harnack_sweep, liyau_sweep,
                             local_liyau_check, sharpness_two_point)
from liyau.graph import g_alpha, verify_identities
from liyau.presets import build_preset, hexagon_patch, interior_mask, star
from liyau.relaxation import RelaxationFunction, ode_residual
from liyau.ricci import verify_ricci_flat

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def test_criterion_01_identities(report):
    rng = np.random.default_rng(2024)
    worst, name = 0.0, ""
    for k in range(100):
        g = build_preset(f"random({rng.integers(2, 9)},{k})").graph
        sigma = (0.5, 2.0, 5.0)[k % 3]
        u = np.exp(rng.normal(0.0, sigma / 2, g.n))
        rep = verify_identities(g, u)
        if rep.max_residual > worst:
            worst = rep.max_residual
            name = max(rep.residuals, key=rep.residuals.get)
    ok = report(1, worst <= 1e-12, f"max identity residual {worst:.2e} ({name}) over 100 instances")
    assert ok


def test_criterion_02_two_point_relaxation(report):
    t = np.geomspace(1e-3, 10, 400)
    R = RelaxationFunction("two_point", use_closed=False)
    # -log tanh t written without cancellation: log(1 + e^{-2t}) - log(1 - e^{-2t})
    e = np.exp(-2 * t)
    exact = np.log1p(e) - np.log1p(-e)
    rel = float(np.max(np.abs(R(t) - exact) / exact))
    ode = float(np.max(ode_residual(R, t)))
    ok = report(2, rel <= 1e-8 and ode <= 1e-7, f"max rel error {rel:.2e}, ODE residual {ode:.2e}")
    assert ok


def test_criterion_03_quadratic_relaxation(report):
    t = np.geomspace(1e-3, 1e3, 200)
    worst = 0.0
    for nu in (0.5, 1.0, 2.0, 7.0):
        R = RelaxationFunction(f"quadratic(c={nu})", use_closed=False)
        worst = max(worst, float(np.max(np.abs(R(t) * nu * t - 1))))
    ok = report(3, worst <= 1e-10, f"max rel error of 1/(nu t) {worst:.2e}")
    assert ok


LIYAU_CASES = [("two-point", "two_point", None), ("path3", "path3", None),
               ("complete(3)", "complete(D=2)", None), ("complete(4)", "complete(D=3)", None),
               ("complete(5)", "complete(D=4)", None), ("complete(6)", "complete(D=5)", None),
               ("Z-ball(1,8)", "ricci_flat(D=2,mu0=1)", 2)]


def test_criterion_04_liyau_sweeps(report):
    lines, ok = [], True
    for preset, F, depth in LIYAU_CASES:
        g = build_preset(preset).graph
        vertices = None if depth is None else np.flatnonzero(interior_mask(g, depth))
        rep = liyau_sweep(g, F, n_samples=100, times=DEFAULT_TIMES, seed=0, vertices=vertices)
        ok &= rep.min_slack >= -1e-8
        lines.append(f"{preset}:{rep.min_slack:.2e}")
    ok = report(4, ok, "min slack " + ", ".join(lines))
    assert ok


def test_criterion_05_sharpness(report):
    rep = sharpness_two_point(1e9)
    ok = report(5, rep.max_gap <= 1e-4 and rep.one_sided, f"max relative gap {rep.max_gap:.2e}")
    assert ok


def test_criterion_06_tightness(report):
    worst = 0.0
    for d in (1, 2, 3):
        for a in (0.5, 1.0, 2.0, 5.0):
            w = tightness_witness(d, 1.0, a)
            worst = max(worst, w.residual)
    ok = report(6, worst <= 1e-10, f"max |C_0(v)(0) - F(Lv(0))| {worst:.2e}")
    assert ok


def test_criterion_07_counterexamples(report):
    gs, gh = star(3).graph, hexagon_patch().graph
    formula_err, hex_err = 0.0, 0.0
    for t in (1.0, 2.0, 5.0, 10.0):
        expected = 6 - math.exp(t) - 5 * math.exp(-t)
        val = c_alpha(gs, 0.0, family("star", t), "x*")
        formula_err = max(formula_err, abs(val - expected) / max(1.0, abs(expected)),
                          abs(float(star_c0_formula(t)) - expected))
        hex_err = max(hex_err, abs(c_alpha(gh, 0.0, family("hexagon", t), "x*") - val))
    res = search_violation(CDCheckProblem(gs, "x*", 0.0, "two_point"), samples=10_000, seed=1)
    ok = formula_err <= 1e-10 and hex_err == 0.0 and res.best.feasible and res.best.value < -100
    ok = report(7, ok, f"formula error {formula_err:.1e}, hexagon-star difference {hex_err:.1e}, "
                       f"search margin {res.best.value:.4g}")
    assert ok


def test_criterion_08_negative_control(report):
    g = build_preset("Z-ball(1,3)").graph
    P = CDCheckProblem(g, "0", 0.0, "ricci_flat(D=2,mu0=1)")
    res = search_violation(P, samples=10_000, seed=0, objective="relative")
    raw = search_violation(P, samples=10_000, seed=0, objective="value")
    ok = res.feasible_count > 0 and res.best.relative >= -1e-8 and raw.best.value >= -1e-8
    ok = report(8, ok, f"{res.feasible_count} feasible samples, best relative margin {res.best.relative:.2e}, "
                       f"best margin {raw.best.value:.2e}")
    assert ok


def test_criterion_09_continuum_limit(report):
    rep = continuum_sweep(taus=(1.0, 0.3, 0.1, 0.03), t=1.0, n_samples=10)
    ok = True
    for reading in ("tau", "tau2"):
        gaps = rep.gaps(reading)
        ok &= all(a > b for a, b in zip(gaps, gaps[1:])) and gaps[-1] <= 0.05
    bounding = [name for name, flag in (("tau", rep.bound_tau), ("tau^2", rep.bound_tau_sq)) if flag]
    ok = report(9, ok, f"gaps tau {[round(x, 4) for x in rep.gaps('tau')]}, "
                       f"tau^2 {[round(x, 4) for x in rep.gaps('tau2')]}; "
                       f"readings bounding -Delta log u: {bounding or 'none'}")
    assert ok


HARNACK_CASES = [("two-point", "two_point", two_point_alpha(0.5)), ("path3", "path3", "path3"),
                 ("complete(4)", "complete(D=3)", complete(3, alpha=0.5))]


def test_criterion_10_harnack(report):
    lines, ok = [], True
    for preset, F, F_alpha in HARNACK_CASES:
        g = build_preset(preset).graph
        plain = harnack_sweep(g, as_relaxation(F), alpha=0.0, n_samples=100, seed=0)
        deformed = harnack_sweep(g, RelaxationFunction(F_alpha, require_cd=False), alpha=0.5, n_samples=100,
                                 seed=1)
        ok &= plain.min_slack >= -1e-8 and deformed.min_slack >= -1e-8
        lines.append(f"{preset}: {plain.min_slack:.2e} / {deformed.min_slack:.2e}")
    ok = report(10, ok, "min log-slack (alpha=0 / alpha=1/2) " + "; ".join(lines))
    assert ok


def test_criterion_11_local_estimate(report):
    rep = local_liyau_check(1, (4, 8, 16), n_samples=50)
    scaled = {r: round(v, 6) for r, v in rep.scaled.items()}
    s = {r: float(f"{v:.3g}") for r, v in rep.s.items()}
    ok = report(11, rep.bounded, f"s(r) = {s}, r s+(r) = {scaled}, C = {rep.constant:.4g}")
    assert ok


def test_criterion_12_properties(report):
    rng = np.random.default_rng(12)
    failures = {}

    # quadratic lower bound for g_alpha
    bad = 0
    for alpha in rng.uniform(0.01, 0.99, 20):
        z = rng.uniform(0, 30, 500)
        bad += np.sum(g_alpha(z, alpha) < 0.5 * (1 - alpha) * z * z * (1 - 1e-12))
        bad += np.sum(g_alpha(-z, alpha) < 0)
    failures["g_alpha"] = int(bad)

    # superadditivity with the computed gamma
    bad = 0
    for spec in ("ricci_flat(D=2,mu0=1)", "lambda_family(lam=0.5)", "path3"):
        F = make_cd(spec)
        H = ratio_function(F)
        a_star = F.convex_from if F.convex_from else 4.0
        sc = superadditivity_gamma(H, a_star)
        x, y = rng.uniform(0, 4 * a_star, 10_000), rng.uniform(0, 4 * a_star, 10_000)
        bad += superadditivity_violation(H, sc.gamma, x, y) > 1e-12
    failures["superadditivity"] = int(bad)

    # a*(eta): nontrivial root and the 2(eta - 1) asymptotic
    bad = 0
    for eta in rng.uniform(1.001, 30, 200):
        a = eta_root(eta)
        bad += not (a > 0 and abs(math.expm1(-eta * a) + a) <= 1e-11)
    errs = [abs(eta_root(1 + e) / (2 * e) - 1) for e in (1e-1, 1e-2, 1e-3)]
    bad += not (errs[0] > errs[1] > errs[2])
    failures["eta_root"] = int(bad)

    # Theta inequality on the line
    bad = 0
    for _ in range(2000):
        chk = theta_check(rng.uniform(-3, 3, 5), 2)
        bad += chk.decomposition_slack < -1e-10 * max(1.0, abs(chk.c0))
        if chk.theta_slack is not None:
            bad += chk.theta_slack < -1e-10 * max(1.0, abs(chk.theta))
    failures["theta"] = int(bad)

    # neighbour power bound
    g = build_preset("Z-ball(2,3)").graph
    bad = 0
    for _ in range(1000):
        u = np.exp(rng.normal(scale=2, size=g.n))
        for a in (0.25, 0.5, 0.75):
            bad += not neighbour_power_bound(g, a, u, "0,0").passed
    failures["power_bound"] = int(bad)

    # Ricci-flat structures on every interior vertex
    bad = 0
    for spec in ("Z-ball(1,5)", "Z-ball(2,4)", "Z-ball(3,3)", "cycle(5)", "cycle(8)", "complete(3)",
                 "complete(4)", "complete(6)"):
        pre = build_preset(spec)
        interior = interior_mask(pre.graph, 2)
        for i, x in enumerate(pre.graph.vertices):
            if interior[i]:
                bad += not verify_ricci_flat(pre.graph, pre.ricci, x, n_random=100).passed
    failures["ricci_flat"] = int(bad)

    ok = report(12, not any(failures.values()), f"failures {failures}")
    assert ok
