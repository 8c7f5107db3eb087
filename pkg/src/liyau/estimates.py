"""Quantitative checks of Li-Yau, differential Harnack and Harnack inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .cdcheck import l_alpha
from .cdfunc import CDFunction, make_cd, ricci_flat, ricci_flat_alpha, tau_lattice
from .errors import DomainError
from .graph import UPSILON, WeightedGraph, bfs_distances, psi, upsilon_alpha_field
from .heat import (HeatTrajectory, UniformizedSolver, solve_uniformized, time_derivative,
                   two_point_closed_form)
from .presets import interior_mask, tau_z_ball, z_ball
from .relaxation import RelaxationFunction

DEFAULT_TIMES = np.geomspace(1e-3, 10.0, 200)
SIGMAS = (0.5, 2.0, 5.0)


@dataclass
class EstimateReport:
    """Slack of one inequality over a set of samples; the check passes iff ``min_slack >= -(tolerance + budget)``."""

    experiment: str
    min_slack: float
    tolerance: float
    params: dict = field(default_factory=dict)
    budget: float = 0.0
    argmin: dict = field(default_factory=dict)
    samples: int = 0
    records: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.min_slack >= -(self.tolerance + self.budget)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def merge(self, other: "EstimateReport") -> "EstimateReport":
        """Combine two reports of the same experiment, keeping the smaller slack."""
        best = self if self.min_slack <= other.min_slack else other
        extra = {**self.extra, **other.extra}
        a, b = self.extra.get("slack"), other.extra.get("slack")
        if a is not None and b is not None and a.shape == b.shape:
            extra["slack"] = np.minimum(a, b)
        return EstimateReport(self.experiment, best.min_slack, self.tolerance, self.params,
                              max(self.budget, other.budget), best.argmin, self.samples + other.samples,
                              self.records + other.records, extra)

    def summary(self) -> dict:
        return {"experiment": self.experiment, "min_slack": self.min_slack, "tolerance": self.tolerance,
                "budget": self.budget, "verdict": self.verdict, "samples": self.samples,
                "argmin": self.argmin, "params": self.params}


def as_relaxation(F, require_cd: bool | None = None) -> RelaxationFunction:
    """Accept a spec string, a ``CDFunction`` or a ready ``RelaxationFunction``."""
    if isinstance(F, RelaxationFunction):
        return F
    if isinstance(F, str):
        F = make_cd(F)
    return RelaxationFunction(F, require_cd=F.is_cd if require_cd is None else require_cd)


def _l_alpha_rows(g: WeightedGraph, alpha: float, V: np.ndarray) -> np.ndarray:
    """``L_alpha`` applied to every row of ``V``."""
    d = V[:, g.dst] - V[:, g.src]
    vals = -d if alpha == 0 else -np.expm1(alpha * d) / alpha
    out = np.zeros((V.shape[0], g.n))
    np.add.at(out.T, g.src, (g.w * vals).T)
    return out / g.mu


def _positive_times(traj: HeatTrajectory) -> np.ndarray:
    keep = traj.t > 0
    if not np.any(keep):
        raise DomainError("trajectory has no positive sample times")
    return keep


def _fill_records(rep: EstimateReport, t, vertices, slack, keep_records: bool):
    i, j = np.unravel_index(int(np.argmin(slack)), slack.shape)
    rep.argmin = {"t": float(t[i]), "x": vertices[j]}
    if keep_records:
        rep.records = [(float(t[a]), vertices[b], float(slack[a, b]))
                       for a in range(slack.shape[0]) for b in range(slack.shape[1])]


def liyau_check(traj: HeatTrajectory, F, alpha: float = 0.0, tolerance: float = 1e-8, vertices=None,
                keep_records: bool = False, phi_values=None) -> EstimateReport:
    """``slack(t, x) = phi(t) - L_alpha(log u)(t, x)``; ``L_0 = -Delta``.

    ``vertices`` restricts the check to a subset (indices), e.g. the interior
    of a lattice ball.  ``phi_values`` may carry ``phi`` at the positive
    sample times to avoid recomputing it.
    """
    R = as_relaxation(F)
    keep = _positive_times(traj)
    t = traj.t[keep]
    V = traj.log()[keep]
    La = _l_alpha_rows(traj.graph, alpha, V)
    phi_t = R(t) if phi_values is None else np.asarray(phi_values, dtype=float)
    slack = phi_t[:, None] - La
    idx = np.arange(traj.graph.n) if vertices is None else np.asarray(vertices)
    slack = slack[:, idx]
    rep = EstimateReport("liyau", float(slack.min()), tolerance, {"F": str(R.F), "alpha": alpha},
                         samples=slack.size, extra={"t": t, "vertices": idx, "slack": slack})
    _fill_records(rep, t, [traj.graph.vertices[k] for k in idx], slack, keep_records)
    return rep


def differential_harnack_check(traj: HeatTrajectory, F, alpha: float = 0.0, tolerance: float = 1e-8,
                               keep_records: bool = False) -> EstimateReport:
    """``slack = phi + d_t log u - [Psi_Y(log u) - (1/alpha) Psi_{Y_alpha}(log u)]``.

    The time derivative is a three-point difference.  Its error, measured
    against ``d_t log u = Psi_{Y'}(log u)``, is reported as ``budget`` and
    added to the tolerance.
    """
    from .graph import UPSILON_PRIME

    R = as_relaxation(F)
    g = traj.graph
    V = traj.log()
    dV = time_derivative(traj.t, V)
    t = traj.t[1:-1]
    if np.any(t <= 0):
        raise DomainError("interior sample times must be positive")
    Vi = V[1:-1]
    rhs = np.array([psi(g, UPSILON, v) for v in Vi])
    if alpha > 0:
        rhs = rhs - np.array([psi(g, upsilon_alpha_field(alpha), v) for v in Vi]) / alpha
    exact = np.array([psi(g, UPSILON_PRIME, v) for v in Vi])
    slack = R(t)[:, None] + dV - rhs
    rep = EstimateReport("dharnack", float(slack.min()), tolerance, {"F": str(R.F), "alpha": alpha},
                         budget=float(np.max(np.abs(dV - exact))), samples=slack.size,
                         extra={"t": t, "vertices": np.arange(g.n), "slack": slack})
    _fill_records(rep, t, g.vertices, slack, keep_records)
    return rep


def harnack_check(traj: HeatTrajectory, eta, pairs, alpha: float = 0.0, tolerance: float = 1e-8) -> EstimateReport:
    """Chained Harnack inequality for each ``(t1, x1, t2, x2)``.

    ``log u(t1,x1) - log u(t2,x2) <= int_{t1}^{t2} eta + 2 mu_max d^2 / (w_min (1-alpha)(t2-t1))``;
    the reported slack is right side minus left side.  ``t1 = 0`` is allowed
    when ``eta`` is integrable at zero.
    """
    g = traj.graph
    if not 0 <= alpha < 1:
        raise DomainError("alpha must lie in [0, 1)")
    mu_max, w_min = float(g.mu.max()), float(g.w.min())
    worst, arg, recs = math.inf, {}, []
    for t1, x1, t2, x2 in pairs:
        if not t1 < t2:
            raise DomainError(f"need t1 < t2, got {t1}, {t2}")
        i1, i2 = _time_index(traj, t1), _time_index(traj, t2)
        u1, u2 = traj.U[i1, g.index(x1)], traj.U[i2, g.index(x2)]
        d = bfs_distances(g, x1)[g.index(x2)]
        integral = _integral(eta, t1, t2)
        bound = integral + 2 * mu_max * d * d / (w_min * (1 - alpha) * (t2 - t1))
        slack = bound - math.log(u1 / u2)
        recs.append((t1, x1, t2, x2, slack))
        if slack < worst:
            worst, arg = slack, {"t1": t1, "x1": x1, "t2": t2, "x2": x2}
    return EstimateReport("harnack", worst, tolerance, {"alpha": alpha, "mu_max": mu_max, "w_min": w_min},
                          argmin=arg, samples=len(recs), records=recs)


def _time_index(traj: HeatTrajectory, t: float) -> int:
    hits = np.flatnonzero(np.isclose(traj.t, t, rtol=1e-14, atol=0))
    if hits.size == 0:
        raise DomainError(f"trajectory has no sample at t = {t}")
    return int(hits[0])


def _integral(eta, t1: float, t2: float) -> float:
    if isinstance(eta, RelaxationFunction):
        return eta.integral(t1, t2)
    val, _ = integrate.quad(eta, t1, t2, epsabs=0, epsrel=1e-11, limit=200)
    return float(val)


# ---------------------------------------------------------------------------
# sweeps over random initial data
# ---------------------------------------------------------------------------

def random_initial(g: WeightedGraph, rng: np.random.Generator, sigma: float) -> np.ndarray:
    return np.exp(rng.normal(0.0, sigma, g.n))


def liyau_sweep(g: WeightedGraph, F, alpha: float = 0.0, n_samples: int = 100, times=DEFAULT_TIMES,
                seed: int = 0, vertices=None, tolerance: float = 1e-8) -> EstimateReport:
    """``liyau_check`` over ``n_samples`` random data ``exp(N(0, sigma^2))``, sigma cycling over 0.5, 2, 5."""
    R = as_relaxation(F)
    solver = UniformizedSolver(g)
    rng = np.random.default_rng(seed)
    times = np.asarray(times, dtype=float)
    phi_t = R(times[times > 0])
    rep = None
    for k in range(n_samples):
        traj = solver(random_initial(g, rng, SIGMAS[k % len(SIGMAS)]), times)
        r = liyau_check(traj, R, alpha, tolerance, vertices, phi_values=phi_t)
        rep = r if rep is None else rep.merge(r)
    rep.params.update({"graph_n": g.n, "seed": seed, "n_samples": n_samples})
    return rep


def harnack_sweep(g: WeightedGraph, eta, alpha: float = 0.0, n_samples: int = 100, seed: int = 0,
                  tolerance: float = 1e-8) -> EstimateReport:
    """Random ``(u0, t1 < t2, x1, x2)`` instances of ``harnack_check``."""
    solver = UniformizedSolver(g)
    rng = np.random.default_rng(seed)
    rep = None
    for k in range(n_samples):
        u0 = random_initial(g, rng, SIGMAS[k % len(SIGMAS)])
        t1, t2 = np.sort(10.0 ** rng.uniform(-3, 1, 2))
        if t1 == t2:
            t2 = 2 * t1
        x1, x2 = rng.choice(g.vertices, 2)
        traj = solver(u0, [t1, t2])
        r = harnack_check(traj, eta, [(float(t1), str(x1), float(t2), str(x2))], alpha, tolerance)
        rep = r if rep is None else rep.merge(r)
    rep.params.update({"seed": seed, "n_samples": n_samples})
    return rep


# ---------------------------------------------------------------------------
# local estimates on lattice balls
# ---------------------------------------------------------------------------

@dataclass
class LocalReport:
    r_values: list
    s: dict
    """``s(r)``: largest ``L_alpha(log u) - phi_alpha(t)`` over the grid and ``B_r``."""
    scaled: dict
    """``r s^+(r)``."""
    constant: float
    bounded: bool
    params: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"r": self.r_values, "s": self.s, "r_s_plus": self.scaled, "fitted_C": self.constant,
                "verdict": "bounded" if self.bounded else "unbounded", "params": self.params}


def local_liyau_check(d: int = 1, r_values=(4, 8, 16), alpha: float = 0.0, horizon: float = 10.0,
                      n_samples: int = 50, seed: int = 0, times=None, sigmas=SIGMAS) -> LocalReport:
    """Estimate ``s(r)`` for solutions of the heat equation on ``B_{2r}`` only.

    Each solution is evolved on the truncated lattice ball ``B_{2r+1}``, whose
    Laplacian agrees with the lattice one on ``B_{2r}``; outside ``B_{2r}`` it
    is not a lattice solution, which is exactly the local setting.  ``C`` is
    fitted as ``r s^+(r)`` at the smallest radius and the family counts as
    bounded when no larger radius exceeds it.
    """
    if alpha == 0.0:
        R = RelaxationFunction(ricci_flat(2 * d, 1.0))
    else:
        R = RelaxationFunction(ricci_flat_alpha(2 * d, 1.0, alpha))
    t = np.geomspace(1e-3, horizon, 200) if times is None else np.asarray(times, dtype=float)
    phi_t = R(t)
    rng = np.random.default_rng(seed)
    s, scaled = {}, {}
    for r in r_values:
        g = z_ball(d, 2 * r + 1).graph
        solver = UniformizedSolver(g)
        inner = np.flatnonzero(g.meta["l1"] <= r)
        worst = -math.inf
        for k in range(n_samples):
            traj = solver(random_initial(g, rng, sigmas[k % len(sigmas)]), t)
            La = _l_alpha_rows(g, alpha, traj.log())[:, inner]
            worst = max(worst, float(np.max(La - phi_t[:, None])))
        s[r] = worst
        scaled[r] = r * max(worst, 0.0)
    rs = sorted(r_values)
    C = scaled[rs[0]]
    bounded = all(scaled[r] <= C * (1 + 1e-9) + 1e-12 for r in rs)
    return LocalReport(list(rs), s, scaled, C, bounded, {"d": d, "alpha": alpha, "horizon": horizon,
                                                         "n_samples": n_samples, "seed": seed})


# ---------------------------------------------------------------------------
# continuum limit on the scaled lattice
# ---------------------------------------------------------------------------

@dataclass
class ContinuumRow:
    tau: float
    t: float
    phi_tau_sq: float
    """Relaxation function of the lattice with measure ``tau^2``, i.e. ``phi(t/tau^2)/tau^2``."""
    phi_tau: float
    """The alternative ``phi(t/tau)/tau``."""
    max_neg_log_lap: float
    gap_tau_sq: float
    gap_tau: float


@dataclass
class ContinuumReport:
    rows: list
    bound_tau_sq: bool
    bound_tau: bool
    below_classical: bool
    params: dict = field(default_factory=dict)

    def gaps(self, reading: str = "tau") -> list:
        return [r.gap_tau if reading == "tau" else r.gap_tau_sq for r in self.rows]

    def summary(self) -> dict:
        return {"rows": [r.__dict__ for r in self.rows], "tau_sq_reading_bounds_all": self.bound_tau_sq,
                "tau_reading_bounds_all": self.bound_tau, "below_1_over_2t": self.below_classical,
                "params": self.params}


def continuum_sweep(taus=(1.0, 0.3, 0.1, 0.03), t: float = 1.0, d: int = 1, n_samples: int = 10,
                    seed: int = 0, extent: float = 12.0, data_extent: float = 4.0,
                    sigma: float = 1.0) -> ContinuumReport:
    """Compare ``-Delta_tau log u(t)`` with both scalings of the relaxation function.

    For each ``tau`` the solution lives on the scaled lattice ball of physical
    radius ``extent``; random data ``exp(N(0, sigma^2))`` is placed on
    ``|x| <= data_extent`` with value 1 beyond, and ``-Delta_tau log u`` is
    sampled on ``|x| <= data_extent + 2``, far from the truncation.
    """
    if d != 1:
        raise DomainError("the continuum sweep is implemented for d = 1")
    base = RelaxationFunction(ricci_flat(2, 1.0))
    rng = np.random.default_rng(seed)
    rows = []
    ok_sq = ok_tau = ok_classic = True
    for tau in taus:
        tau = float(tau)
        R = max(int(math.ceil(extent / tau)), 4)
        g = tau_z_ball(1, R, tau).graph
        x = g.meta["coords"][:, 0] * tau
        solver = UniformizedSolver(g)
        inner = np.flatnonzero(np.abs(x) <= data_extent + 2)
        worst = -math.inf
        for k in range(n_samples):
            u0 = np.where(np.abs(x) <= data_extent, np.exp(rng.normal(0, sigma, g.n)), 1.0)
            if k == 0:
                u0 = np.exp(-x * x / 2) + 1e-12
            v = np.log(solver(u0, [t]).U[0])
            worst = max(worst, float(np.max(l_alpha(g, 0.0, v)[inner])))
        p_sq = float(RelaxationFunction(tau_lattice(1, tau))(t))
        p_tau = float(base(t / tau) / tau)
        ok_sq &= worst <= p_sq
        ok_tau &= worst <= p_tau
        ok_classic &= worst <= 1 / (2 * t)
        rows.append(ContinuumRow(tau, t, p_sq, p_tau, worst, abs(t * p_sq - 0.5), abs(t * p_tau - 0.5)))
    return ContinuumReport(rows, ok_sq, ok_tau, ok_classic, {"t": t, "n_samples": n_samples, "seed": seed})


# ---------------------------------------------------------------------------
# sharpness on two vertices
# ---------------------------------------------------------------------------

@dataclass
class SharpnessReport:
    ratio: float
    t: np.ndarray
    gap: np.ndarray
    one_sided: bool

    @property
    def max_gap(self) -> float:
        return float(np.max(self.gap))


def sharpness_two_point(ratio: float, t_grid=None) -> SharpnessReport:
    """Relative gap ``(phi(t) - w(t)) / phi(t)`` for data with ``u1(0)/u2(0) = ratio``.

    ``w = -Delta log u(t, x1)`` comes from the closed-form solution, written
    as ``log(((2a-1)e^{-2t} + 1)/((1-2a)e^{-2t} + 1))`` with ``a = R/(R+1)``.
    """
    ratio = float(ratio)
    if not ratio >= 1:
        raise DomainError("sharpness needs ratio >= 1")
    t = np.geomspace(0.01, 5.0, 400) if t_grid is None else np.asarray(t_grid, dtype=float)
    a = ratio / (ratio + 1)
    e = np.exp(-2 * t)
    # 1 - 2a = -(R-1)/(R+1), kept exact for huge ratios
    c = (ratio - 1) / (ratio + 1)
    w = np.log1p(c * e) - np.log1p(-c * e)
    phi = np.log1p(e) - np.log1p(-e)
    sol = two_point_closed_form(a, 1 - a, t)
    w_direct = np.log(sol[:, 0] / sol[:, 1])
    if not np.allclose(w, w_direct, rtol=1e-6, atol=1e-12):
        raise DomainError("closed-form cross-check of w failed")
    return SharpnessReport(ratio, t, (phi - w) / phi, bool(np.all(w <= phi * (1 + 1e-15))))
