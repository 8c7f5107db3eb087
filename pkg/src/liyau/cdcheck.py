"""The curvature-dimension condition CD_alpha(F; 0) at a single vertex.

``L_alpha(v)`` is the alpha-deformed Laplacian and ``C_alpha(v)`` the
second-order quantity it is compared against.  At ``alpha = 0`` they reduce
to ``Lv`` and ``Delta Psi_{Y'}(v)``.  The condition holds at ``x`` when
``C_alpha(v)(x) >= F(Lv(x))`` for every ``v`` such that ``L_alpha(v)`` has a
positive local maximum at ``x``.  Only ``v`` on the 2-ball of ``x`` matters.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cdfunc import CDFunction, make_cd, ricci_flat, ricci_flat_alpha
from .errors import DomainError, PreconditionError
from .graph import UPSILON_PRIME, WeightedGraph, ball, bfs_distances, laplacian, psi, upsilon
from .presets import interior_mask, z_ball

# L_alpha(v)(x) must exceed this to count as positive
FEASIBILITY_THRESHOLD = 1e-12
SEARCH_SCALES = (1.0, 2.0, 5.0, 10.0, 20.0)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha < 1.0:
        raise DomainError(f"alpha must lie in [0, 1), got {alpha!r}")
    return alpha


def _vec(g: WeightedGraph, v) -> np.ndarray:
    if isinstance(v, dict):
        v = g.func(v)
    v = np.asarray(v, dtype=float)
    if v.shape != (g.n,):
        raise DomainError(f"vertex function has shape {v.shape}, expected ({g.n},)")
    return v


def _require_known(g: WeightedGraph, v: np.ndarray, x, radius: int) -> None:
    idx = ball(g, x, radius)
    missing = [g.vertices[i] for i in idx if not np.isfinite(v[i])]
    if missing:
        raise DomainError(f"v is missing on the {radius}-ball of {x}: {missing[:5]}")


def l_alpha(g: WeightedGraph, alpha: float, v, x=None):
    """``L_alpha(v) = -(1/alpha) Psi_{Y'}(alpha v)``, and ``Lv`` at ``alpha = 0``."""
    alpha = _check_alpha(alpha)
    v = _vec(g, v)
    d = v[g.dst] - v[g.src]
    if alpha == 0.0:
        vals = -d
    else:
        with np.errstate(over="ignore"):
            vals = -np.expm1(alpha * d) / alpha
    out = np.bincount(g.src, weights=g.w * vals, minlength=g.n) / g.mu
    return out if x is None else float(out[g.index(x)])


def c_alpha(g: WeightedGraph, alpha: float, v, x=None):
    """``(1/mu(x)) sum_y w_xy e^{alpha(v(y)-v(x))} (Psi_{Y'}(v)(y) - Psi_{Y'}(v)(x))``.

    With ``x`` given, ``v`` may be ``nan`` outside the 2-ball of ``x``.
    """
    alpha = _check_alpha(alpha)
    v = _vec(g, v)
    if x is not None:
        _require_known(g, v, x, 2)
        v = np.where(np.isfinite(v), v, 0.0)
    d = v[g.dst] - v[g.src]
    with np.errstate(over="ignore"):
        p = np.bincount(g.src, weights=g.w * np.expm1(d), minlength=g.n) / g.mu
        vals = np.exp(alpha * d) * (p[g.dst] - p[g.src])
    out = np.bincount(g.src, weights=g.w * vals, minlength=g.n) / g.mu
    return out if x is None else float(out[g.index(x)])


def c_zero_reference(g: WeightedGraph, v, x=None):
    """``Delta Psi_{Y'}(v)`` through the generic operators, for cross-checking ``c_alpha``."""
    out = laplacian(g, psi(g, UPSILON_PRIME, _vec(g, v)))
    return out if x is None else float(out[g.index(x)])


# ---------------------------------------------------------------------------
# the local problem at one vertex
# ---------------------------------------------------------------------------

@dataclass
class Margin:
    """Outcome of one evaluation of ``C_alpha(v)(x) - F(Lv(x))``."""

    value: float
    feasible: bool
    Lv: float
    l_alpha: float
    l_alpha_neighbors: np.ndarray
    c_alpha: float
    F_value: float

    @property
    def scale(self) -> float:
        return max(1.0, abs(self.c_alpha), abs(self.F_value))

    @property
    def relative(self) -> float:
        """``value`` divided by the size of its two terms (at least 1)."""
        return self.value / self.scale


class CDCheckProblem:
    """``CD_alpha(F; 0)`` at the vertex ``x``.

    The free variables are the values of ``v`` on the 2-ball of ``x`` with
    ``v(x) = 0``; every quantity is shift invariant, so this loses nothing.
    Evaluation is vectorised over batches of such local vectors.
    """

    def __init__(self, graph: WeightedGraph, x, alpha: float, F):
        self.graph = graph
        self.x = str(x)
        self.alpha = _check_alpha(alpha)
        self.F = make_cd(F) if isinstance(F, str) else F
        xi = graph.index(self.x)
        if not interior_mask(graph, 2)[xi]:
            raise DomainError(f"vertex {self.x} is too close to the boundary of the lattice ball")
        self.ball2 = ball(graph, self.x, 2)
        ball1 = ball(graph, self.x, 1)
        pos = {int(i): k for k, i in enumerate(self.ball2)}
        self.m = len(self.ball2)
        self.x_local = pos[xi]
        self.free = np.array([k for k in range(self.m) if k != self.x_local])
        # half-edges leaving the closed 1-ball stay inside the 2-ball
        mask = np.isin(graph.src, ball1)
        src_g, dst_g = graph.src[mask], graph.dst[mask]
        self._src = np.array([pos[int(i)] for i in src_g], dtype=int)
        self._dst = np.array([pos[int(i)] for i in dst_g], dtype=int)
        one = np.array([pos[int(i)] for i in ball1], dtype=int)
        row = {int(k): r for r, k in enumerate(one)}
        self._A = np.zeros((len(one), len(self._src)))
        for e, (s, wgt) in enumerate(zip(self._src, graph.w[mask])):
            self._A[row[s], e] = wgt / graph.mu[self.ball2[s]]
        self._row_x = row[self.x_local]
        nbrs = [pos[int(j)] for j in graph.neighbor_indices(xi)]
        self._row_nbrs = np.array([row[k] for k in nbrs], dtype=int)
        self._x_edges = np.flatnonzero(self._src == self.x_local)
        self._x_dst_rows = np.array([row[int(k)] for k in self._dst[self._x_edges]], dtype=int)

    # -- conversions -------------------------------------------------------

    def local(self, v) -> np.ndarray:
        """Restrict a full vertex function to the 2-ball, shifted so ``v(x) = 0``."""
        v = _vec(self.graph, v)
        loc = v[self.ball2]
        return loc - loc[self.x_local]

    def embed(self, local, fill: float = 0.0) -> np.ndarray:
        out = np.full(self.graph.n, float(fill))
        out[self.ball2] = local
        return out

    def _from_free(self, Z: np.ndarray) -> np.ndarray:
        V = np.zeros(Z.shape[:-1] + (self.m,))
        V[..., self.free] = Z
        return V

    # -- batch evaluation -------------------------------------------------

    def evaluate(self, V) -> dict:
        """Evaluate a batch of local vectors (shape ``(S, m)``)."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        d = V[:, self._dst] - V[:, self._src]
        with np.errstate(over="ignore", invalid="ignore"):
            Lv = -(d @ self._A.T)
            if self.alpha == 0.0:
                La = Lv
            else:
                La = -(np.expm1(self.alpha * d) @ self._A.T) / self.alpha
            P = np.expm1(d) @ self._A.T
            de = d[:, self._x_edges]
            Ae = self._A[self._row_x, self._x_edges]
            C = (np.exp(self.alpha * de) * (P[:, self._x_dst_rows] - P[:, [self._row_x]])) @ Ae
            lx = La[:, self._row_x]
            ln = La[:, self._row_nbrs]
            feasible = (lx > FEASIBILITY_THRESHOLD) & np.all(lx[:, None] >= ln, axis=1)
            Lx = Lv[:, self._row_x]
            Fv = self.F(Lx)
            value = C - Fv
            scale = np.maximum(1.0, np.maximum(np.abs(C), np.abs(Fv)))
        return {"value": value, "feasible": feasible, "Lv": Lx, "l_alpha": lx,
                "l_alpha_neighbors": ln, "c_alpha": C, "F": Fv, "relative": value / scale}

    def margin_local(self, local) -> Margin:
        r = self.evaluate(np.asarray(local, dtype=float)[None, :])
        return Margin(float(r["value"][0]), bool(r["feasible"][0]), float(r["Lv"][0]), float(r["l_alpha"][0]),
                      r["l_alpha_neighbors"][0], float(r["c_alpha"][0]), float(r["F"][0]))

    def margin(self, v) -> Margin:
        return self.margin_local(self.local(v))

    def check_locality(self, n: int = 10, seed: int = 0) -> float:
        """Largest change of the margin when ``v`` is altered off the 2-ball."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        outside = np.setdiff1d(np.arange(self.graph.n), self.ball2)
        for _ in range(n):
            v = rng.normal(size=self.graph.n)
            a = self.margin(v)
            v2 = v.copy()
            v2[outside] += rng.normal(scale=10.0, size=outside.size)
            b = self.margin(v2)
            worst = max(worst, abs(a.value - b.value), abs(a.c_alpha - c_alpha(self.graph, self.alpha, v2, self.x)))
        return worst


def margin(problem: CDCheckProblem, v) -> Margin:
    return problem.margin(v)


# ---------------------------------------------------------------------------
# falsifier
# ---------------------------------------------------------------------------

@dataclass
class SearchResult:
    best: Margin | None
    witness: np.ndarray | None
    feasible_count: int
    samples: int
    seed: int
    objective: str
    best_relative: float | None = None

    @property
    def found_violation(self) -> bool:
        return self.best is not None and self.best.value < 0

    def summary(self) -> str:
        if self.best is None:
            return f"no feasible v found (budget {self.samples}, seed {self.seed})"
        if self.best.relative < -1e-8:
            return f"violation found: margin {self.best.value:.6g} (budget {self.samples}, seed {self.seed})"
        return f"no violation found (budget {self.samples}, seed {self.seed})"


def search_violation(problem: CDCheckProblem, samples: int = 10_000, descent_steps: int = 200, seed: int = 0,
                     scales=SEARCH_SCALES, objective: str = "value", starts: int = 5) -> SearchResult:
    """Look for a feasible ``v`` with negative margin.

    Random local vectors with entries uniform in ``[-S, S]`` are drawn for
    each scale ``S``; infeasible ones are rejected.  The best ``starts``
    feasible samples are then refined by steepest descent on the chosen
    objective (``"value"`` or ``"relative"``) with central-difference
    gradients, rejecting any step that leaves the feasible set.  A result
    without a negative margin is evidence only, never a proof.
    """
    if objective not in ("value", "relative"):
        raise DomainError("objective must be 'value' or 'relative'")
    rng = np.random.default_rng(seed)
    k = problem.m - 1
    per = max(1, samples // len(scales))
    pool_Z, pool_obj = [], []
    feasible_count = 0
    for S in scales:
        Z = rng.uniform(-S, S, size=(per, k))
        r = problem.evaluate(problem._from_free(Z))
        ok = r["feasible"] & np.isfinite(r[objective])
        feasible_count += int(ok.sum())
        pool_Z.append(Z[ok])
        pool_obj.append(r[objective][ok])
    if feasible_count == 0:
        return SearchResult(None, None, 0, per * len(scales), seed, objective)
    Zs = np.concatenate(pool_Z)
    objs = np.concatenate(pool_obj)
    order = np.argsort(objs, kind="stable")[:starts]
    best_z, best_obj = Zs[order[0]], objs[order[0]]
    best_rel = float(np.min(problem.evaluate(problem._from_free(Zs))["relative"][np.isfinite(objs)]))
    steps_each = max(1, descent_steps // max(1, len(order)))
    for i in order:
        z, o, rel = _descend(problem, Zs[i], objs[i], steps_each, objective)
        best_rel = min(best_rel, rel)
        if o < best_obj:
            best_z, best_obj = z, o
    local = problem._from_free(best_z)
    return SearchResult(problem.margin_local(local), problem.embed(local), feasible_count, per * len(scales),
                        seed, objective, best_rel)


def _descend(problem: CDCheckProblem, z: np.ndarray, obj: float, steps: int, objective: str):
    k = z.size
    eye = np.eye(k)
    best_rel = math.inf
    for _ in range(steps):
        h = 1e-6 * np.maximum(1.0, np.abs(z))
        probes = np.concatenate([z + eye * h[:, None], z - eye * h[:, None]])
        r = problem.evaluate(problem._from_free(probes))[objective]
        grad = (r[:k] - r[k:]) / (2 * h)
        norm = np.linalg.norm(grad)
        if not np.isfinite(norm) or norm == 0:
            break
        step = max(1.0, float(np.max(np.abs(z)))) * 2.0 ** -np.arange(0, 40)
        trial = z[None, :] - step[:, None] * (grad / norm)[None, :]
        rt = problem.evaluate(problem._from_free(trial))
        vals = np.where(rt["feasible"], rt[objective], np.inf)
        j = int(np.argmin(vals))
        if not vals[j] < obj:
            break
        z, obj = trial[j], float(vals[j])
        best_rel = min(best_rel, float(rt["relative"][j]))
    return z, obj, best_rel


def search_violation_parallel(problem: CDCheckProblem, seeds, jobs: int = 1, **kw) -> SearchResult:
    """Run one search per seed and keep the minimum (ties broken by the smaller seed)."""
    seeds = list(seeds)
    if jobs <= 1:
        results = [search_violation(problem, seed=s, **kw) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(lambda s: search_violation(problem, seed=s, **kw), seeds))
    found = [r for r in results if r.best is not None]
    if not found:
        return results[0]
    key = (lambda r: (r.best.value, r.seed)) if results[0].objective == "value" else (lambda r: (r.best.relative, r.seed))
    best = min(found, key=key)
    best.feasible_count = sum(r.feasible_count for r in results)
    best.best_relative = min(r.best_relative for r in found)
    return best


# ---------------------------------------------------------------------------
# counterexample families and tightness
# ---------------------------------------------------------------------------

def family(kind: str, t: float, graph: WeightedGraph | None = None) -> np.ndarray:
    """Parametric ``v`` on the star with three leaves or on the hexagon patch.

    ``v(x*) = 0``, ``v(x1) = t``, ``v(x2) = v(x3) = -t``; on the hexagon
    patch each outer leaf copies the value of its parent.
    """
    from .presets import hexagon_patch, star

    t = float(t)
    if not t > 0:
        raise DomainError("family needs t > 0")
    if kind == "star":
        g = graph or star(3).graph
    elif kind in ("hexagon", "hexagon-patch"):
        g = graph or hexagon_patch().graph
    else:
        raise DomainError(f"unknown family {kind!r}; expected 'star' or 'hexagon-patch'")
    vals = {"x*": 0.0, "x1": t, "x2": -t, "x3": -t}
    v = np.zeros(g.n)
    for i, name in enumerate(g.vertices):
        v[i] = vals[name] if name in vals else vals[name[:2]]
    return v


def star_c0_formula(t):
    """Closed form ``6 - e^t - 5 e^{-t}`` of ``C_0`` at the star centre."""
    t = np.asarray(t, dtype=float)
    return 6.0 - np.exp(t) - 5.0 * np.exp(-t)


@dataclass
class TightnessWitness:
    graph: WeightedGraph
    v: np.ndarray
    Lv: float
    lhs: float
    rhs: float
    is_local_max: bool

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def tightness_witness(d: int, mu0: float, a: float) -> TightnessWitness:
    """A ``v`` on the lattice with ``Delta Psi_{Y'}(v)(0) = F(Lv(0)) = F(a)``.

    ``v(0) = alpha = a mu0 / (2d)``, ``v = 0`` on the neighbours and
    ``v = gamma = -(2d+1) alpha / (2d-1)`` at distance 2, which makes ``Lv``
    constant on the closed 1-ball.
    """
    a = float(a)
    if not a > 0:
        raise DomainError("tightness witness needs a > 0")
    pre = z_ball(d, 2, mu0)
    g = pre.graph
    al = a * mu0 / (2 * d)
    be = 0.0
    ga = (2 * d * be - al - 2 * d * (al - be)) / (2 * d - 1)
    l1 = g.meta["l1"]
    v = np.select([l1 == 0, l1 == 1, l1 == 2], [al, be, ga], 0.0)
    x0 = g.vertices[int(np.flatnonzero(l1 == 0)[0])]
    Lvals = -laplacian(g, v)
    i0 = g.index(x0)
    nb = g.neighbor_indices(i0)
    lhs = c_alpha(g, 0.0, v, x0)
    F = ricci_flat(2 * d, mu0)
    rhs = float(F(Lvals[i0]))
    return TightnessWitness(g, v, float(Lvals[i0]), lhs, rhs, bool(np.all(Lvals[i0] >= Lvals[nb] - 1e-12 * abs(Lvals[i0]))))


# ---------------------------------------------------------------------------
# cut-off variant and auxiliary inequalities
# ---------------------------------------------------------------------------

def cutoff_function(g: WeightedGraph, x0, r: int) -> np.ndarray:
    """``1`` inside ``B_r(x0)``, ``(2r - d)/r`` for ``r <= d <= 2r`` and ``0`` beyond."""
    r = int(r)
    if r < 1:
        raise DomainError("cut-off radius must be a positive integer")
    dist = bfs_distances(g, x0)
    return np.where(dist < r, 1.0, np.where(dist <= 2 * r, (2 * r - dist) / r, 0.0))


@dataclass
class CutoffReport:
    vacuous: bool
    lhs: float = math.nan
    rhs: float = math.nan
    correction: float = math.nan
    reason: str = ""

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return self.vacuous or self.slack >= -1e-10 * max(1.0, abs(self.lhs), abs(self.rhs))


def cutoff_cd_check(g: WeightedGraph, alpha: float, psi_vals, v, x, D: int | None = None,
                    mu0: float | None = None, F: CDFunction | None = None) -> CutoffReport:
    """Cut-off version of ``CD_alpha(F_alpha; 0)`` at ``x``.

    Requires ``psi > 0`` on the closed 1-ball and ``M = psi L_alpha(v)`` to have
    a positive local maximum at ``x``; otherwise the report is vacuous.
    Checks ``C_alpha(v)(x) >= F_alpha(Lv(x)) - (1/mu0) L_alpha(v)(x)
    sum_y e^{v(y)-v(x)} |psi(x) - psi(y)| / psi(y)``.
    """
    alpha = _check_alpha(alpha)
    if alpha == 0.0:
        raise DomainError("the cut-off check needs alpha in (0, 1)")
    v = _vec(g, v)
    psi_vals = _vec(g, psi_vals)
    xi = g.index(x)
    nb = g.neighbor_indices(xi)
    D = int(g.degree(x)) if D is None else int(D)
    mu0 = float(g.mu[xi]) if mu0 is None else float(mu0)
    F = ricci_flat_alpha(D, mu0, alpha) if F is None else F
    if psi_vals[xi] <= 0 or np.any(psi_vals[nb] <= 0):
        return CutoffReport(True, reason="psi is not positive on the closed neighbourhood")
    La = l_alpha(g, alpha, v)
    M = psi_vals * La
    if not (M[xi] > 0 and np.all(M[xi] >= M[nb])):
        return CutoffReport(True, reason="psi L_alpha(v) has no positive local maximum here")
    Lv = float(-laplacian(g, v)[xi])
    corr = float(np.sum(np.exp(v[nb] - v[xi]) * np.abs(psi_vals[xi] - psi_vals[nb]) / psi_vals[nb]))
    corr *= La[xi] / mu0
    lhs = c_alpha(g, alpha, v, x)
    return CutoffReport(False, lhs, float(F(Lv)) - corr, corr)


@dataclass
class PowerBoundCheck:
    hypothesis: bool
    lhs: float
    rhs: float

    @property
    def passed(self) -> bool:
        return (not self.hypothesis) or self.lhs <= self.rhs * (1 + 1e-12)


def neighbour_power_bound(g: WeightedGraph, alpha: float, u, x) -> PowerBoundCheck:
    """If ``Delta(u^alpha)(x) < 0`` then ``sum_{y~x} u(y) <= D^{1/alpha} u(x)``."""
    alpha = _check_alpha(alpha)
    if alpha == 0.0:
        raise DomainError("the power bound needs alpha in (0, 1)")
    u = _vec(g, u)
    if np.any(u <= 0):
        raise DomainError("u must be positive")
    xi = g.index(x)
    nb = g.neighbor_indices(xi)
    hyp = laplacian(g, u**alpha, x) < 0
    return PowerBoundCheck(bool(hyp), float(u[nb].sum()), float(len(nb) ** (1 / alpha) * u[xi]))


def theta(v, x: int) -> float:
    """``sum_j e^{v(x+-1)-v(x)} (e^{-Lv(x+-1)} - 1 + Lv(x))`` on the integer line, ``mu = 1``.

    ``v`` is an array indexed by consecutive integers and must cover
    ``x - 2 .. x + 2``.
    """
    v = np.asarray(v, dtype=float)
    if x < 2 or x > v.size - 3:
        raise DomainError("theta needs v on x-2 .. x+2")
    Lv = lambda i: 2 * v[i] - v[i - 1] - v[i + 1]
    return float(sum(math.exp(v[y] - v[x]) * (math.exp(-Lv(y)) - 1 + Lv(x)) for y in (x - 1, x + 1)))


@dataclass
class ThetaCheck:
    c0: float
    lower: float
    theta: float
    Lv: float

    @property
    def decomposition_slack(self) -> float:
        return self.c0 - self.lower

    @property
    def theta_slack(self) -> float | None:
        """``Theta - 2 e^{-Lv/2}(Lv - 1)``, defined when ``Lv >= 1``."""
        if self.Lv < 1:
            return None
        return self.theta - 2 * math.exp(-self.Lv / 2) * (self.Lv - 1)


def theta_check(v, x: int) -> ThetaCheck:
    """Evaluate both sides of ``Delta Psi_{Y'}(v)(x) >= 2 e^{-Lv/2} Y(Lv) + Theta(v)(x)`` on the line."""
    v = np.asarray(v, dtype=float)
    th = theta(v, x)
    Lv = 2 * v[x] - v[x - 1] - v[x + 1]
    P = lambda i: math.expm1(v[i - 1] - v[i]) + math.expm1(v[i + 1] - v[i])
    c0 = P(x - 1) + P(x + 1) - 2 * P(x)
    lower = 2 * math.exp(-Lv / 2) * float(upsilon(Lv)) + th
    return ThetaCheck(c0, lower, th, Lv)
