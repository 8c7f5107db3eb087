"""Weighted graphs, vertex functions and first-order discrete operators.

A vertex function is a one-dimensional ``numpy`` array aligned with
``WeightedGraph.vertices``.  All operators accept an optional vertex id and
return either the value at that vertex or the full array.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import DomainError, PreconditionError

# below this magnitude Upsilon is evaluated from its Taylor series
SERIES_CUTOFF = 0.5
# Taylor coefficients 1/k! for k = 2..20; the truncation error below the
# cutoff is under 1e-17 relative
_UPS_COEF = [1.0 / math.factorial(k) for k in range(20, 1, -1)]


# ---------------------------------------------------------------------------
# the Upsilon family
# ---------------------------------------------------------------------------

def upsilon(z):
    """Return ``e^z - z - 1`` evaluated without cancellation near zero."""
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        direct = np.expm1(z) - z
    small = np.where(np.abs(z) < SERIES_CUTOFF, z, 0.0)
    series = np.zeros_like(small)
    for c in _UPS_COEF:
        series = series * small + c
    series = series * small * small
    out = np.where(np.abs(z) < SERIES_CUTOFF, series, direct)
    return out[()] if out.ndim == 0 else out


def upsilon_prime(z):
    """Return ``e^z - 1``."""
    with np.errstate(over="ignore"):
        out = np.expm1(np.asarray(z, dtype=float))
    return out[()] if np.ndim(out) == 0 else out


def _check_alpha(alpha):
    if alpha is None or not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def upsilon_alpha(z, alpha):
    """Return ``Upsilon(alpha z)``."""
    _check_alpha(alpha)
    return upsilon(alpha * np.asarray(z, dtype=float))


def g_alpha(z, alpha):
    """Return ``Upsilon(z) - Upsilon(alpha z) / alpha``.

    Nonnegative on the real line with its only zero at the origin.
    """
    _check_alpha(alpha)
    z = np.asarray(z, dtype=float)
    return upsilon(z) - upsilon(alpha * z) / alpha


def h_alpha(z, alpha):
    """Return ``z - z^alpha / alpha + (1 - alpha) / alpha`` for ``z >= 0``.

    Satisfies ``g_alpha(z) = h_alpha(e^z)``.
    """
    _check_alpha(alpha)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise DomainError("h_alpha is only defined for z >= 0")
    out = z - z**alpha / alpha + (1.0 - alpha) / alpha
    return out[()] if out.ndim == 0 else out


_FAMILY = {
    "upsilon": lambda z, a: upsilon(z),
    "upsilon_prime": lambda z, a: upsilon_prime(z),
    "upsilon_alpha": upsilon_alpha,
    "g_alpha": g_alpha,
    "h_alpha": h_alpha,
}


def upsilon_family(kind: str, z, alpha: float | None = None):
    """Evaluate one member of the Upsilon family by name.

    Parameters
    ----------
    kind : {"upsilon", "upsilon_prime", "upsilon_alpha", "g_alpha", "h_alpha"}
    z : float or array_like
    alpha : float, optional
        Required in ``(0, 1)`` for the alpha kinds.
    """
    try:
        fn = _FAMILY[kind]
    except KeyError:
        raise DomainError(f"unknown Upsilon kind {kind!r}; expected one of {sorted(_FAMILY)}") from None
    return fn(z, alpha)


# ---------------------------------------------------------------------------
# scalar fields H with analytic derivative
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarField:
    """A C^1 function on an open interval together with its derivative."""

    name: str
    eval: Callable
    deriv: Callable
    domain: tuple = (-math.inf, math.inf)

    def __call__(self, y):
        return self.eval(y)

    def contains(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        lo, hi = self.domain
        return (y > lo) & (y < hi)

    def derivative_error(self, points) -> float:
        """Largest relative gap between ``deriv`` and a central difference."""
        pts = np.asarray(points, dtype=float)
        if not np.all(self.contains(pts)):
            raise DomainError(f"sample points leave the domain of {self.name}")
        h = 1e-5 * np.maximum(1.0, np.abs(pts))
        lo, hi = self.domain
        h = np.minimum(h, 0.5 * np.minimum(pts - lo, hi - pts))
        fd = (self.eval(pts + h) - self.eval(pts - h)) / (2 * h)
        exact = self.deriv(pts)
        return float(np.max(np.abs(fd - exact) / np.maximum(1.0, np.abs(exact))))


HALF_SQUARE = ScalarField("half_square", lambda y: 0.5 * np.square(y), lambda y: np.asarray(y, dtype=float))
SQRT = ScalarField("sqrt", np.sqrt, lambda y: 0.5 / np.sqrt(y), (0.0, math.inf))
NEG_LOG = ScalarField("neg_log", lambda y: -np.log(y), lambda y: -1.0 / np.asarray(y, dtype=float), (0.0, math.inf))
UPSILON = ScalarField("upsilon", upsilon, upsilon_prime)
UPSILON_PRIME = ScalarField("upsilon_prime", upsilon_prime, lambda y: np.exp(y))


def upsilon_alpha_field(alpha: float) -> ScalarField:
    """``Upsilon_alpha(z) = Upsilon(alpha z)`` as a scalar field."""
    _check_alpha(alpha)
    return ScalarField(
        f"upsilon_alpha({alpha:g})",
        lambda y: upsilon(alpha * np.asarray(y, dtype=float)),
        lambda y: alpha * upsilon_prime(alpha * np.asarray(y, dtype=float)),
    )


def bregman(H: ScalarField, w, z):
    """Return ``H(w) - H(z) - H'(z)(w - z)``."""
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    if not (np.all(H.contains(w)) and np.all(H.contains(z))):
        raise DomainError(f"arguments outside the domain {H.domain} of {H.name}")
    out = H.eval(w) - H.eval(z) - H.deriv(z) * (w - z)
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# weighted graphs
# ---------------------------------------------------------------------------

def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class WeightedGraph:
    """Finite undirected graph with positive edge weights and vertex measure.

    Parameters
    ----------
    vertices : iterable of str
        Vertex ids; converted to ``str``.
    edges : iterable of (u, v, w)
        Undirected edges.  Repeating an edge with the same weight is
        harmless; repeating it with a different weight is an error.
    mu : None, "unit", "degree", mapping or array_like
        Vertex measure.  ``None`` and ``"unit"`` give ``mu = 1``;
        ``"degree"`` gives the weighted degree.
    meta : dict, optional
        Free-form metadata (presets record lattice coordinates here).
    """

    def __init__(self, vertices: Iterable, edges: Iterable, mu=None, meta: dict | None = None):
        verts = tuple(str(v) for v in vertices)
        if not verts:
            raise DomainError("a graph needs at least one vertex")
        index = {}
        for i, v in enumerate(verts):
            if v in index:
                raise DomainError(f"duplicate vertex id {v!r}")
            index[v] = i
        self.vertices = verts
        self._index = index
        n = len(verts)

        pairs: dict[tuple[int, int], float] = {}
        for e in edges:
            a, b, w = e
            a, b = str(a), str(b)
            for end in (a, b):
                if end not in index:
                    raise DomainError(f"edge endpoint {end!r} is not a vertex")
            if a == b:
                raise DomainError(f"self-loop at {a!r}")
            w = float(w)
            if not (w > 0 and math.isfinite(w)):
                raise DomainError(f"edge ({a}, {b}) has nonpositive or non-finite weight {w}")
            i, j = sorted((index[a], index[b]))
            if (i, j) in pairs and pairs[(i, j)] != w:
                raise DomainError(
                    f"edge ({a}, {b}) listed with conflicting weights {pairs[(i, j)]} and {w}"
                )
            pairs[(i, j)] = w

        keys = sorted(pairs)
        eu = np.array([k[0] for k in keys], dtype=np.intp)
        ev = np.array([k[1] for k in keys], dtype=np.intp)
        ew = np.array([pairs[k] for k in keys], dtype=float)
        self.edge_u, self.edge_v, self.edge_w = _frozen(eu), _frozen(ev), _frozen(ew)

        # half-edges, each undirected weight mirrored exactly
        src = np.concatenate([eu, ev])
        dst = np.concatenate([ev, eu])
        hw = np.concatenate([ew, ew])
        order = np.lexsort((dst, src))
        self.src, self.dst, self.w = _frozen(src[order]), _frozen(dst[order]), _frozen(hw[order])
        self.indptr = _frozen(np.searchsorted(self.src, np.arange(n + 1)))

        self.mu = _frozen(self._make_mu(mu))
        self.meta = dict(meta or {})

    def _make_mu(self, mu) -> np.ndarray:
        n = self.n
        if mu is None or (isinstance(mu, str) and mu == "unit"):
            return np.ones(n)
        if isinstance(mu, str):
            if mu != "degree":
                raise DomainError(f"unknown measure preset {mu!r}")
            out = np.bincount(self.src, weights=self.w, minlength=n).astype(float)
        elif isinstance(mu, Mapping):
            by_id = {str(k): float(val) for k, val in mu.items()}
            missing = set(self.vertices) - set(by_id)
            if missing:
                raise DomainError(f"measure missing at vertices {sorted(missing)}")
            out = np.array([by_id[v] for v in self.vertices])
        else:
            out = np.array(mu, dtype=float).reshape(-1)
            if out.size == 1:
                out = np.full(n, out[0])
            if out.size != n:
                raise DomainError(f"measure has {out.size} entries for {n} vertices")
        if not np.all(np.isfinite(out) & (out > 0)):
            bad = [self.vertices[i] for i in np.flatnonzero(~(np.isfinite(out) & (out > 0)))]
            raise DomainError(f"measure must be positive; offending vertices {bad}")
        return out

    # -- basic queries -----------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edge_w)

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, edges={self.n_edges})"

    def __contains__(self, x) -> bool:
        return str(x) in self._index

    def index(self, x) -> int:
        try:
            return self._index[str(x)]
        except KeyError:
            raise DomainError(f"unknown vertex {x!r}") from None

    def neighbor_indices(self, i: int) -> np.ndarray:
        return self.dst[self.indptr[i]:self.indptr[i + 1]]

    def neighbor_weights(self, i: int) -> np.ndarray:
        return self.w[self.indptr[i]:self.indptr[i + 1]]

    def neighbors(self, x) -> list[str]:
        return [self.vertices[j] for j in self.neighbor_indices(self.index(x))]

    def adjacency(self, x) -> list[tuple[str, float]]:
        i = self.index(x)
        return [(self.vertices[j], float(w)) for j, w in zip(self.neighbor_indices(i), self.neighbor_weights(i))]

    def degree(self, x) -> int:
        i = self.index(x)
        return int(self.indptr[i + 1] - self.indptr[i])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def weight(self, x, y) -> float:
        i, j = self.index(x), self.index(y)
        nb = self.neighbor_indices(i)
        k = np.searchsorted(nb, j)
        if k < len(nb) and nb[k] == j:
            return float(self.neighbor_weights(i)[k])
        return 0.0

    def is_connected(self) -> bool:
        return bool(np.all(np.isfinite(bfs_distances(self, self.vertices[0]))))

    def func(self, values) -> np.ndarray:
        """Build a vertex function from a mapping, callable, scalar or array."""
        if isinstance(values, Mapping):
            out = np.empty(self.n)
            seen = set()
            for k, val in values.items():
                i = self.index(k)
                out[i] = float(val)
                seen.add(i)
            if len(seen) != self.n:
                missing = [self.vertices[i] for i in range(self.n) if i not in seen]
                raise DomainError(f"vertex function missing values at {missing}")
            return out
        if callable(values):
            return np.array([float(values(v)) for v in self.vertices])
        arr = np.array(values, dtype=float)
        if arr.ndim == 0:
            return np.full(self.n, float(arr))
        if arr.shape[-1] != self.n:
            raise DomainError(f"vertex function has {arr.shape[-1]} values for {self.n} vertices")
        return arr

    def as_dict(self, u) -> dict[str, float]:
        return {v: float(val) for v, val in zip(self.vertices, np.asarray(u))}

    def weight_matrix(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        W[self.src, self.dst] = self.w
        return W

    def laplacian_matrix(self) -> np.ndarray:
        """Dense matrix of the Laplacian, ``(Delta u) = A @ u``."""
        W = self.weight_matrix()
        A = W - np.diag(W.sum(axis=1))
        return A / self.mu[:, None]

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [
                {"u": self.vertices[a], "v": self.vertices[b], "w": float(w)}
                for a, b, w in zip(self.edge_u, self.edge_v, self.edge_w)
            ],
            "mu": {v: float(m) for v, m in zip(self.vertices, self.mu)},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, data: Mapping) -> "WeightedGraph":
        try:
            verts = data["vertices"]
            edges = [(e["u"], e["v"], e.get("w", 1.0)) for e in data.get("edges", [])]
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed graph description: {exc}") from None
        return cls(verts, edges, mu=data.get("mu"))

    @classmethod
    def from_json(cls, text: str) -> "WeightedGraph":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def _at(g: WeightedGraph, arr: np.ndarray, x):
    if x is None:
        return arr
    return float(arr[g.index(x)])


def _as_func(g: WeightedGraph, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (g.n,):
        raise DomainError(f"vertex function has shape {u.shape}, expected ({g.n},)")
    return u


def edge_average(g: WeightedGraph, values: np.ndarray) -> np.ndarray:
    """Return ``(1/mu(x)) sum_y w_xy values[x->y]`` for half-edge values."""
    return np.bincount(g.src, weights=g.w * values, minlength=g.n) / g.mu


def laplacian(g: WeightedGraph, u, x=None):
    """Graph Laplacian ``(1/mu(x)) sum_y w_xy (u(y) - u(x))``."""
    u = _as_func(g, u)
    return _at(g, edge_average(g, u[g.dst] - u[g.src]), x)


def L(g: WeightedGraph, u, x=None):
    """The positive operator ``L = -Delta``."""
    out = -laplacian(g, u)
    return _at(g, out, x)


def gamma(g: WeightedGraph, u, w=None, x=None):
    """Carre du champ ``Gamma(u, w) = (Delta(uw) - u Delta w - w Delta u) / 2``."""
    u = _as_func(g, u)
    w = u if w is None else _as_func(g, w)
    out = 0.5 * (laplacian(g, u * w) - u * laplacian(g, w) - w * laplacian(g, u))
    return _at(g, out, x)


def gamma2(g: WeightedGraph, u, w=None, x=None):
    """Iterated carre du champ ``(Delta Gamma(u,w) - Gamma(u,Delta w) - Gamma(w,Delta u)) / 2``."""
    u = _as_func(g, u)
    w = u if w is None else _as_func(g, w)
    out = 0.5 * (
        laplacian(g, gamma(g, u, w))
        - gamma(g, u, laplacian(g, w))
        - gamma(g, w, laplacian(g, u))
    )
    return _at(g, out, x)


def psi(g: WeightedGraph, H: ScalarField, u, x=None):
    """``Psi_H(u)(x) = (1/mu(x)) sum_y w_xy H(u(y) - u(x))``."""
    u = _as_func(g, u)
    d = u[g.dst] - u[g.src]
    ok = H.contains(d)
    if not np.all(ok):
        k = int(np.flatnonzero(~ok)[0])
        a, b = g.vertices[g.src[k]], g.vertices[g.dst[k]]
        raise DomainError(
            f"edge ({a}, {b}): difference {d[k]:.6g} outside the domain {H.domain} of {H.name}"
        )
    with np.errstate(over="ignore"):
        return _at(g, edge_average(g, H.eval(d)), x)


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

@dataclass
class IdentityReport:
    """Scaled residuals of exact identities; each entry should be roundoff."""

    residuals: dict = field(default_factory=dict)
    tolerance: float = 1e-12

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tolerance


def _lap_mag(g: WeightedGraph, f: np.ndarray) -> np.ndarray:
    return edge_average(g, np.abs(f[g.dst]) + np.abs(f[g.src]))


def _scaled(residual: np.ndarray, *mags) -> float:
    scale = np.maximum(1.0, sum(np.abs(m) for m in mags))
    return float(np.max(np.abs(residual) / scale))


def _fundamental_residual(g, H: ScalarField, u):
    """Residual of ``Delta H(u) = H'(u) Delta u + mean of Bregman terms``."""
    Hu = H.eval(u)
    lap = laplacian(g, Hu)
    dH = H.deriv(u)
    zy, zx = u[g.dst], u[g.src]
    breg = bregman(H, zy, zx)
    rhs = dH * laplacian(g, u) + edge_average(g, breg)
    mag_breg = edge_average(g, np.abs(H.eval(zy)) + np.abs(H.eval(zx)) + np.abs(H.deriv(zx) * (zy - zx)))
    return _scaled(lap - rhs, _lap_mag(g, Hu), dH * _lap_mag(g, u), mag_breg)


def verify_identities(g: WeightedGraph, u, alphas=(0.25, 0.5, 0.75), tolerance: float = 1e-12) -> IdentityReport:
    """Evaluate the exact pointwise identities relating Delta, Gamma and Psi.

    Every residual is divided by ``max(1, magnitude of the terms)`` at the
    vertex, so it measures roundoff relative to the size of the inputs.

    Parameters
    ----------
    g : WeightedGraph
    u : array_like
        Strictly positive vertex function.
    """
    u = _as_func(g, u)
    if not np.all(u > 0):
        raise PreconditionError("verify_identities needs a strictly positive function")
    rep = IdentityReport(tolerance=tolerance)
    res = rep.residuals

    for H in (HALF_SQUARE, SQRT, NEG_LOG):
        res[f"fundamental[{H.name}]"] = _fundamental_residual(g, H, u)

    # Delta(u^2) = 2 u Delta u + 2 Gamma(u), Gamma taken as an explicit edge sum
    du = u[g.dst] - u[g.src]
    gam_sum = 0.5 * edge_average(g, du * du)
    lap_u = laplacian(g, u)
    res["square"] = _scaled(
        laplacian(g, u * u) - 2 * u * lap_u - 2 * gam_sum,
        _lap_mag(g, u * u), 2 * u * _lap_mag(g, u), 2 * gam_sum,
    )

    # 2 sqrt(u) Delta sqrt(u) = Delta u - 2 Gamma(sqrt u), Gamma by polarisation
    r = np.sqrt(u)
    gam_r = gamma(g, r)
    res["square_root"] = _scaled(
        2 * r * laplacian(g, r) - lap_u + 2 * gam_r,
        2 * r * _lap_mag(g, r), _lap_mag(g, u), 2 * (_lap_mag(g, r * r) + 2 * r * _lap_mag(g, r)),
    )

    # Delta u / u = Delta log u + Psi_Upsilon(log u)
    v = np.log(u)
    dv = v[g.dst] - v[g.src]
    psi_ups = psi(g, UPSILON, v)
    res["log"] = _scaled(
        lap_u / u - laplacian(g, v) - psi_ups,
        _lap_mag(g, u) / u, _lap_mag(g, v), psi_ups,
    )

    exp_mag = edge_average(g, np.exp(dv) + 1.0)
    for a in alphas:
        ua = u**a
        lhs = laplacian(g, ua) / (a * ua)
        ups_a = psi(g, upsilon_alpha_field(a), v)
        mid = laplacian(g, v) + ups_a / a
        rhs = psi(g, UPSILON_PRIME, a * v) / a
        mag = _lap_mag(g, ua) / (a * ua) + _lap_mag(g, v) + ups_a / a + edge_average(g, np.exp(a * dv) + 1.0) / a
        res[f"power[{a:g}]"] = max(_scaled(lhs - mid, mag), _scaled(lhs - rhs, mag))

    # Psi_Upsilon(log u) - 2 Psi_{Upsilon_1/2}(log u) = 2 Gamma(sqrt u) / u
    half = psi(g, upsilon_alpha_field(0.5), v)
    res["half_power"] = _scaled(
        psi_ups - 2 * half - 2 * gam_r / u,
        psi_ups, 2 * half, 2 * (_lap_mag(g, r * r) + 2 * r * _lap_mag(g, r)) / u, exp_mag,
    )
    return rep


# ---------------------------------------------------------------------------
# distances
# ---------------------------------------------------------------------------

def bfs_distances(g: WeightedGraph, x) -> np.ndarray:
    """Edge-count distances from ``x``; unreachable vertices get ``inf``."""
    s = g.index(x)
    dist = np.full(g.n, np.inf)
    dist[s] = 0
    queue = deque([s])
    while queue:
        i = queue.popleft()
        for j in g.neighbor_indices(i):
            if dist[j] == np.inf:
                dist[j] = dist[i] + 1
                queue.append(j)
    return dist


def graph_distance(g: WeightedGraph, x, y):
    """Shortest-path length in edges, or ``math.inf`` if disconnected."""
    d = bfs_distances(g, x)[g.index(y)]
    return int(d) if math.isfinite(d) else math.inf


def ball(g: WeightedGraph, x, radius: int) -> np.ndarray:
    """Indices of vertices within ``radius`` edges of ``x``, in index order."""
    return np.flatnonzero(bfs_distances(g, x) <= radius)
