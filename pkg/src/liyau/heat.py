"""Positive solutions of the heat equation ``du/dt = Delta u`` on finite graphs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, sparse

from .errors import AccuracyError, DomainError, PreconditionError
from .graph import UPSILON, UPSILON_PRIME, WeightedGraph, laplacian, psi
from .presets import z_ball


@dataclass(frozen=True)
class HeatTrajectory:
    """Samples ``U[i] = u(t[i], .)`` of one solution."""

    graph: WeightedGraph
    t: np.ndarray
    U: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t.setflags(write=False)
        self.U.setflags(write=False)

    def at(self, i: int) -> np.ndarray:
        return self.U[i]

    def mass(self) -> np.ndarray:
        """``sum_x mu(x) u(t, x)`` at every sample."""
        return self.U @ self.graph.mu

    def restrict(self, idx) -> np.ndarray:
        return self.U[:, np.asarray(idx)]

    def log(self) -> np.ndarray:
        if np.any(self.U <= 0):
            raise DomainError("trajectory has non-positive samples; log u is undefined")
        return np.log(self.U)


def _check_u0(g: WeightedGraph, u0) -> np.ndarray:
    if isinstance(u0, dict):
        u0 = g.func(u0)
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (g.n,):
        raise DomainError(f"u0 has shape {u0.shape}, expected ({g.n},)")
    if not np.all(u0 > 0):
        raise PreconditionError("u0 must be strictly positive")
    return u0


def _check_times(t_grid) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise DomainError("time grid must be nonnegative and nondecreasing")
    return t


class SpectralSolver:
    """Eigendecomposition of ``Delta`` made symmetric by conjugation with ``diag(sqrt(mu))``.

    The decomposition is computed once and reused for any number of initial
    conditions.
    """

    def __init__(self, g: WeightedGraph):
        W = g.weight_matrix()
        if not np.allclose(W, W.T, rtol=0, atol=0):
            raise PreconditionError("weights are not symmetric")
        s = np.sqrt(g.mu)
        S = (W - np.diag(W.sum(axis=1))) / np.outer(s, s)
        try:
            lam, Q = linalg.eigh(S)
        except linalg.LinAlgError as exc:
            raise AccuracyError(f"eigensolver failed: {exc}") from None
        self.g = g
        self.lam = np.minimum(lam, 0.0)
        self.Q = Q
        self.s = s

    def __call__(self, u0, t_grid) -> HeatTrajectory:
        u0 = _check_u0(self.g, u0)
        t = _check_times(t_grid)
        c = self.Q.T @ (self.s * u0)
        U = (np.exp(np.outer(t, self.lam)) * c) @ self.Q.T / self.s
        if np.any(U <= 0):
            raise AccuracyError("spectral solution lost positivity to roundoff")
        return HeatTrajectory(self.g, t, U, {"method": "spectral"})


def solve_spectral(g: WeightedGraph, u0, t_grid) -> HeatTrajectory:
    """``u(t) = exp(t Delta) u0`` evaluated exactly per eigenmode."""
    return SpectralSolver(g)(u0, t_grid)


def solve_rk(g: WeightedGraph, u0, t_grid, tol: float = 1e-12) -> HeatTrajectory:
    """Adaptive embedded Runge-Kutta (Dormand-Prince 8(5,3)) on the linear system."""
    u0 = _check_u0(g, u0)
    t = _check_times(t_grid)
    A = g.laplacian_matrix()
    if t[-1] == 0:
        return HeatTrajectory(g, t, np.tile(u0, (t.size, 1)), {"method": "rk", "tol": tol})
    sol = integrate.solve_ivp(lambda _, y: A @ y, (0.0, t[-1]), u0, method="DOP853", t_eval=t,
                              rtol=tol, atol=tol * float(np.min(u0)))
    if not sol.success:
        raise AccuracyError(f"integrator failed: {sol.message}")
    return HeatTrajectory(g, t, sol.y.T.copy(), {"method": "rk", "tol": tol})


class UniformizedSolver:
    """``exp(t Delta)`` as a Poisson mixture of powers of ``P = I + Delta / q``.

    ``P`` is entrywise nonnegative when ``q`` bounds the diagonal of
    ``-Delta``, so every term of the series is nonnegative and each entry of
    ``u(t)`` carries a small relative error even where ``u`` is tiny.  Long
    times are split into substeps with ``q h <= 32``.
    """

    MAX_QH = 32.0

    def __init__(self, g: WeightedGraph):
        A = sparse.csr_matrix(g.laplacian_matrix())
        self.q = float(np.max(-A.diagonal())) or 1.0
        self.P = (sparse.identity(g.n, format="csr") + A / self.q).tocsr()
        if self.P.nnz and self.P.data.min() < 0:
            raise PreconditionError("uniformized matrix has negative entries")
        self.g = g

    def _step(self, u: np.ndarray, h: float) -> np.ndarray:
        lam = self.q * h
        if lam == 0:
            return u
        # Poisson weights, stopping once the remaining mass is negligible
        w = math.exp(-lam)
        acc = w * u
        term = u
        k, mass = 0, w
        while 1.0 - mass > 1e-17 or k < lam:
            k += 1
            term = self.P @ term
            w *= lam / k
            acc = acc + w * term
            mass += w
            if k > lam + 40 * math.sqrt(lam) + 50:
                break
        return acc

    def advance(self, u: np.ndarray, dt: float) -> np.ndarray:
        n = max(1, math.ceil(self.q * dt / self.MAX_QH))
        for _ in range(n):
            u = self._step(u, dt / n)
        return u

    def __call__(self, u0, t_grid) -> HeatTrajectory:
        u0 = _check_u0(self.g, u0)
        t = _check_times(t_grid)
        U = np.empty((t.size, self.g.n))
        u, now = u0, 0.0
        for i, ti in enumerate(t):
            u = self.advance(u, ti - now)
            now = ti
            U[i] = u
        return HeatTrajectory(self.g, t, U, {"method": "uniformized"})


def solve_uniformized(g: WeightedGraph, u0, t_grid) -> HeatTrajectory:
    """Entrywise accurate ``exp(t Delta) u0`` by uniformization."""
    return UniformizedSolver(g)(u0, t_grid)


# ---------------------------------------------------------------------------
# log-substitution equations
# ---------------------------------------------------------------------------

def time_derivative(t: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Three-point derivative along axis 0 on a nonuniform grid (interior samples only)."""
    h0 = (t[1:-1] - t[:-2])[:, None]
    h1 = (t[2:] - t[1:-1])[:, None]
    return (-h1 / (h0 * (h0 + h1)) * Y[:-2] + (h1 - h0) / (h0 * h1) * Y[1:-1]
            + h0 / (h1 * (h0 + h1)) * Y[2:])


@dataclass
class LogEquationReport:
    first_order: float
    rewritten: float
    differentiated: float

    @property
    def max_residual(self) -> float:
        return max(self.first_order, self.rewritten, self.differentiated)


def log_equation_residual(traj: HeatTrajectory) -> LogEquationReport:
    """Residuals of the equations satisfied by ``v = log u``.

    ``dv/dt = Psi_{Y'}(v)``, ``dv/dt - Delta v = Psi_Y(v)`` and
    ``d(Delta v)/dt = Delta Psi_{Y'}(v)``, at interior time samples, each as a
    maximum absolute residual.
    """
    g = traj.graph
    V = traj.log()
    if V.shape[0] < 3:
        raise DomainError("need at least three time samples")
    dV = time_derivative(traj.t, V)
    Vi = V[1:-1]
    P1 = np.array([psi(g, UPSILON_PRIME, v) for v in Vi])
    P0 = np.array([psi(g, UPSILON, v) for v in Vi])
    LapV = np.array([laplacian(g, v) for v in V])
    dLap = time_derivative(traj.t, LapV)
    LapP1 = np.array([laplacian(g, p) for p in P1])
    return LogEquationReport(
        float(np.max(np.abs(dV - P1))),
        float(np.max(np.abs(dV - LapV[1:-1] - P0))),
        float(np.max(np.abs(dLap - LapP1))),
    )


def refined_grid(t_max: float, n: int = 2000, t_min: float = 1e-3) -> np.ndarray:
    """Geometric grid on ``[t_min, t_max]``, dense near zero."""
    return np.geomspace(t_min, t_max, n)


# ---------------------------------------------------------------------------
# solutions on lattice balls
# ---------------------------------------------------------------------------

@dataclass
class BallSolution:
    trajectory: HeatTrajectory
    """Solution on the ``2r``-ball (the restriction of the padded evolution)."""
    pad: int
    influence: float
    """Largest difference on the ``2r``-ball between pads ``pad`` and ``2 pad``."""
    full: HeatTrajectory


def _lattice_u0(g: WeightedGraph, u0, fill: float) -> np.ndarray:
    coords = g.meta["coords"]
    if callable(u0):
        return np.array([float(u0(tuple(c))) for c in coords])
    if isinstance(u0, dict):
        return np.array([float(u0.get(tuple(c), fill)) for c in coords])
    raise DomainError("u0 must be a callable on lattice points or a dict {point: value}")


def solve_on_ball(d: int, r: int, u0, t_grid, pad: int = 20, fill: float = 1.0, tol: float = 1e-12,
                  max_pad: int = 640, mu0: float = 1.0) -> BallSolution:
    """Evolve on ``B_{2r+pad}`` and restrict to ``B_{2r}``.

    The truncated graph reproduces the lattice Laplacian at every vertex of
    ``B_{2r+pad-1}``, so the heat equation holds exactly on ``B_{2r}``.  The
    pad is doubled until the result on ``B_{2r}`` changes by at most ``tol``
    relative to its maximum at each time, measuring how far the truncation sits from the
    infinite-lattice solution with the same data.

    ``u0`` is a callable on integer tuples or a dict keyed by them; points
    missing from the dict take the value ``fill``.
    """
    t = _check_times(t_grid)

    def run(p):
        pre = z_ball(d, 2 * r + p, mu0)
        g = pre.graph
        traj = solve_spectral(g, _lattice_u0(g, u0, fill), t)
        inner = np.flatnonzero(g.meta["l1"] <= 2 * r)
        return g, traj, inner

    p = int(pad)
    g, traj, inner = run(p)
    while True:
        g2, traj2, inner2 = run(2 * p)
        # both balls list lattice points in the same lexicographic order
        a, b = traj.restrict(inner), traj2.restrict(inner2)
        influence = float(np.max(np.abs(a - b) / np.max(np.abs(b), axis=1, keepdims=True)))
        if influence <= tol:
            break
        if 2 * p > max_pad:
            raise AccuracyError(f"boundary influence {influence:.3g} exceeds {tol:g} with pad {2 * p}")
        p, g, traj, inner = 2 * p, g2, traj2, inner2
    sub = _ball_graph(d, r, mu0)
    out = HeatTrajectory(sub, t, traj.restrict(inner).copy(), {"method": "spectral-padded", "pad": p})
    return BallSolution(out, p, influence, traj)


def _ball_graph(d: int, r: int, mu0: float) -> WeightedGraph:
    return z_ball(d, 2 * r, mu0).graph


def two_point_closed_form(u10: float, u20: float, t) -> np.ndarray:
    """Closed-form solution on two vertices joined by a unit edge, unit measure."""
    t = np.asarray(t, dtype=float)
    a, b = 0.5 * (u10 - u20), 0.5 * (u10 + u20)
    e = np.exp(-2 * t)
    return np.stack([b + a * e, b - a * e], axis=-1)
