"""Relaxation functions ``phi = G^{-1}`` with ``G(x) = int_x^inf dr / F(r)``.

``phi`` solves ``phi' + F(phi) = 0`` on ``(0, inf)`` with ``phi(0+) = inf``.
Without a closed form, ``G`` is tabulated on the geometric nodes
``x_k = 2^(k/m)`` and inverted by a bracketed root search inside one cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .cdfunc import STANDARD_GRID, CDFunction, make_cd
from .errors import AccuracyError, DomainError, PreconditionError

_GL_LO = np.polynomial.legendre.leggauss(10)
_GL_HI = np.polynomial.legendre.leggauss(20)

# nodes below 2^(-MIN_EXPONENT) are treated as underflow, phi = 0 there
MIN_EXPONENT = 1000


class RelaxationFunction:
    """Evaluate ``G`` and ``phi = G^{-1}`` for a CD-function.

    Parameters
    ----------
    F : CDFunction or str
    use_closed : bool
        Use the catalog's closed forms when present.  ``False`` forces the
        numerical route, which is how the two are cross-checked.
    require_cd : bool
        Refuse entries not flagged as CD-functions.  ``phi`` is still well
        defined whenever ``F > 0`` on ``(0, inf)`` with ``G(0+) = inf`` and
        ``G(inf) = 0``; pass ``False`` to allow such ``F``.
    nodes_per_octave : int
        Table resolution ``m``.
    """

    def __init__(self, F, use_closed: bool = True, require_cd: bool = True, nodes_per_octave: int = 8):
        if isinstance(F, str):
            F = make_cd(F)
        if require_cd and not F.is_cd:
            raise PreconditionError(f"{F} is not flagged as a CD-function")
        if not F.integrable:
            raise PreconditionError(f"1/F is not integrable at infinity for {F}")
        vals = F(STANDARD_GRID)
        if not np.all(vals > 0):
            raise PreconditionError(f"{F} is not positive on (0, inf)")
        self.F = F
        self.closed_tail = F.closed_tail if use_closed else None
        self.closed_phi = F.closed_phi if use_closed else None
        self.m = int(nodes_per_octave)
        self._k0 = 0
        self._G = np.empty(0)
        if self.closed_tail is None or self.closed_phi is None:
            self._build(-8 * self.m, 8 * self.m)

    def __repr__(self) -> str:
        return f"RelaxationFunction({self.F})"

    # -- quadrature --------------------------------------------------------

    def _gl(self, a, b, rule):
        x, w = rule
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        with np.errstate(over="ignore", divide="ignore"):
            vals = 1.0 / self.F(mid + half * x)
        return half * float(np.dot(w, vals))

    def segment(self, a: float, b: float, depth: int = 0, tol: float | None = None) -> float:
        """``int_a^b dr / F(r)`` by adaptive Gauss-Legendre (orders 10 and 20).

        Subintervals are accepted once their error estimate is below ``1e-14``
        of the whole segment, so kinks of ``F`` (e.g. from ``min``) only cost
        a few extra levels.
        """
        lo = self._gl(a, b, _GL_LO)
        hi = self._gl(a, b, _GL_HI)
        if not math.isfinite(hi):
            raise AccuracyError(f"1/F is not finite on [{a:.6g}, {b:.6g}]")
        if tol is None:
            tol = 1e-14 * abs(hi)
        gap = abs(hi - lo)
        if gap <= max(tol, 1e-14 * abs(hi)) or depth >= 40:
            if depth >= 40 and gap > 1e4 * tol:
                raise AccuracyError(f"quadrature on [{a:.6g}, {b:.6g}] did not converge (gap {gap:.3g})")
            return hi
        mid = 0.5 * (a + b)
        return self.segment(a, mid, depth + 1, tol) + self.segment(mid, b, depth + 1, tol)

    def _node(self, k):
        return 2.0 ** (k / self.m)

    def _seg_k(self, k):
        return self.segment(self._node(k), self._node(k + 1))

    def _tail_from(self, k: int) -> float:
        """``G(x_k)`` by upward summation with geometric extrapolation of the rest.

        Segments shrink at least geometrically once ``F(r)/r`` increases; the
        remainder after a segment ``s`` with ratio ``rho`` is estimated by
        ``s rho / (1 - rho)`` and summation stops once that is below ``1e-14``
        of the accumulated value.
        """
        total, prev = 0.0, None
        for j in range(k, k + 200000):
            x = self._node(j)
            if not math.isfinite(float(self.F(x))):
                return total
            s = self._seg_k(j)
            total += s
            if s == 0.0:
                return total
            if prev:
                rho = s / prev
                if rho < 1.0:
                    rem = s * rho / (1.0 - rho)
                    if rem <= 1e-14 * total:
                        return total + rem
            prev = s
        raise AccuracyError(f"tail integral of 1/F from {self._node(k):.6g} did not converge")

    def _build(self, k_lo: int, k_hi: int) -> None:
        n = k_hi - k_lo + 1
        G = np.empty(n)
        G[-1] = self._tail_from(k_hi)
        for i in range(n - 2, -1, -1):
            G[i] = G[i + 1] + self._seg_k(k_lo + i)
        self._k0, self._G = k_lo, G

    def _extend_down(self, k_lo: int) -> None:
        extra = self._k0 - k_lo
        if extra <= 0:
            return
        G = np.empty(extra)
        nxt = self._G[0]
        for i in range(extra - 1, -1, -1):
            nxt = nxt + self._seg_k(k_lo + i)
            G[i] = nxt
        self._G = np.concatenate([G, self._G])
        self._k0 = k_lo

    def _extend_up(self, k_hi: int) -> None:
        top = self._k0 + len(self._G) - 1
        extra = k_hi - top
        if extra <= 0:
            return
        G = np.empty(extra)
        G[-1] = self._tail_from(k_hi)
        for i in range(extra - 2, -1, -1):
            G[i] = G[i + 1] + self._seg_k(top + 1 + i)
        self._G = np.concatenate([self._G, G])

    @property
    def table(self) -> tuple[np.ndarray, np.ndarray]:
        """Current ``(x, G(x))`` cache."""
        k = self._k0 + np.arange(len(self._G))
        return self._node(k), self._G.copy()

    # -- G and phi ---------------------------------------------------------

    def _G_scalar(self, x: float) -> float:
        if not x > 0:
            raise DomainError(f"G needs x > 0, got {x}")
        if self.closed_tail is not None:
            return float(self.closed_tail(x))
        k = math.floor(self.m * math.log2(x))
        if k < self._k0:
            self._extend_down(k - self.m)
        top = self._k0 + len(self._G) - 1
        if k + 1 > top:
            self._extend_up(k + 1 + self.m)
        nxt = self._G[k + 1 - self._k0]
        xk1 = self._node(k + 1)
        return nxt + (self.segment(x, xk1) if x < xk1 else 0.0)

    def G(self, x):
        """Tail integral ``int_x^inf dr / F(r)``."""
        x = np.asarray(x, dtype=float)
        out = np.array([self._G_scalar(v) for v in x.ravel()]).reshape(x.shape)
        return out[()] if out.ndim == 0 else out

    def _phi_scalar(self, t: float) -> float:
        if not t > 0:
            raise DomainError(f"phi needs t > 0, got {t}")
        if self.closed_phi is not None:
            return float(self.closed_phi(t))
        while t > self._G[0]:
            if self._k0 <= -MIN_EXPONENT * self.m:
                return 0.0
            self._extend_down(self._k0 - 8 * self.m)
        while t < self._G[-1]:
            top = self._k0 + len(self._G) - 1
            if top >= 1020 * self.m:
                raise AccuracyError(f"phi({t:.3g}) exceeds the floating point range")
            self._extend_up(top + 8 * self.m)
        # G decreases along the table: find G[i] >= t >= G[i+1]
        i = int(np.searchsorted(-self._G, -t, side="right")) - 1
        i = min(max(i, 0), len(self._G) - 2)
        k = self._k0 + i
        a, b = self._node(k), self._node(k + 1)
        Gb = self._G[i + 1]
        if t == Gb:
            return b
        f = lambda x: Gb + self.segment(x, b) - t
        return optimize.brentq(f, a, b, xtol=1e-300, rtol=1e-14, maxiter=200)

    def __call__(self, t):
        """``phi(t) = G^{-1}(t)``."""
        t = np.asarray(t, dtype=float)
        out = np.array([self._phi_scalar(v) for v in t.ravel()]).reshape(t.shape)
        return out[()] if out.ndim == 0 else out

    phi = __call__

    def integral(self, t1: float, t2: float) -> float:
        """``int_{t1}^{t2} phi(t) dt``; ``t1 = 0`` is allowed when ``phi`` is integrable there.

        Near zero the range is split geometrically; the piece below
        ``t2 2^-59`` is bounded by ``t phi(t)``, negligible for logarithmic
        singularities.
        """
        from scipy import integrate

        if not 0 <= t1 <= t2:
            raise DomainError("need 0 <= t1 <= t2")
        if t1 == t2:
            return 0.0
        if t1 > 0:
            val, _ = integrate.quad(self.__call__, t1, t2, epsabs=0, epsrel=1e-11, limit=200)
            return float(val)
        edges = [t2 * 2.0 ** (-k) for k in range(60)][::-1]
        total = edges[0] * float(self(edges[0]))
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(self.__call__, a, b, epsabs=0, epsrel=1e-11, limit=100)
            total += val
        return float(total)


def relaxation(spec, **kw) -> RelaxationFunction:
    return RelaxationFunction(spec, **kw)


def tail_integral(F, x):
    """``G(x) = int_x^inf dr / F(r)``."""
    return RelaxationFunction(F).G(x)


def phi(F, t):
    """Relaxation function ``phi(t)`` of ``F``."""
    return RelaxationFunction(F)(t)


def ode_residual(R: RelaxationFunction, t_grid) -> np.ndarray:
    """Relative residual ``|phi'(t) + F(phi(t))| / F(phi(t))`` on a grid.

    The derivative is a Richardson-extrapolated central difference whose step
    is a thousandth of the local time scale ``min(t, phi / F(phi))``.
    """
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise DomainError("t_grid must be positive")
    p = R(t)
    Fp = R.F(p)
    h = 1e-3 * np.minimum(t, p / Fp)
    d1 = (R(t + h) - R(t - h)) / (2 * h)
    d2 = (R(t + h / 2) - R(t - h / 2)) / h
    deriv = (4 * d2 - d1) / 3
    return np.abs(deriv + Fp) / Fp


def scaled_phi(R: RelaxationFunction, tau: float, t):
    """``phi_tau(t) = phi(t / tau) / tau``, the relaxation function of ``F(tau r)/tau^2``."""
    tau = float(tau)
    if not tau > 0:
        raise DomainError("tau must be positive")
    return R(np.asarray(t, dtype=float) / tau) / tau


@dataclass
class AsymptoticsReport:
    spec: str
    small_t: dict = field(default_factory=dict)
    large_t: dict = field(default_factory=dict)
    decay_rate: float | None = None
    passed: bool | None = None
    notes: list = field(default_factory=list)


SMALL_T = (1e-4, 1e-5, 1e-6)
LARGE_T = (1e2, 1e3, 1e4)


def asymptotics_report(R: RelaxationFunction, nu: float | None = None, gamma: float | None = None) -> AsymptoticsReport:
    """Compare ``phi`` with its logarithmic and ``1/(nu t)`` asymptotics.

    Reports ``phi(t) / (-(1/gamma) log t)`` at small ``t`` and ``t nu phi(t)``
    at large ``t``; each final ratio must be within ten percent of one.  When
    ``nu`` is missing (``F`` linear at zero) the large-time exponential decay
    rate is reported instead, without a verdict.
    """
    F = R.F
    nu = F.nu if nu is None else nu
    gamma = F.gamma if gamma is None else gamma
    rep = AsymptoticsReport(spec=str(F))
    ok = []
    if gamma is not None:
        for t in SMALL_T:
            rep.small_t[t] = float(R(t) / (-math.log(t) / gamma))
        ok.append(abs(rep.small_t[SMALL_T[-1]] - 1.0) <= 0.1)
    else:
        rep.notes.append("no exponential rate supplied; small-t check skipped")
    if nu is not None:
        for t in LARGE_T:
            rep.large_t[t] = float(t * nu * R(t))
        ok.append(abs(rep.large_t[LARGE_T[-1]] - 1.0) <= 0.1)
    else:
        t1, t2 = 5.0, 10.0
        p1, p2 = float(R(t1)), float(R(t2))
        rep.decay_rate = math.log(p1 / p2) / (t2 - t1)
        rep.notes.append("F is linear at 0, so phi decays exponentially; rate reported without verdict")
    rep.passed = all(ok) if ok else None
    return rep


def tau_relaxation(tau: float, reading: str = "tau2", d: int = 1):
    """Relaxation function of the lattice with spacing ``tau`` under either measure reading.

    ``"tau2"`` uses the lattice measure ``tau^2`` and gives ``phi(t/tau^2)/tau^2``;
    ``"tau"`` gives ``phi(t/tau)/tau``.  Here ``phi`` belongs to the unit
    lattice.  Both tend to ``1/(2t)`` as ``tau -> 0`` in dimension one.
    """
    from .cdfunc import ricci_flat

    tau = float(tau)
    if not tau > 0:
        raise DomainError("tau must be positive")
    if reading not in ("tau", "tau2"):
        raise DomainError("reading must be 'tau' or 'tau2'")
    base = RelaxationFunction(ricci_flat(2 * d, 1.0))
    s = tau * tau if reading == "tau2" else tau
    return lambda t: scaled_phi(base, s, t)
