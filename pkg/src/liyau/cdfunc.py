"""CD-functions: catalog, verification, combinators and auxiliary constants.

A CD-function is a continuous ``F: [0, inf) -> [0, inf)`` with ``F(0) = 0``,
``F(x)/x`` strictly increasing and ``1/F`` integrable at infinity.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ConsistencyError, DomainError, PreconditionError
from .graph import upsilon

# validation grid for the monotonicity of F(x)/x
STANDARD_GRID = np.unique(np.concatenate([10.0 ** np.arange(-6, 3), np.linspace(0.01, 50, 500)]))


@dataclass(frozen=True)
class CDFunction:
    """Vectorised evaluator with metadata.

    Attributes
    ----------
    name, params
        Catalog entry and its parameters; ``spec`` reproduces the text form.
    fn
        Vectorised implementation; ``F(0)`` must be exactly ``0``.
    closed_tail, closed_phi
        Optional closed forms of ``G(x) = int_x^inf dr / F(r)`` and its inverse.
    is_cd
        Analytic flag: whether the entry is a CD-function.
    integrable
        Analytic flag: whether ``1/F`` is integrable at infinity.
    convex_from
        ``a*`` such that ``F(x)/x`` is convex on ``[a*, inf)``, if known.
    nu
        Coefficient of ``F(r) ~ nu r^2`` at zero, if quadratic there.
    gamma, c
        ``F(r) ~ c e^{gamma r}`` at infinity, if exponential there.
    """

    name: str
    fn: Callable
    params: dict = field(default_factory=dict)
    spec: str = ""
    closed_tail: Callable | None = None
    closed_phi: Callable | None = None
    is_cd: bool = True
    integrable: bool = True
    convex_from: float | None = None
    nu: float | None = None
    gamma: float | None = None
    c: float | None = None
    note: str = ""

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = self.fn(x)
        out = np.where(x == 0.0, 0.0, out)
        return out[()] if np.ndim(out) == 0 else out

    def __str__(self) -> str:
        return self.spec or self.name


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

def _fmt(params: dict) -> str:
    return ",".join(f"{k}={v:g}" if isinstance(v, (int, float)) else f"{k}={v}" for k, v in params.items())


def two_sinh_tail(x):
    """``int_x^inf dr / (2 sinh r) = -log(tanh(x/2)) / 2``."""
    return -0.5 * np.log(np.tanh(0.5 * np.asarray(x, dtype=float)))


def two_sinh_phi(t):
    """Inverse of :func:`two_sinh_tail`, ``-log tanh t``."""
    t = np.asarray(t, dtype=float)
    q = np.exp(-2.0 * t)
    # -log tanh t = log1p(2q / (1 - q)), with 1 - q from expm1 so tiny t stays finite
    return np.log1p(2.0 * q / -np.expm1(-2.0 * t))


def two_point() -> CDFunction:
    return CDFunction(
        "two_point", lambda a: 2.0 * np.sinh(a), {}, "two_point",
        closed_tail=two_sinh_tail, closed_phi=two_sinh_phi, gamma=1.0, c=1.0,
        note="2 sinh a",
    )


def quadratic(c: float = 1.0) -> CDFunction:
    c = _positive(c, "c")
    return CDFunction(
        "quadratic", lambda x: c * x * x, {"c": c}, f"quadratic(c={c:g})",
        closed_tail=lambda x: 1.0 / (c * np.asarray(x, dtype=float)),
        closed_phi=lambda t: 1.0 / (c * np.asarray(t, dtype=float)),
        convex_from=0.0, nu=c, note="c x^2",
    )


def power(c: float = 1.0, p: float = 2.0) -> CDFunction:
    c = _positive(c, "c")
    p = float(p)
    if not p > 1:
        raise DomainError("power needs p > 1 for integrability")
    return CDFunction(
        "power", lambda x: c * x**p, {"c": c, "p": p}, f"power(c={c:g},p={p:g})",
        closed_tail=lambda x: np.asarray(x, dtype=float) ** (1 - p) / (c * (p - 1)),
        closed_phi=lambda t: (c * (p - 1) * np.asarray(t, dtype=float)) ** (-1.0 / (p - 1)),
        convex_from=0.0 if p >= 2 else None, nu=c if p == 2 else None, note="c x^p",
    )


def path3_endpoint() -> CDFunction:
    return CDFunction(
        "path3", lambda a: 0.5 * np.exp(a) * np.square(np.expm1(-2.0 * a)), {}, "path3",
        nu=2.0, gamma=1.0, c=0.5, note="(1/2) e^{-a} (e^a - e^{-a})^2",
    )


def triangle_raw() -> CDFunction:
    return CDFunction(
        "triangle_raw", lambda a: 2.0 * (np.exp(a / 2) + 1.0 - 2.0 * np.exp(-a / 2)), {}, "triangle_raw",
        is_cd=False, gamma=0.5, c=2.0,
        note="2(e^{a/2} + 1 - 2e^{-a/2}); F(x)/x decreases near 0",
    )


def triangle() -> CDFunction:
    base = two_point()
    return CDFunction(
        "triangle", lambda a: 4.0 * np.sinh(a / 2), {}, "triangle",
        closed_tail=lambda x: base.closed_tail(0.5 * np.asarray(x, dtype=float)),
        closed_phi=lambda t: 2.0 * base.closed_phi(t),
        gamma=0.5, c=2.0, note="4 sinh(a/2), a CD minorant of the raw triangle function",
    )


def complete(D: int, mu0: float = 1.0, alpha: float = 0.0) -> CDFunction:
    """Lower bound for complete graphs on ``D + 1`` vertices, ``alpha in [0, 1/2]``."""
    D = _int(D, "D", 1)
    mu0 = _positive(mu0, "mu0")
    alpha = float(alpha)
    if not 0.0 <= alpha <= 0.5:
        raise DomainError("complete needs alpha in [0, 1/2]")
    k = mu0 / D

    def fn(a):
        s = k * a
        return (D / mu0**2) * np.exp(-alpha * s) * np.expm1(s) * (D * np.exp(-s) + 1.0)

    params = {"D": D, "mu0": mu0, "alpha": alpha}
    is_cd = D == 1 and alpha == 0.0
    return CDFunction(
        "complete", fn, params, f"complete({_fmt(params)})",
        closed_tail=two_sinh_tail if is_cd and mu0 == 1.0 else None,
        closed_phi=two_sinh_phi if is_cd and mu0 == 1.0 else None,
        is_cd=is_cd, gamma=(1 - alpha) * k, c=D / mu0**2,
        note="(D/mu0^2) e^{-alpha mu0 a/D} (e^{mu0 a/D} - 1)(D e^{-mu0 a/D} + 1)",
    )


def convexity_onset(fn: Callable, hi: float = 64.0, n: int = 32001, hi_max: float = 1e4) -> float:
    """Smallest grid point beyond which ``x -> fn(x)/x`` is convex.

    Second differences of ``fn(x)/x`` are sampled on a uniform grid over
    ``(0, hi]``; the result is the grid point after the last negative one
    plus one grid step.  ``hi`` doubles while the last sample is still
    concave.
    """
    while True:
        x = np.linspace(hi / (n - 1), hi, n)
        with np.errstate(over="ignore", invalid="ignore"):
            H = fn(x) / x
        d2 = H[2:] - 2 * H[1:-1] + H[:-2]
        neg = np.flatnonzero(d2 < 0)
        if neg.size == 0:
            return 0.0
        k = int(neg[-1]) + 1
        if k < n - 3 or hi >= hi_max:
            return float(x[min(k + 2, n - 1)])
        hi *= 2


def lambda_family(lam: float) -> CDFunction:
    """Strictly convex family; ``convex_from`` is located numerically."""
    lam = _unit(lam, "lam")
    beta = 0.5 * (1 - lam)

    def fn(x):
        # lam e^{(1-lam)x} + (1-lam) e^{-lam x} - 1 rewritten through Upsilon
        return np.exp(-beta * x) * (lam * upsilon((1 - lam) * x) + (1 - lam) * upsilon(-lam * x))

    return CDFunction(
        "lambda_family", fn, {"lam": lam}, f"lambda_family(lam={lam:g})",
        convex_from=convexity_onset(fn), nu=0.5 * lam * (1 - lam), gamma=beta, c=lam,
        note="e^{-(1-lam)x/2}(lam e^{(1-lam)x} + (1-lam) e^{-lam x} - 1)",
    )


def ricci_flat(D: int, mu0: float = 1.0) -> CDFunction:
    """CD-function of a ``D``-regular Ricci-flat graph with constant measure ``mu0``."""
    D = _int(D, "D", 2)
    mu0 = _positive(mu0, "mu0")
    k = mu0 / D

    def fn(a):
        return (D / mu0**2) * np.exp(-k * a) * (upsilon(2 * k * a) + (D - 1) * upsilon(-2 * k * a / (D - 1)))

    # F(a) depends on a only through mu0 a / D, so the onset scales with D / mu0
    unit = lambda s: np.exp(-s) * (upsilon(2 * s) + (D - 1) * upsilon(-2 * s / (D - 1)))
    params = {"D": D, "mu0": mu0}
    return CDFunction(
        "ricci_flat", fn, params, f"ricci_flat({_fmt(params)})",
        convex_from=convexity_onset(unit) / k, nu=2.0 / (D - 1), gamma=k, c=D / mu0**2,
        note="(D/mu0^2) e^{-mu0 a/D} [Y(2 mu0 a/D) + (D-1) Y(-2 mu0 a/(D(D-1)))]",
    )


def ricci_flat_alpha(D: int, mu0: float = 1.0, alpha: float = 0.5) -> CDFunction:
    D = _int(D, "D", 2)
    mu0 = _positive(mu0, "mu0")
    alpha = _unit(alpha, "alpha")
    k = mu0 / D

    def fn(a):
        s = k * a
        # e^{2(1-alpha)s} + ((1-alpha)/alpha) e^{-2 alpha s} - 1/alpha via Upsilon
        bracket = upsilon(2 * (1 - alpha) * s) + (1 - alpha) / alpha * upsilon(-2 * alpha * s)
        return (D / mu0**2) * np.exp(-(1 - alpha) * s) * bracket

    unit = lambda s: np.exp(-(1 - alpha) * s) * (upsilon(2 * (1 - alpha) * s)
                                                 + (1 - alpha) / alpha * upsilon(-2 * alpha * s))
    params = {"D": D, "mu0": mu0, "alpha": alpha}
    return CDFunction(
        "ricci_flat_alpha", fn, params, f"ricci_flat_alpha({_fmt(params)})",
        convex_from=convexity_onset(unit) / k, nu=2.0 * (1 - alpha) / D, gamma=(1 - alpha) * k, c=D / mu0**2,
        note="(D/mu0^2) e^{-mu0(1-alpha)a/D}[e^{2(1-alpha)mu0 a/D} + ((1-alpha)/alpha) e^{-2 alpha mu0 a/D} - 1/alpha]",
    )


def tau_lattice(d: int, tau: float) -> CDFunction:
    """CD-function of the lattice with spacing ``tau``: Ricci-flat with ``D = 2d``, ``mu0 = tau^2``."""
    d = _int(d, "d", 1)
    tau = _positive(tau, "tau")
    base = ricci_flat(2 * d, tau * tau)
    params = {"d": d, "tau": tau}
    return CDFunction(
        "tau_lattice", base.fn, params, f"tau_lattice({_fmt(params)})",
        convex_from=base.convex_from, nu=base.nu, gamma=base.gamma, c=base.c, note=base.note,
    )


def two_point_alpha(alpha: float) -> CDFunction:
    alpha = _unit(alpha, "alpha")
    return scale(two_point(), 1.0, 1.0 - alpha, name="two_point_alpha", params={"alpha": alpha},
                 note="2 sinh((1-alpha) a)")


def _positive(v, name):
    v = float(v)
    if not (v > 0 and math.isfinite(v)):
        raise DomainError(f"{name} must be positive, got {v}")
    return v


def _unit(v, name):
    v = float(v)
    if not 0 < v < 1:
        raise DomainError(f"{name} must lie in (0, 1), got {v}")
    return v


def _int(v, name, minimum):
    f = float(v)
    if f != int(f) or int(f) < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}, got {v}")
    return int(f)


# ---------------------------------------------------------------------------
# combinators
# ---------------------------------------------------------------------------

def fsum(F1: CDFunction, F2: CDFunction) -> CDFunction:
    return CDFunction(
        "sum", lambda x: F1(x) + F2(x), {}, f"sum({F1},{F2})",
        is_cd=F1.is_cd and F2.is_cd, integrable=F1.integrable or F2.integrable,
        nu=F1.nu + F2.nu if F1.nu is not None and F2.nu is not None else None,
    )


def fmin(F1: CDFunction, F2: CDFunction) -> CDFunction:
    return CDFunction(
        "min", lambda x: np.minimum(F1(x), F2(x)), {}, f"min({F1},{F2})",
        is_cd=F1.is_cd and F2.is_cd, integrable=F1.integrable and F2.integrable,
    )


def scale(F: CDFunction, alpha: float, beta: float, name: str | None = None, params: dict | None = None,
          note: str = "") -> CDFunction:
    """``x -> alpha F(beta x)``; closed forms carry over."""
    alpha = _positive(alpha, "alpha")
    beta = _positive(beta, "beta")
    tail = phi = None
    if F.closed_tail is not None:
        tail = lambda x: F.closed_tail(beta * np.asarray(x, dtype=float)) / (alpha * beta)
    if F.closed_phi is not None:
        phi = lambda t: F.closed_phi(alpha * beta * np.asarray(t, dtype=float)) / beta
    spec = f"scale({F},alpha={alpha:g},beta={beta:g})" if name is None else f"{name}({_fmt(params or {})})"
    return CDFunction(
        name or "scale", lambda x: alpha * F(beta * np.asarray(x, dtype=float)), params or {"alpha": alpha, "beta": beta},
        spec, closed_tail=tail, closed_phi=phi, is_cd=F.is_cd, integrable=F.integrable,
        convex_from=None if F.convex_from is None else F.convex_from / beta,
        nu=None if F.nu is None else F.nu * alpha * beta**2,
        gamma=None if F.gamma is None else F.gamma * beta,
        c=None if F.c is None else F.c * alpha, note=note or F.note,
    )


def combine(op: str, F1: CDFunction, F2: CDFunction | None = None, alpha: float = 1.0, beta: float = 1.0,
            verify: bool = True) -> CDFunction:
    """Sum, minimum or rescaling of CD-functions, re-verified on the standard grid."""
    operands = [F1] if op == "scale" else [F1, F2]
    if op in ("sum", "min") and F2 is None:
        raise DomainError(f"{op} needs two operands")
    if verify:
        for F in operands:
            rep = verify_cd(F)
            if not rep.passed:
                raise PreconditionError(f"operand {F} is not a CD-function: {rep.failures[0]}")
    if op == "sum":
        out = fsum(F1, F2)
    elif op == "min":
        out = fmin(F1, F2)
    elif op == "scale":
        out = scale(F1, alpha, beta)
    else:
        raise DomainError(f"unknown combinator {op!r}")
    if verify:
        rep = verify_cd(out)
        if not rep.passed:
            raise ConsistencyError(f"{op} of CD-functions failed verification: {rep.failures[0]}")
    return out


# ---------------------------------------------------------------------------
# text specs
# ---------------------------------------------------------------------------

CATALOG = {
    "two_point": (two_point, []),
    "two_point_alpha": (two_point_alpha, ["alpha"]),
    "quadratic": (quadratic, ["c"]),
    "power": (power, ["c", "p"]),
    "path3": (path3_endpoint, []),
    "triangle_raw": (triangle_raw, []),
    "triangle": (triangle, []),
    "complete": (complete, ["D", "mu0", "alpha"]),
    "lambda_family": (lambda_family, ["lam"]),
    "ricci_flat": (ricci_flat, ["D", "mu0"]),
    "ricci_flat_alpha": (ricci_flat_alpha, ["D", "mu0", "alpha"]),
    "tau_lattice": (tau_lattice, ["d", "tau"]),
}

ALIASES = {"2sinh": "two_point", "F3": "path3"}

CATALOG_HELP = [
    ("two_point", "2 sinh a", "two-point graph"),
    ("two_point_alpha(alpha)", "2 sinh((1-alpha) a)", "two-point graph, alpha-version"),
    ("path3", "(1/2) e^{-a}(e^a - e^{-a})^2", "path x1 - x* - x2 with degree measure"),
    ("triangle", "4 sinh(a/2)", "triangle, CD minorant"),
    ("triangle_raw", "2(e^{a/2} + 1 - 2e^{-a/2})", "triangle, not a CD-function"),
    ("complete(D,mu0,alpha)", "(D/mu0^2) e^{-alpha mu0 a/D}(e^{mu0 a/D} - 1)(D e^{-mu0 a/D} + 1)",
     "complete graph on D+1 vertices; not a CD-function unless D=1, alpha=0"),
    ("lambda_family(lam)", "e^{-(1-lam)x/2}(lam e^{(1-lam)x} + (1-lam)e^{-lam x} - 1)", "strictly convex family"),
    ("ricci_flat(D,mu0)", "(D/mu0^2) e^{-mu0 a/D}[Y(2mu0 a/D) + (D-1)Y(-2mu0 a/(D(D-1)))]",
     "D-regular Ricci-flat graph"),
    ("ricci_flat_alpha(D,mu0,alpha)",
     "(D/mu0^2) e^{-mu0(1-alpha)a/D}[e^{2(1-alpha)mu0 a/D} + ((1-alpha)/alpha)e^{-2alpha mu0 a/D} - 1/alpha]",
     "Ricci-flat graph, alpha-version"),
    ("tau_lattice(d,tau)", "ricci_flat(D=2d, mu0=tau^2)", "lattice with spacing tau"),
    ("quadratic(c)", "c x^2", "elementary example"),
    ("power(c,p)", "c x^p, p > 1", "elementary example"),
    ("sum(F,G) / min(F,G) / scale(F,alpha,beta)", "F+G, min(F,G), alpha F(beta x)", "combinators"),
]

_TOKEN = re.compile(r"\s*(2sinh\b|[A-Za-z_][A-Za-z0-9_]*|[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[(),=])")


def _tokenize(text: str) -> list[str]:
    pos, out = 0, []
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise DomainError(f"cannot parse CD-function spec near {text[pos:]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def make_cd(spec: str) -> CDFunction:
    """Build a CD-function from text such as ``"ricci_flat(D=2,mu0=1)"``.

    Combinators nest: ``"min(power(p=2),power(p=3))"``,
    ``"sum(two_point,quadratic(c=1))"``, ``"scale(two_point,alpha=2,beta=0.5)"``.
    """
    tokens = _tokenize(spec)
    F, pos = _parse(tokens, 0)
    if pos != len(tokens):
        raise DomainError(f"trailing text in CD-function spec {spec!r}")
    return F


def _parse(tokens, pos):
    if pos >= len(tokens):
        raise DomainError("unexpected end of CD-function spec")
    name = ALIASES.get(tokens[pos], tokens[pos])
    pos += 1
    args, kwargs = [], {}
    if pos < len(tokens) and tokens[pos] == "(":
        pos += 1
        if ")" not in tokens[pos:]:
            raise DomainError("unbalanced parentheses in CD-function spec")
        while tokens[pos] != ")":
            if pos + 1 < len(tokens) and tokens[pos + 1] == "=":
                key = tokens[pos]
                kwargs[key] = _number(tokens[pos + 2])
                pos += 3
            elif tokens[pos][0].isalpha() or tokens[pos][0] == "_":
                sub, pos = _parse(tokens, pos)
                args.append(sub)
            else:
                args.append(_number(tokens[pos]))
                pos += 1
            if tokens[pos] == ",":
                pos += 1
            elif tokens[pos] != ")":
                raise DomainError(f"expected ',' or ')' in CD-function spec, got {tokens[pos]!r}")
        pos += 1
    if name in ("sum", "min"):
        if len(args) != 2 or kwargs:
            raise DomainError(f"{name} takes exactly two CD-function arguments")
        return (fsum if name == "sum" else fmin)(*args), pos
    if name == "scale":
        if not args or not isinstance(args[0], CDFunction):
            raise DomainError("scale takes a CD-function followed by alpha and beta")
        nums = args[1:]
        alpha = kwargs.pop("alpha", nums[0] if nums else 1.0)
        beta = kwargs.pop("beta", nums[1] if len(nums) > 1 else 1.0)
        if kwargs:
            raise DomainError(f"scale has no parameters {sorted(kwargs)}")
        return scale(args[0], alpha, beta), pos
    if name not in CATALOG:
        raise DomainError(f"unknown CD-function {name!r}; known: {sorted(CATALOG)}")
    fn, names = CATALOG[name]
    if any(isinstance(a, CDFunction) for a in args):
        raise DomainError(f"{name} takes numeric parameters only")
    if len(args) > len(names):
        raise DomainError(f"{name} takes at most {len(names)} parameters")
    bad = set(kwargs) - set(names)
    if bad:
        raise DomainError(f"{name} has no parameters {sorted(bad)}")
    try:
        return fn(*args, **kwargs), pos
    except TypeError as exc:
        raise DomainError(f"bad parameters for {name}: {exc}") from None


def _number(tok):
    try:
        return float(tok)
    except ValueError:
        raise DomainError(f"expected a number, got {tok!r}") from None


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class CDReport:
    spec: str
    passed: bool
    failures: list = field(default_factory=list)
    first_violation: tuple | None = None
    increments: list = field(default_factory=list)
    tail_decay: bool = True


def tail_increments(F: CDFunction, x0: float = 1.0, doublings: int = 40) -> np.ndarray:
    """``int_{x0 2^k}^{x0 2^{k+1}} dr / F(r)`` for ``k = 0 .. doublings-1``."""
    out = []
    for k in range(doublings):
        a, b = x0 * 2.0**k, x0 * 2.0 ** (k + 1)
        fa = F(a)
        if not np.isfinite(fa):
            out.append(0.0)
            continue
        # only the decay pattern matters, so roundoff warnings on tiny increments are harmless
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(lambda r: 1.0 / F(r), a, b, epsrel=1e-10, limit=200)
        out.append(val)
    return np.array(out)


def verify_cd(F: CDFunction, grid=None, tail_probe: float = 1.0) -> CDReport:
    """Check the defining properties of a CD-function numerically.

    ``F(0) = 0`` is checked exactly and ``F(x)/x`` must increase strictly
    between consecutive grid points (no tolerance).  Integrability of
    ``1/F`` is judged heuristically: increments of the integral over doubling
    intervals must eventually shrink by a factor of at most ``0.8``.
    """
    grid = STANDARD_GRID if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing and positive")
    rep = CDReport(spec=str(F), passed=True)
    f0 = float(F(0.0))
    if f0 != 0.0:
        rep.failures.append(f"F(0) = {f0!r} instead of 0")
    vals = np.asarray(F(grid), dtype=float)
    if not np.all(np.isfinite(vals) & (vals > 0)):
        k = int(np.flatnonzero(~(np.isfinite(vals) & (vals > 0)))[0])
        rep.failures.append(f"F({grid[k]:.6g}) = {vals[k]!r} is not positive and finite")
    q = vals / grid
    bad = np.flatnonzero(~(q[1:] > q[:-1]))
    if bad.size:
        k = int(bad[0])
        rep.first_violation = (float(grid[k]), float(grid[k + 1]), float(q[k]), float(q[k + 1]))
        rep.failures.append(
            f"F(x)/x not strictly increasing: F/x = {q[k]:.12g} at x = {grid[k]:.6g} "
            f"but {q[k + 1]:.12g} at x = {grid[k + 1]:.6g}"
        )
    inc = tail_increments(F, tail_probe)
    rep.increments = inc.tolist()
    pos = inc[inc > 0]
    tail = pos[-5:]
    decays = len(pos) < 6 or bool(np.all(tail[1:] <= 0.8 * tail[:-1]))
    rep.tail_decay = decays
    if not decays:
        rep.failures.append("integral of 1/F over doubling intervals does not decay geometrically")
    rep.passed = not rep.failures
    return rep


# ---------------------------------------------------------------------------
# superadditivity and auxiliary roots
# ---------------------------------------------------------------------------

def ratio_function(F: CDFunction) -> Callable:
    """``H(x) = F(x)/x`` extended by ``H(0) = 0``."""
    def H(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(x > 0, F(x) / np.where(x > 0, x, 1.0), 0.0)
        return out[()] if out.ndim == 0 else out
    return H


def derivative(fn: Callable, x, h: float = 1e-4):
    """Fourth-order central difference with step ``h * max(1, |x|)``."""
    x = np.asarray(x, dtype=float)
    s = h * np.maximum(1.0, np.abs(x))
    return (-fn(x + 2 * s) + 8 * fn(x + s) - 8 * fn(x - s) + fn(x - 2 * s)) / (12 * s)


@dataclass
class SuperadditivityConstant:
    gamma: float
    c0: float
    c1: float
    a_star: float


def superadditivity_gamma(H: Callable, a_star: float, n: int = 20001) -> SuperadditivityConstant:
    """``gamma = max H' / min H'`` over ``[0, a_star]`` by dense sampling.

    With ``H`` strictly increasing, ``H(0) = 0`` and ``H`` convex beyond
    ``a_star`` this gives ``H(x) + H(y) <= H(x + gamma y)``.
    """
    a_star = float(a_star)
    if not a_star > 0:
        raise DomainError("a_star must be positive")
    h = 1e-4 * a_star
    xs = np.linspace(2 * h, a_star, n)
    dH = derivative(H, xs, h)
    # one-sided estimate at the left end, where H may not extend below 0
    d0 = (-3 * H(0.0) + 4 * H(h) - H(2 * h)) / (2 * h)
    dH = np.concatenate([[d0], dH])
    c0, c1 = float(np.min(dH)), float(np.max(dH))
    if not c0 > 0:
        raise PreconditionError(f"min H' = {c0:.3g} on [0, {a_star:g}] is not positive")
    return SuperadditivityConstant(c1 / c0, c0, c1, a_star)


def superadditivity_violation(H: Callable, gamma: float, xs, ys) -> float:
    """Largest relative excess of ``H(x) + H(y)`` over ``H(x + gamma y)``."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    lhs = H(xs) + H(ys)
    rhs = H(xs + gamma * ys)
    return float(np.max((lhs - rhs) / np.maximum(1e-300, np.abs(rhs))))


def bisect(f: Callable, lo: float, hi: float, rtol: float = 1e-12, maxiter: int = 400) -> float:
    """Bisection on a sign change of ``f`` in ``[lo, hi]``."""
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise DomainError(f"no sign change on [{lo}, {hi}]")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= rtol * abs(hi):
            break
    return 0.5 * (lo + hi)


def eta_root(eta: float) -> float:
    """Positive zero of ``f(a) = e^{-eta a} - 1 + a`` for ``eta > 1``."""
    eta = float(eta)
    if not eta > 1:
        raise DomainError("eta_root needs eta > 1")
    f = lambda a: math.expm1(-eta * a) + a
    # f < 0 at (eta-1)/eta^2 since e^{-s} <= 1 - s + s^2/2, and f(1) = e^{-eta} > 0
    return bisect(f, (eta - 1) / eta**2, 1.0)
