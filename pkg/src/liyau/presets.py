"""Builders for the example graphs and the ``name(params)`` preset syntax."""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .graph import WeightedGraph
from .ricci import RicciFlatStructure, find_eta_maps


@dataclass
class Preset:
    name: str
    graph: WeightedGraph
    ricci: RicciFlatStructure | None = None
    params: dict = field(default_factory=dict)
    description: str = ""


def _path_edges(names):
    return [(a, b, 1.0) for a, b in zip(names, names[1:])]


def two_point() -> Preset:
    g = WeightedGraph(["x1", "x2"], [("x1", "x2", 1.0)])
    return Preset("two-point", g, _cyclic_structure(g, ["x1", "x2"]), description="two vertices joined by one edge")


def triangle() -> Preset:
    names = ["x*", "x1", "x2"]
    g = WeightedGraph(names, [("x*", "x1", 1), ("x*", "x2", 1), ("x1", "x2", 1)])
    return Preset("triangle", g, _cyclic_structure(g, names, all_shifts=True), description="complete graph on three vertices")


def path3() -> Preset:
    g = WeightedGraph(["x1", "x*", "x2"], _path_edges(["x1", "x*", "x2"]), mu="degree")
    return Preset("path3", g, description="path x1 - x* - x2 with measure equal to the degree")


def complete(n: int) -> Preset:
    n = _int_param(n, "n", 2)
    names = [str(i) for i in range(n)]
    edges = [(a, b, 1.0) for a, b in itertools.combinations(names, 2)]
    g = WeightedGraph(names, edges)
    return Preset(f"complete({n})", g, _cyclic_structure(g, names, all_shifts=True), {"n": n},
                  f"complete graph on {n} vertices")


def star(k: int) -> Preset:
    k = _int_param(k, "k", 1)
    leaves = [f"x{j}" for j in range(1, k + 1)]
    g = WeightedGraph(["x*"] + leaves, [("x*", leaf, 1.0) for leaf in leaves])
    return Preset(f"star({k})", g, params={"k": k}, description=f"star with centre x* and {k} leaves")


def hexagon_patch() -> Preset:
    """Star with three leaves, each leaf carrying two further leaves (10 vertices)."""
    inner = ["x1", "x2", "x3"]
    outer = [f"x{j}{k}" for j in range(1, 4) for k in (1, 2)]
    edges = [("x*", y, 1.0) for y in inner] + [(f"x{o[1]}", o, 1.0) for o in outer]
    g = WeightedGraph(["x*"] + inner + outer, edges)
    return Preset("hexagon-patch", g, description="10-vertex tree cut from the hexagonal tiling")


def cycle(n: int) -> Preset:
    n = _int_param(n, "n", 3)
    names = [str(i) for i in range(n)]
    edges = [(names[i], names[(i + 1) % n], 1.0) for i in range(n)]
    g = WeightedGraph(names, edges)
    return Preset(f"cycle({n})", g, _cyclic_structure(g, names, shifts=[1, n - 1]), {"n": n}, f"cycle on {n} vertices")


def random_graph(n: int, seed: int = 0, p: float = 0.4) -> Preset:
    """Connected graph with log-normal weights and measure.

    A random spanning tree guarantees connectivity; every other pair is an
    edge with probability ``p``.
    """
    n = _int_param(n, "n", 2)
    seed = _int_param(seed, "seed", 0)
    rng = np.random.default_rng(seed)
    names = [str(i) for i in range(n)]
    order = rng.permutation(n)
    pairs = {tuple(sorted((int(order[k]), int(order[rng.integers(k)])))) for k in range(1, n)}
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < p:
            pairs.add((i, j))
    edges = [(names[i], names[j], float(np.exp(rng.normal()))) for i, j in sorted(pairs)]
    mu = np.exp(rng.normal(size=n))
    g = WeightedGraph(names, edges, mu=mu)
    return Preset(f"random({n},{seed})", g, params={"n": n, "seed": seed, "p": p},
                  description="random connected graph with log-normal weights and measure")


PRISM_EDGES = [("A", "C"), ("C", "D"), ("D", "B"), ("B", "A"), ("A", "E"), ("E", "B"), ("E", "F"), ("F", "C"), ("F", "D")]


def prism(time_budget: float = 5.0) -> Preset:
    """Triangular prism; its eta maps are found by search at every vertex."""
    g = WeightedGraph("ABCDEF", [(a, b, 1.0) for a, b in PRISM_EDGES])
    s = RicciFlatStructure(3)
    for x in g.vertices:
        found = find_eta_maps(g, x, time_budget)
        if found is None:
            raise DomainError(f"no Ricci-flat structure found at prism vertex {x}")
        s = s.merge(found)
    return Preset("prism", g, s, description="triangular prism (triangles ABE, CDF; rungs AC, BD, EF)")


def _lattice_id(c) -> str:
    return ",".join(str(int(a)) for a in c)


def z_ball(d: int, r: int, mu0: float = 1.0, tau: float | None = None) -> Preset:
    """Lattice points with ``|x|_1 <= r``, unit weights and constant measure."""
    d = _int_param(d, "d", 1)
    r = _int_param(r, "r", 1)
    mu0 = float(mu0)
    if not mu0 > 0:
        raise DomainError("mu0 must be positive")
    pts = [c for c in itertools.product(range(-r, r + 1), repeat=d) if sum(map(abs, c)) <= r]
    ids = [_lattice_id(c) for c in pts]
    present = set(pts)
    edges = []
    for c in pts:
        for j in range(d):
            nb = tuple(c[k] + (k == j) for k in range(d))
            if nb in present:
                edges.append((_lattice_id(c), _lattice_id(nb), 1.0))
    coords = np.array(pts, dtype=int).reshape(len(pts), d)
    meta = {"kind": "lattice", "d": d, "r": r, "coords": coords, "l1": np.abs(coords).sum(axis=1)}
    if tau is not None:
        meta["tau"] = float(tau)
    g = WeightedGraph(ids, edges, mu=mu0, meta=meta)

    s = RicciFlatStructure(2 * d)
    for c, l1 in zip(pts, meta["l1"]):
        if l1 + 2 > r:
            continue
        closed = [c] + [tuple(c[k] + sgn * (k == j) for k in range(d)) for sgn in (1, -1) for j in range(d)]
        maps = []
        for sgn in (1, -1):
            for j in range(d):
                maps.append({_lattice_id(y): _lattice_id(tuple(y[k] + sgn * (k == j) for k in range(d))) for y in closed})
        s.eta[_lattice_id(c)] = maps
    if tau is None:
        name, params = f"Z-ball({d},{r})", {"d": d, "r": r, "mu0": mu0}
        desc = f"l1-ball of radius {r} in the {d}-dimensional integer lattice"
    else:
        name, params = f"tauZ-ball({d},{r},{tau:g})", {"d": d, "r": r, "tau": tau}
        desc = f"l1-ball of radius {r} in the lattice with spacing {tau:g}"
    return Preset(name, g, s, params, desc)


def tau_z_ball(d: int, r: int, tau: float) -> Preset:
    """Scaled lattice ball; measure ``tau^2`` and unit weights."""
    tau = float(tau)
    if not tau > 0:
        raise DomainError("tau must be positive")
    return z_ball(d, r, mu0=tau * tau, tau=tau)


def _cyclic_structure(g: WeightedGraph, names, shifts=None, all_shifts=False) -> RicciFlatStructure:
    """Structure of a Cayley graph of the cyclic group on ``names``."""
    n = len(names)
    if all_shifts:
        shifts = list(range(1, n))
    if shifts is None:
        shifts = [1]
    pos = {v: k for k, v in enumerate(names)}
    s = RicciFlatStructure(len(shifts))
    for x in names:
        closed = [x] + g.neighbors(x)
        s.eta[x] = [{y: names[(pos[y] + h) % n] for y in closed} for h in shifts]
    return s


def interior_mask(g: WeightedGraph, depth: int) -> np.ndarray:
    """Vertices whose ``depth``-ball coincides with that of the infinite lattice.

    For graphs that are not lattice balls every vertex counts as interior.
    """
    if g.meta.get("kind") != "lattice":
        return np.ones(g.n, dtype=bool)
    return g.meta["l1"] + depth <= g.meta["r"]


def lattice_step(g: WeightedGraph) -> float:
    return float(g.meta.get("tau", 1.0))


# ---------------------------------------------------------------------------
# preset syntax
# ---------------------------------------------------------------------------

_BUILDERS = {
    "two-point": (two_point, []),
    "triangle": (triangle, []),
    "path3": (path3, []),
    "complete": (complete, ["n"]),
    "star": (star, ["k"]),
    "hexagon-patch": (hexagon_patch, []),
    "cycle": (cycle, ["n"]),
    "prism": (prism, []),
    "random": (random_graph, ["n", "seed", "p"]),
    "Z-ball": (z_ball, ["d", "r", "mu0"]),
    "tauZ-ball": (tau_z_ball, ["d", "r", "tau"]),
}

PRESET_HELP = {
    "two-point": "two-point",
    "triangle": "triangle",
    "path3": "path3",
    "complete": "complete(n)",
    "star": "star(k)",
    "hexagon-patch": "hexagon-patch",
    "cycle": "cycle(n)",
    "prism": "prism",
    "random": "random(n[,seed[,p]])",
    "Z-ball": "Z-ball(d,r[,mu0])",
    "tauZ-ball": "tauZ-ball(d,r,tau)",
}


def _int_param(value, name, minimum):
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise DomainError(f"parameter {name} must be an integer, got {value!r}") from None
    if f != int(f) or int(f) < minimum:
        raise DomainError(f"parameter {name} must be an integer >= {minimum}, got {value!r}")
    return int(f)


def _parse_value(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        try:
            return float(text)
        except ValueError:
            raise DomainError(f"cannot parse parameter value {text!r}") from None


_PRESET_RE = re.compile(r"^\s*([A-Za-z][A-Za-z0-9\-]*)\s*(?:\((.*)\))?\s*$")


def build_preset(spec: str) -> Preset:
    """Build a preset from text such as ``"Z-ball(1,8)"`` or ``"preset:star(3)"``."""
    if spec.startswith("preset:"):
        spec = spec[len("preset:"):]
    m = _PRESET_RE.match(spec)
    if not m:
        raise DomainError(f"cannot parse graph preset {spec!r}")
    name, argtext = m.group(1), m.group(2)
    if name not in _BUILDERS:
        raise DomainError(f"unknown preset {name!r}; known presets: {', '.join(PRESET_HELP.values())}")
    fn, names = _BUILDERS[name]
    args, kwargs = [], {}
    if argtext and argtext.strip():
        for part in argtext.split(","):
            if "=" in part:
                k, v = part.split("=", 1)
                kwargs[k.strip()] = _parse_value(v)
            else:
                if kwargs:
                    raise DomainError("positional parameter after keyword parameter")
                args.append(_parse_value(part))
    if len(args) > len(names):
        raise DomainError(f"preset {name} takes at most {len(names)} parameters")
    unknown = set(kwargs) - set(names)
    if unknown:
        raise DomainError(f"preset {name} has no parameters {sorted(unknown)}")
    try:
        return fn(*args, **kwargs)
    except TypeError as exc:
        raise DomainError(f"bad parameters for preset {name}: {exc}") from None
