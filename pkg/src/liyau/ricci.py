"""Ricci-flat structures: families of neighbour maps eta_i around a vertex.

A structure of degree ``D`` at ``x`` is a list of ``D`` maps, each sending
the closed neighbourhood ``N(x) = {x} u neighbours(x)`` into the vertex set,
such that

(i)   ``eta_i(y)`` is a neighbour of ``y``;
(ii)  ``eta_i(y) != eta_j(y)`` for ``i != j``;
(iii) the multisets ``{eta_i(eta_j(x))}_j`` and ``{eta_j(eta_i(x))}_j`` agree
      for every ``i``.
"""

from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RegularityError
from .graph import WeightedGraph, ball


@dataclass
class RicciFlatStructure:
    """Neighbour maps ``eta[x][i][y]`` of a common degree ``D``.

    ``eta`` maps a base vertex id to a list of ``D`` dictionaries, each
    defined on the closed neighbourhood of that base vertex.
    """

    D: int
    eta: dict = field(default_factory=dict)

    def maps_at(self, x) -> list[dict]:
        try:
            return self.eta[str(x)]
        except KeyError:
            raise DomainError(f"no eta maps stored at vertex {x!r}") from None

    def merge(self, other: "RicciFlatStructure") -> "RicciFlatStructure":
        if other.D != self.D:
            raise DomainError("cannot merge structures of different degree")
        eta = dict(self.eta)
        eta.update(other.eta)
        return RicciFlatStructure(self.D, eta)


@dataclass
class RicciReport:
    vertex: str
    D: int
    failures: list = field(default_factory=list)
    star: list | None = None
    sum_residual: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures


def _require_regular(g: WeightedGraph, D: int, idx) -> None:
    degs = {g.vertices[i]: int(g.degrees()[i]) for i in idx}
    bad = {v: d for v, d in degs.items() if d != D}
    if bad:
        raise RegularityError(f"graph is not {D}-regular here; degrees {degs}")


def verify_ricci_flat(g: WeightedGraph, s: RicciFlatStructure, x, n_random: int = 100, seed: int = 0) -> RicciReport:
    """Check the three defining conditions at ``x`` plus their consequences.

    Besides (i)-(iii) this checks the sum property
    ``sum_j u(eta_i(eta_j(x))) = sum_j u(eta_j(eta_i(x)))`` on random ``u`` and
    that for each ``i`` exactly one ``i*`` satisfies ``eta_i(eta_{i*}(x)) = x``,
    with ``i -> i*`` a permutation.
    """
    x = str(x)
    xi = g.index(x)
    nbrs = [g.vertices[j] for j in g.neighbor_indices(xi)]
    _require_regular(g, s.D, [xi] + [g.index(y) for y in nbrs])
    rep = RicciReport(vertex=x, D=s.D)
    fail = rep.failures
    maps = s.maps_at(x)
    if len(maps) != s.D:
        fail.append(f"expected {s.D} maps at {x}, found {len(maps)}")
        return rep
    closed = [x] + nbrs
    for i, m in enumerate(maps):
        if set(m) != set(closed):
            fail.append(f"eta_{i} is defined on {sorted(m)} instead of N({x}) = {sorted(closed)}")
    if fail:
        return rep

    for i, m in enumerate(maps):
        for y in closed:
            if m[y] not in g or g.weight(y, m[y]) == 0.0:
                fail.append(f"(i) eta_{i}({y}) = {m[y]} is not a neighbour of {y}")
    for y in closed:
        for i in range(s.D):
            for j in range(i + 1, s.D):
                if maps[i][y] == maps[j][y]:
                    fail.append(f"(ii) eta_{i}({y}) = eta_{j}({y}) = {maps[i][y]}")
    if fail:
        return rep

    for i in range(s.D):
        lhs = Counter(maps[i][maps[j][x]] for j in range(s.D))
        rhs = Counter(maps[j][maps[i][x]] for j in range(s.D))
        if lhs != rhs:
            fail.append(f"(iii) multisets differ for i={i}: {dict(lhs)} vs {dict(rhs)}")

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_random):
        u = {v: rng.normal() for v in g.vertices}
        for i in range(s.D):
            a = sum(u[maps[i][maps[j][x]]] for j in range(s.D))
            b = sum(u[maps[j][maps[i][x]]] for j in range(s.D))
            worst = max(worst, abs(a - b) / max(1.0, abs(a), abs(b)))
    rep.sum_residual = worst
    if worst > 1e-12:
        fail.append(f"sum property violated, residual {worst:.3g}")

    star = []
    for i in range(s.D):
        hits = [k for k in range(s.D) if maps[i][maps[k][x]] == x]
        if len(hits) != 1:
            fail.append(f"eta_{i}(eta_k({x})) = {x} for k in {hits}; expected exactly one")
            star = None
            break
        star.append(hits[0])
    if star is not None and sorted(star) != list(range(s.D)):
        fail.append(f"i -> i* is not a permutation: {star}")
    rep.star = star
    return rep


def find_eta_maps(g: WeightedGraph, x, time_budget: float = 5.0) -> RicciFlatStructure | None:
    """Backtracking search for a Ricci-flat structure at ``x``.

    The map ``eta_i`` restricted to ``x`` may be fixed to the sorted
    neighbour order, since relabelling the index ``i`` preserves all three
    conditions.  Writing ``y_j = eta_j(x)``, condition (iii) then says that
    column ``i`` of the matrix ``M[j][i] = eta_i(y_j)`` is a permutation of the
    neighbours of ``y_i``, while (i)-(ii) say row ``j`` is a permutation of
    the neighbours of ``y_j``.  The search fills ``M`` cell by cell.

    Returns ``None`` when no witness is found within ``time_budget`` seconds.
    This is never a proof of nonexistence unless the search was exhaustive.
    """
    x = str(x)
    xi = g.index(x)
    D = g.degree(x)
    _require_regular(g, D, ball(g, x, 2))
    ys = [int(j) for j in g.neighbor_indices(xi)]
    nb = {y: set(int(k) for k in g.neighbor_indices(y)) for y in ys}
    cand = [[sorted(nb[ys[j]] & nb[ys[i]]) for i in range(D)] for j in range(D)]
    M = [[-1] * D for _ in range(D)]
    row_used = [set() for _ in range(D)]
    col_used = [set() for _ in range(D)]
    deadline = time.monotonic() + time_budget
    counter = [0]

    def place(cell: int) -> bool:
        if cell == D * D:
            return True
        counter[0] += 1
        if counter[0] % 4096 == 0 and time.monotonic() > deadline:
            raise TimeoutError
        j, i = divmod(cell, D)
        for c in cand[j][i]:
            if c in row_used[j] or c in col_used[i]:
                continue
            M[j][i] = c
            row_used[j].add(c)
            col_used[i].add(c)
            if place(cell + 1):
                return True
            row_used[j].discard(c)
            col_used[i].discard(c)
        M[j][i] = -1
        return False

    try:
        found = place(0)
    except TimeoutError:
        return None
    if not found:
        return None
    V = g.vertices
    maps = []
    for i in range(D):
        m = {x: V[ys[i]]}
        for j in range(D):
            m[V[ys[j]]] = V[M[j][i]]
        maps.append(m)
    return RicciFlatStructure(D, {x: maps})
