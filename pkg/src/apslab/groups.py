"""Discrete group models, word metrics, conjugacy classes and orbital traces.

Haar measure on a discrete group is counting measure, so the orbital
integral over G/Z is a plain sum over the conjugacy class.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd, sqrt
from typing import Callable, Hashable, Iterable, Mapping

import numpy as np

from .errors import NonSummable, RadiusCapExceeded

Element = Hashable

KINDS = ("free_abelian", "integers", "cyclic", "heisenberg", "table")


@dataclass(frozen=True)
class GroupModel:
    """A finitely generated group with element arithmetic.

    Elements are ints (integers, cyclic, table index) or int tuples
    (free abelian, Heisenberg ``(a, b, c)`` with
    ``(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')``).
    """

    kind: str
    rank: int = 1
    order: int = 0
    table: tuple[tuple[int, ...], ...] | None = None
    table_generators: tuple[int, ...] = ()
    radius_cap: int = 8
    element_budget: int = 10**6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.kind == "cyclic" and self.order < 1:
            raise ValueError("cyclic group needs order >= 1")
        if self.kind == "table" and not self.table:
            raise ValueError("table group needs a multiplication table")

    # -- arithmetic -------------------------------------------------------
    @property
    def identity(self) -> Element:
        k = self.kind
        if k == "free_abelian":
            return (0,) * self.rank
        if k == "heisenberg":
            return (0, 0, 0)
        if k == "table":
            return _table_identity(self.table)
        return 0

    def mul(self, x: Element, y: Element) -> Element:
        k = self.kind
        if k == "integers":
            return x + y
        if k == "cyclic":
            return (x + y) % self.order
        if k == "free_abelian":
            return tuple(a + b for a, b in zip(x, y))
        if k == "heisenberg":
            return (x[0] + y[0], x[1] + y[1], x[2] + y[2] + x[0] * y[1])
        return self.table[x][y]

    def inv(self, x: Element) -> Element:
        k = self.kind
        if k == "integers":
            return -x
        if k == "cyclic":
            return (-x) % self.order
        if k == "free_abelian":
            return tuple(-a for a in x)
        if k == "heisenberg":
            a, b, c = x
            return (-a, -b, a * b - c)
        e = self.identity
        row = self.table[x]
        return row.index(e)

    def conj(self, x: Element, g: Element) -> Element:
        """x g x^-1."""
        return self.mul(self.mul(x, g), self.inv(x))

    @property
    def is_abelian(self) -> bool:
        if self.kind in ("integers", "cyclic", "free_abelian"):
            return True
        if self.kind == "heisenberg":
            return False
        n = len(self.table)
        return all(self.table[i][j] == self.table[j][i] for i in range(n) for j in range(n))

    @property
    def generators(self) -> tuple[Element, ...]:
        """Symmetric generating set."""
        k = self.kind
        if k in ("integers",):
            return (1, -1)
        if k == "cyclic":
            return tuple(dict.fromkeys([1 % self.order, (-1) % self.order]))
        if k == "free_abelian":
            out = []
            for i in range(self.rank):
                for s in (1, -1):
                    v = [0] * self.rank
                    v[i] = s
                    out.append(tuple(v))
            return tuple(out)
        if k == "heisenberg":
            return ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0))
        gens = list(self.table_generators)
        for s in list(gens):
            t = self.inv(s)
            if t not in gens:
                gens.append(t)
        return tuple(gens)

    def validate(self, x: Element) -> Element:
        k = self.kind
        ok = False
        if k == "integers":
            ok = isinstance(x, int)
        elif k == "cyclic":
            ok = isinstance(x, int) and 0 <= x < self.order
        elif k == "free_abelian":
            ok = isinstance(x, tuple) and len(x) == self.rank and all(isinstance(a, int) for a in x)
        elif k == "heisenberg":
            ok = isinstance(x, tuple) and len(x) == 3 and all(isinstance(a, int) for a in x)
        else:
            ok = isinstance(x, int) and 0 <= x < len(self.table)
        if not ok:
            raise ValueError(f"{x!r} is not an element of {self.kind}")
        return x

    # -- metric -----------------------------------------------------------
    def ball(self, r: int) -> dict[Element, int]:
        """All elements of word length <= r mapped to their length (BFS)."""
        if r > self.radius_cap and self.kind == "heisenberg":
            raise RadiusCapExceeded(f"radius {r} exceeds cap {self.radius_cap}")
        return dict(_bfs_ball(self, int(r)))

    def sphere(self, k: int) -> list[Element]:
        return [x for x, n in self.ball(k).items() if n == k]


def free_abelian(k: int) -> GroupModel:
    return GroupModel("free_abelian", rank=k)


def integers() -> GroupModel:
    return GroupModel("integers")


def cyclic(n: int) -> GroupModel:
    return GroupModel("cyclic", order=n)


def heisenberg(radius_cap: int = 8, element_budget: int = 10**6) -> GroupModel:
    return GroupModel("heisenberg", radius_cap=radius_cap, element_budget=element_budget)


def finite_table(table: Iterable[Iterable[int]], generators: Iterable[int]) -> GroupModel:
    t = tuple(tuple(int(v) for v in row) for row in table)
    return GroupModel("table", order=len(t), table=t, table_generators=tuple(generators))


def _table_identity(table) -> int:
    n = len(table)
    for e in range(n):
        if all(table[e][j] == j and table[j][e] == j for j in range(n)):
            return e
    raise ValueError("multiplication table has no identity")


@lru_cache(maxsize=16)
def _bfs_ball(G: GroupModel, r: int) -> tuple[tuple[Element, int], ...]:
    e = G.identity
    dist = {e: 0}
    frontier = deque([e])
    gens = G.generators
    while frontier:
        x = frontier.popleft()
        d = dist[x]
        if d == r:
            continue
        for s in gens:
            y = G.mul(x, s)
            if y not in dist:
                dist[y] = d + 1
                if len(dist) > G.element_budget:
                    raise RadiusCapExceeded(f"ball of radius {r} exceeds element budget")
                frontier.append(y)
    return tuple(dist.items())


def word_length(G: GroupModel, x: Element) -> int:
    """Word length of ``x`` for the standard symmetric generators."""
    G.validate(x)
    k = G.kind
    if k == "integers":
        return abs(x)
    if k == "cyclic":
        return min(x, G.order - x)
    if k == "free_abelian":
        return sum(abs(a) for a in x)
    if k == "table":
        return G.ball(len(G.table))[x]
    ball = G.ball(G.radius_cap)
    if x in ball:
        return ball[x]
    raise RadiusCapExceeded(f"{x!r} not reached within radius {G.radius_cap}")


# -- conjugacy ------------------------------------------------------------

def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """(d, x, y) with a*x + b*y = d = gcd(a, b) >= 0."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, r = divmod(a, b)
        a, b = b, r
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def conjugating_witness(G: GroupModel, g: Element, h: Element) -> Element | None:
    """Some x with x g x^-1 = h, or None if h is not conjugate to g."""
    if G.is_abelian:
        return G.identity if g == h else None
    if G.kind == "heisenberg":
        a, b, c = g
        if (h[0], h[1]) != (a, b):
            return None
        shift = h[2] - c
        if a == 0 and b == 0:
            return G.identity if shift == 0 else None
        d, u, v = _ext_gcd(b, -a)  # u*b + v*(-a) = d, so (p, q) = (u, v) scaled
        if shift % d:
            return None
        j = shift // d
        return (u * j, v * j, 0)
    for x in range(len(G.table)):
        if G.conj(x, g) == h:
            return x
    return None


def is_conjugate(G: GroupModel, g: Element, h: Element) -> bool:
    return conjugating_witness(G, g, h) is not None


@dataclass(frozen=True)
class ConjugacyClassView:
    """Elements of the class of ``base`` within word radius ``radius``."""

    group: GroupModel
    base: Element | None
    radius: int
    elements: tuple[Element, ...]
    witnesses: tuple[Element, ...]
    lengths: tuple[int, ...]
    centralizer: str = ""

    def __len__(self):
        return len(self.elements)


def _centralizer_description(G: GroupModel, g: Element) -> str:
    if G.is_abelian:
        return "whole group"
    if G.kind == "heisenberg":
        a, b, _ = g
        if a == 0 and b == 0:
            return "whole group"
        d = gcd(a, b)
        return f"{{(k*{a // d}, k*{b // d}, c)}} : k, c in Z"
    cent = [x for x in range(len(G.table)) if G.mul(x, g) == G.mul(g, x)]
    return "{" + ", ".join(map(str, cent)) + "}"


def conjugacy_enumeration(G: GroupModel, g: Element, r: int) -> ConjugacyClassView:
    """All elements of the class of ``g`` with word length <= r, with witnesses."""
    G.validate(g)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if G.is_abelian:
        n = word_length(G, g)
        members = [(g, G.identity, n)] if n <= r else []
    else:
        ball = G.ball(r)
        if G.kind == "heisenberg":
            cands = [x for x in ball if x[0] == g[0] and x[1] == g[1]]
        else:
            cands = list(ball)
        members = []
        for h in cands:
            w = conjugating_witness(G, g, h)
            if w is not None:
                members.append((h, w, ball[h]))
    members.sort(key=lambda m: (m[2], repr(m[0])))
    return ConjugacyClassView(
        group=G,
        base=g,
        radius=r,
        elements=tuple(m[0] for m in members),
        witnesses=tuple(m[1] for m in members),
        lengths=tuple(m[2] for m in members),
        centralizer=_centralizer_description(G, g),
    )


@dataclass(frozen=True)
class GrowthFit:
    counts: tuple[int, ...]
    C: float
    d: int | None
    verdict: str


def sphere_counts(G: GroupModel, kmax: int) -> tuple[int, ...]:
    """Sizes of the word-metric spheres of G for k = 0..kmax (diagnostic mode)."""
    ball = G.ball(kmax)
    counts = [0] * (kmax + 1)
    for n in ball.values():
        counts[n] += 1
    return tuple(counts)


def fit_counts(counts: Iterable[int]) -> GrowthFit:
    """Least d in 0..8 for which count(k)/k^d stops growing, and the least C.

    The ratio is treated as bounded when its maximum over the upper half of
    the radii does not exceed its maximum over the lower half.
    """
    counts = tuple(int(c) for c in counts)
    kmax = len(counts) - 1
    if kmax < 2:
        raise ValueError("need counts up to k >= 2")
    half = kmax // 2
    for d in range(9):
        ratios = [counts[k] / k**d for k in range(1, kmax + 1)]
        head = max(ratios[:half])
        tail = max(ratios[half:])
        if tail <= head:
            C = max(counts[k] / max(k, 1) ** d for k in range(kmax + 1))
            return GrowthFit(counts, float(C), d, "polynomial (empirical)")
    return GrowthFit(counts, float("inf"), None, "inconclusive")


def growth_fit(view: ConjugacyClassView, kmax: int) -> GrowthFit:
    if kmax < 2:
        raise ValueError("kmax must be >= 2")
    if view.radius < kmax:
        view = conjugacy_enumeration(view.group, view.base, kmax)
    counts = [0] * (kmax + 1)
    for n in view.lengths:
        if n <= kmax:
            counts[n] += 1
    return fit_counts(counts)


# -- group functions ------------------------------------------------------

@dataclass(frozen=True)
class GroupFunction:
    """A finitely supported complex function on a group."""

    group: GroupModel
    values: Mapping[Element, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for x, v in self.values.items():
            self.group.validate(x)
            v = complex(v)
            if v != 0:
                clean[x] = v
        object.__setattr__(self, "values", clean)

    def __call__(self, x: Element) -> complex:
        return self.values.get(x, 0j)

    @property
    def support(self) -> list[Element]:
        return list(self.values)

    def l1(self) -> float:
        return sum(abs(v) for v in self.values.values())

    def l2(self) -> float:
        return sqrt(sum(abs(v) ** 2 for v in self.values.values()))

    def scale(self, c: complex) -> "GroupFunction":
        return GroupFunction(self.group, {x: c * v for x, v in self.values.items()})

    def __add__(self, other: "GroupFunction") -> "GroupFunction":
        out = dict(self.values)
        for x, v in other.values.items():
            out[x] = out.get(x, 0j) + v
        return GroupFunction(self.group, out)


def delta(G: GroupModel, x: Element) -> GroupFunction:
    return GroupFunction(G, {x: 1.0})


def convolve(f1: GroupFunction, f2: GroupFunction) -> GroupFunction:
    """(f1 * f2)(x) = sum_y f1(x y^-1) f2(y)."""
    G = f1.group
    out: dict[Element, complex] = {}
    for u, a in f1.values.items():
        for y, b in f2.values.items():
            x = G.mul(u, y)
            out[x] = out.get(x, 0j) + a * b
    return GroupFunction(G, out)


def mu_profile(f: GroupFunction, r: float) -> float:
    """l2 norm of f on the complement of the open ball of radius r."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    G = f.group
    return sqrt(sum(abs(v) ** 2 for x, v in f.values.items() if word_length(G, x) >= r))


def mu_brute_force(f: GroupFunction, r: float, supports: Iterable[Iterable[Element]] = ()) -> float:
    """mu_f(r) straight from its operator definition.

    For a candidate support S the best constant over phi supported on S is
    the top singular value of [f(x y^-1)] with y in S and x outside
    B_r(S).  Singletons {y} for y in the support of f, plus {e}, are always
    tried; ``supports`` adds further candidate sets.
    """
    G = f.group
    ball = [z for z, n in G.ball(max(int(np.ceil(r)), 0)).items() if n < r]
    cands = [(G.identity,)] + [(y,) for y in f.support] + [tuple(dict.fromkeys(S)) for S in supports]
    best = 0.0
    for S in cands:
        near = {G.mul(z, y) for y in S for z in ball}
        rows = sorted({G.mul(u, y) for u in f.values for y in S} - near, key=repr)
        if not rows:
            continue
        A = np.array([[f(G.mul(x, G.inv(y))) for y in S] for x in rows])
        best = max(best, float(np.linalg.norm(A, 2)))
    return best


def submultiplicativity(f1: GroupFunction, f2: GroupFunction, d: float) -> tuple[float, float]:
    """(|f1 * f2|_g, 2^{d/2+2} (|f1|_1 + |f1|_g)(|f2|_1 + |f2|_g)); l1 majorises the operator norm."""
    lhs = ks_seminorm(convolve(f1, f2), d)
    rhs = 2 ** (d / 2 + 2) * (f1.l1() + ks_seminorm(f1, d)) * (f2.l1() + ks_seminorm(f2, d))
    return lhs, rhs


def ks_seminorm(f: GroupFunction, d: float) -> float:
    """sup_{r>0} mu_f(r) r^(d/2+2); mu_f is constant on (k-1, k] so integers suffice."""
    if d < 0:
        raise ValueError("growth exponent must be nonnegative")
    G = f.group
    p = d / 2 + 2
    lengths = {}
    for x, v in f.values.items():
        n = word_length(G, x)
        lengths[n] = lengths.get(n, 0.0) + abs(v) ** 2
    best = 0.0
    for k in range(1, max(lengths, default=0) + 1):
        mass = sum(m for n, m in lengths.items() if n >= k)
        best = max(best, sqrt(mass) * k**p)
    return best


def orbital_trace(
    G: GroupModel,
    g: Element,
    f: GroupFunction | Callable[[Element], complex],
    *,
    tol: float = 1e-12,
    rmax: int | None = None,
) -> complex:
    """Sum of f over the conjugacy class of g.

    Finitely supported f is summed exactly over the support.  A callable f is
    summed over the class shell by shell; the tail must stay below ``tol`` for
    two consecutive radii or NonSummable is raised.
    """
    G.validate(g)
    if isinstance(f, GroupFunction):
        return sum((v for x, v in f.values.items() if is_conjugate(G, g, x)), 0j)
    rmax = G.radius_cap if rmax is None else rmax
    view = conjugacy_enumeration(G, g, rmax)
    shells: dict[int, complex] = {}
    for h, n in zip(view.elements, view.lengths):
        shells[n] = shells.get(n, 0j) + complex(f(h))
    total = 0j
    quiet = 0
    for n in range(rmax + 1):
        shell = shells.get(n, 0j)
        total += shell
        if abs(shell) < tol and n > 0:
            quiet += 1
            if quiet >= 2:
                return total
        else:
            quiet = 0
    if G.is_abelian or G.kind == "table":
        return total
    raise NonSummable(f"partial sums over the class of {g!r} not settled by radius {rmax}")
