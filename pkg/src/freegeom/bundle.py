"""The Cayley-graph bundle of an extension E = <i_x1, ..., i_xr, t_1, ..., t_n> <= Aut(F).

Every element of E is stored as a pair (g, a): g indexes an element of the
quotient group Gamma (the image of E in Out(F)) through a fixed lift t~_g,
and a is a reduced word, the pair meaning t~_g o i_a.  Right multiplication
by i_x appends x to a.  Right multiplication by t_j uses the identity
i_a o t_j = t_j o i_{t_j^-1(a)} and a cached correction t~_g o t_j = t~_{g s_j} o i_c.
The fiber over g is the tree of all (g, a); the fiber distance is |a^-1 b|.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .free_group import (
    Automorphism,
    ConjugacyClass,
    all_reduced_words,
    canonical_cyclic,
    compose,
    cyclic_reduce,
    format_word,
    identity,
    inverse,
    is_inner,
    reduce,
)
from .free_group.automorphism import substitute
from .outer_space import MarkedGraph, act, length_of_class, rose
from .trees import almost_contained

DEFAULT_CAP = 5_000_000


class CapExceeded(RuntimeError):
    """A breadth-first search hit its node budget."""


class FiberError(ValueError):
    pass


def _push(a: tuple, x: int) -> tuple:
    return a[:-1] if a and a[-1] == -x else a + (x,)


class ExtensionPresentation:
    """Generators t_1..t_n of Gamma lifted to Aut(F), with the bookkeeping for Gamma.

    Gamma elements are discovered lazily and numbered; element 0 is the identity.
    """

    def __init__(self, rank: int, generators: Sequence[Automorphism] = (), name: str = ""):
        if rank < 2:
            raise ValueError("rank must be at least 2")
        self.rank = rank
        self.generators = tuple(generators)
        for t in self.generators:
            if t.rank != rank:
                raise ValueError("generator rank mismatch")
        self.name = name
        self._inv = tuple(t.inverse() for t in self.generators)
        self._tests = [(i,) for i in range(1, rank + 1)] + [
            (i, s * j) for i in range(1, rank + 1) for j in range(i + 1, rank + 1) for s in (1, -1)]
        self.lifts: list[Automorphism] = []
        self.witness: list[tuple] = []
        self._buckets: dict = {}
        self._trans: dict = {}
        self._add(identity(rank), ())

    # -- Gamma bookkeeping -------------------------------------------------------------

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    @property
    def mu_bl(self) -> int:
        """Largest length of t_i(x) or t_i^-1(x) over generators and basis letters (at least 1)."""
        lens = [len(w) for t in self.generators for w in t.images + t.inverse_images]
        return max(lens + [1])

    def _key(self, phi: Automorphism) -> tuple:
        return tuple(canonical_cyclic(phi(w)) for w in self._tests)

    def _add(self, phi: Automorphism, word: tuple) -> int:
        gid = len(self.lifts)
        self.lifts.append(phi)
        self.witness.append(word)
        self._buckets.setdefault(self._key(phi), []).append(gid)
        return gid

    def locate(self, phi: Automorphism, word: tuple = None):
        """(id, c) with phi = lift[id] o i_c, registering a new Gamma element if needed."""
        for gid in self._buckets.get(self._key(phi), []):
            c = is_inner(compose(self.lifts[gid].inverse(), phi))
            if c is not None:
                return gid, c
        if word is None:
            raise KeyError("unregistered Gamma element")
        return self._add(phi, word), ()

    def lift(self, word: Sequence[int]) -> Automorphism:
        """t-product lifting a word in s_1..s_n (letters +-j for s_j)."""
        out = identity(self.rank)
        for x in word:
            j = abs(x) - 1
            if not 0 <= j < self.n_generators:
                raise ValueError(f"generator s{abs(x)} out of range")
            out = compose(out, self.generators[j] if x > 0 else self._inv[j])
        return out

    def gamma_id(self, word: Sequence[int]) -> int:
        return self.locate(self.lift(word), tuple(reduce(word)))[0]

    def gamma_equal(self, g: Sequence[int], h: Sequence[int]) -> bool:
        """Do two words in the s_i represent the same element of Gamma?"""
        return is_inner(compose(self.lift(g).inverse(), self.lift(h))) is not None

    def transition(self, gid: int, j: int, eps: int):
        """(id', c) with lift[gid] o t_j^eps = lift[id'] o i_c."""
        key = (gid, j, eps)
        if key not in self._trans:
            t = self.generators[j] if eps > 0 else self._inv[j]
            self._trans[key] = self.locate(compose(self.lifts[gid], t), self.witness[gid] + ((j + 1) * eps,))
        return self._trans[key]

    def gamma_neighbors(self, gid: int) -> list:
        return [self.transition(gid, j, e)[0] for j in range(self.n_generators) for e in (1, -1)]

    def gamma_ball(self, N: int, cap: int = DEFAULT_CAP) -> list:
        """Rows (id, distance, geodesic witness word) of the ball of radius N in Gamma."""
        dist = {0: 0}
        word = {0: ()}
        q = deque([0])
        rows = [(0, 0, ())]
        while q:
            g = q.popleft()
            if dist[g] == N:
                continue
            for j in range(self.n_generators):
                for e in (1, -1):
                    h = self.transition(g, j, e)[0]
                    if h not in dist:
                        dist[h] = dist[g] + 1
                        word[h] = word[g] + ((j + 1) * e,)
                        rows.append((h, dist[h], word[h]))
                        q.append(h)
                        if len(dist) > cap:
                            raise CapExceeded(f"Gamma ball exceeded {cap} elements")
        return rows

    def gamma_distance(self, g: int, h: int, cap: int = DEFAULT_CAP) -> int:
        if g == h:
            return 0
        dist = {g: 0}
        q = deque([g])
        while q:
            x = q.popleft()
            for y in self.gamma_neighbors(x):
                if y not in dist:
                    dist[y] = dist[x] + 1
                    if y == h:
                        return dist[y]
                    if len(dist) > cap:
                        raise CapExceeded(f"Gamma search exceeded {cap} elements")
                    q.append(y)
        raise ValueError("elements are not connected")

    def gamma_word(self, gid: int) -> str:
        return " ".join(f"s{abs(x)}" + ("" if x > 0 else "^-1") for x in self.witness[gid]) or "1"

    # -- bundle generators ------------------------------------------------------------------

    @property
    def generator_names(self) -> list:
        names = []
        for k in range(1, self.rank + 1):
            names += [f"i_{format_word((k,))}", f"i_{format_word((-k,))}"]
        for j in range(1, self.n_generators + 1):
            names += [f"t{j}", f"t{j}^-1"]
        return names

    @property
    def n_bundle_generators(self) -> int:
        return 2 * self.rank + 2 * self.n_generators

    def step(self, p: "FiberPoint", k: int) -> "FiberPoint":
        """Right multiplication by the k-th bundle generator."""
        return FiberPoint(*self._raw_step((p.gamma, p.word), k))

    def _raw_step(self, p: tuple, k: int) -> tuple:
        g, w = p
        if k < 2 * self.rank:
            x = (k // 2 + 1) * (1 if k % 2 == 0 else -1)
            return g, (w[:-1] if w and w[-1] == -x else w + (x,))
        j, e = divmod(k - 2 * self.rank, 2)
        eps = 1 if e == 0 else -1
        g2, c = self.transition(g, j, eps)
        back = self._inv[j] if eps > 0 else self.generators[j]
        return g2, reduce(c + substitute(back.images, w))

    def neighbors(self, p: "FiberPoint") -> list:
        return [self.step(p, k) for k in range(self.n_bundle_generators)]

    def to_automorphism(self, p: "FiberPoint") -> Automorphism:
        from .free_group import inner

        return compose(self.lifts[p.gamma], inner(p.word, self.rank))

    def from_automorphism(self, phi: Automorphism) -> "FiberPoint":
        gid, c = self.locate(phi)
        return FiberPoint(gid, c)

    def point(self, base_word: Sequence[int] = (), a: Sequence[int] = ()) -> "FiberPoint":
        """The element t~_b o i_a for a base word b in the s_i."""
        phi = compose(self.lift(base_word), _inner(a, self.rank))
        gid, c = self.locate(phi, tuple(reduce(base_word)))
        return FiberPoint(gid, c)


def _inner(a, rank):
    from .free_group import inner

    return inner(a, rank)


@dataclass(frozen=True)
class FiberPoint:
    """The element t~_gamma o i_word of the extension, a vertex of the fiber tree over gamma."""

    gamma: int
    word: tuple


# --- fibers ---------------------------------------------------------------------------------

def fiber_distance(u: FiberPoint, v: FiberPoint) -> int:
    """|u^-1 v| for two elements of one fiber."""
    if u.gamma != v.gamma:
        raise FiberError("not a fiber pair")
    return len(reduce(inverse(u.word) + v.word))


@dataclass(frozen=True)
class AxisDescription:
    gamma: int
    conjugator: tuple
    core: tuple

    @property
    def translation_length(self) -> int:
        return len(self.core)


def axis_in_fiber(pres: ExtensionPresentation, a: Sequence[int], base_word: Sequence[int] = ()) -> AxisDescription:
    """Axis of i_a acting on the fiber over the base word b.

    Left multiplication by i_a sends t~_b o i_x to t~_b o i_{t~_b^-1(a) x}, so the
    action on the fiber tree is that of t~_b^-1(a) on the Cayley tree of F.
    """
    a = reduce(a)
    if not a:
        raise ValueError("trivial element has no axis")
    gid = pres.gamma_id(base_word)
    pulled = pres.lifts[gid].inverse()(a)
    core, u = cyclic_reduce(pulled)
    return AxisDescription(gid, u, core)


def _axis_prefix(y: tuple, core: tuple) -> tuple:
    """Longest prefix of y lying on the axis of the cyclically reduced core through 1."""
    best = ()
    for c in (core, inverse(core)):
        k = 0
        while k < len(y) and y[k] == c[k % len(c)]:
            k += 1
        if k > len(best):
            best = y[:k]
    return best


def fiber_projection(x: FiberPoint, axis: AxisDescription) -> FiberPoint:
    """Closest-point projection of x to the axis in the fiber tree."""
    if x.gamma != axis.gamma:
        raise FiberError("point and axis lie in different fibers")
    u = axis.conjugator
    y = reduce(inverse(u) + x.word)
    return FiberPoint(x.gamma, reduce(u + _axis_prefix(y, axis.core)))


def on_axis(x: FiberPoint, axis: AxisDescription) -> bool:
    return fiber_projection(x, axis) == x


# --- bundle geodesics --------------------------------------------------------------------------

@dataclass
class SearchResult:
    distance: int | None
    nodes: int
    overflow: bool = False
    path: list = field(default_factory=list)
    word: tuple = ()


def _bidirectional(pres, u, v, cap):
    """Layered bidirectional search on raw (gamma, word) pairs.

    Returns (distance, forward info, forward layers, backward depths, nodes, overflow).
    Forward info maps a point to (depth, parent, generator) with first-discovery
    parents, so forward layers are in shortlex order of their witness words.
    """
    step = pres._raw_step
    K = pres.n_bundle_generators
    fwd = {u: (0, None, None)}
    bwd = {v: 0}
    flayers = [[u]]
    blayer = [v]
    nodes = 2
    if u == v:
        return 0, fwd, flayers, bwd, 1, False
    while flayers[-1] and blayer:
        best = None
        if len(flayers[-1]) <= len(blayer):
            d0 = len(flayers) - 1
            nxt = []
            for p in flayers[-1]:
                for k in range(K):
                    q = step(p, k)
                    if q in fwd:
                        continue
                    fwd[q] = (d0 + 1, p, k)
                    nxt.append(q)
                    nodes += 1
                    b = bwd.get(q)
                    if b is not None and (best is None or d0 + 1 + b < best):
                        best = d0 + 1 + b
                if nodes > cap:
                    return None, fwd, flayers, bwd, nodes, True
            flayers.append(nxt)
        else:
            nxt = []
            for p in blayer:
                dp = bwd[p]
                for k in range(K):
                    q = step(p, k)
                    if q in bwd:
                        continue
                    bwd[q] = dp + 1
                    nxt.append(q)
                    nodes += 1
                    f = fwd.get(q)
                    if f is not None and (best is None or f[0] + dp + 1 < best):
                        best = f[0] + dp + 1
                if nodes > cap:
                    return None, fwd, flayers, bwd, nodes, True
            blayer = nxt
        if best is not None:
            return best, fwd, flayers, bwd, nodes, False
    raise ValueError("points are not connected")


def _tree_geodesic(pres, u: FiberPoint, v: FiberPoint) -> SearchResult:
    # with Gamma trivial the bundle is the Cayley tree of F and its geodesics are unique
    c = reduce(inverse(u.word) + v.word)
    word = tuple(2 * (abs(x) - 1) + (x < 0) for x in c)
    path = [u]
    for k in word:
        path.append(pres.step(path[-1], k))
    return SearchResult(len(c), len(path), path=path, word=word)


def bundle_distance(pres: ExtensionPresentation, u: FiberPoint, v: FiberPoint, cap: int = DEFAULT_CAP) -> SearchResult:
    """Exact word-metric distance in the bundle by bidirectional breadth-first search."""
    if pres.n_generators == 0:
        res = _tree_geodesic(pres, u, v)
        return SearchResult(res.distance, res.nodes)
    d, _, _, _, nodes, overflow = _bidirectional(pres, (u.gamma, u.word), (v.gamma, v.word), cap)
    return SearchResult(d, nodes, overflow)


def bundle_geodesic(pres: ExtensionPresentation, u: FiberPoint, v: FiberPoint, cap: int = DEFAULT_CAP) -> SearchResult:
    """The shortlex-least geodesic from u to v in the ordered generators.

    Every geodesic crosses the last complete forward layer (depth h) at a point
    whose backward depth is d - h.  The least geodesic takes the least forward
    path into that set, then at each step the least generator that lowers the
    backward depth.
    """
    if pres.n_generators == 0:
        return _tree_geodesic(pres, u, v)
    d, fwd, flayers, bwd, nodes, overflow = _bidirectional(pres, (u.gamma, u.word), (v.gamma, v.word), cap)
    if overflow:
        return SearchResult(None, nodes, True)
    h = min(len(flayers) - 1, d)
    mid = next(p for p in flayers[h] if bwd.get(p) == d - h)
    path, word = [], []
    p = mid
    while p is not None:
        path.append(p)
        _, parent, k = fwd[p]
        if k is not None:
            word.append(k)
        p = parent
    path.reverse()
    word.reverse()
    p = mid
    for remaining in range(d - h, 0, -1):
        for k in range(pres.n_bundle_generators):
            q = pres._raw_step(p, k)
            if bwd.get(q) == remaining - 1:
                break
        else:
            raise AssertionError("backward depths are inconsistent")
        path.append(q)
        word.append(k)
        p = q
    return SearchResult(d, nodes, path=[FiberPoint(g, w) for g, w in path], word=tuple(word))


def projection_diameter(pres: ExtensionPresentation, points: Sequence[FiberPoint], cap: int = DEFAULT_CAP) -> int:
    gs = sorted({p.gamma for p in points})
    best = 0
    for i, g in enumerate(gs):
        for h in gs[i + 1:]:
            best = max(best, pres.gamma_distance(g, h, cap))
    return best


@dataclass
class WidthRow:
    N: int
    geodesic_length: int | None
    diameter: int | None
    nodes: int
    overflow: bool

    def as_tuple(self):
        return (self.N, self.geodesic_length, self.diameter, self.nodes, self.overflow)


def width_estimate(pres: ExtensionPresentation, a: Sequence[int], N_seq: Sequence[int],
                   cap: int = DEFAULT_CAP) -> list:
    """For each N, the Gamma-diameter of the projection of the shortlex geodesic
    from i_{a^-N} to i_{a^N} (both in the fiber over the identity)."""
    a = reduce(a)
    if not a:
        raise ValueError("width needs a nontrivial element")
    rows = []
    for N in N_seq:
        u = FiberPoint(0, reduce(inverse(a) * N))
        v = FiberPoint(0, reduce(a * N))
        res = bundle_geodesic(pres, u, v, cap)
        if res.overflow or not res.path:
            rows.append(WidthRow(N, res.distance, None, res.nodes, True))
            continue
        rows.append(WidthRow(N, res.distance, projection_diameter(pres, res.path), res.nodes, False))
    return rows


# --- orbit lengths, min-sets, flaring ---------------------------------------------------------

def unit_rose(rank: int) -> MarkedGraph:
    from fractions import Fraction

    return rose([Fraction(1, rank)] * rank)


def orbit_length(pres: ExtensionPresentation, gid: int, alpha, R: MarkedGraph):
    """len(alpha | g.R) with g acting through its lift."""
    return length_of_class(act(pres.lifts[gid], R), alpha)


@dataclass
class MinSet:
    minlen: object
    members: list  # Gamma ids with len <= 2 minlen
    table: list    # rows (id, distance from 1, witness, length)
    center: int    # minimizer with least eccentricity among minimizers


def min_set(pres: ExtensionPresentation, alpha, R: MarkedGraph, N: int) -> MinSet:
    ball = pres.gamma_ball(N)
    table = [(g, d, w, orbit_length(pres, g, alpha, R)) for g, d, w in ball]
    m = min(row[3] for row in table)
    members = [row[0] for row in table if row[3] <= 2 * m]
    argmin = [row[0] for row in table if row[3] == m]
    # rays from an off-center minimizer first run along the minimizing set before flaring
    center = min(argmin, key=lambda g: max(pres.gamma_distance(g, h) for h in argmin))
    return MinSet(m, members, table, center)


@dataclass
class FlareFit:
    rows: list          # (ray, distance, gamma id, length, contained)
    C: float
    lam: float
    r2: float

    @property
    def exponential(self) -> bool:
        return self.lam > 1


def _fit(ds, ls):
    x = np.asarray(ds, dtype=float)
    y = np.log(np.asarray(ls, dtype=float))
    if len(set(ds)) < 2:
        return float(np.exp(y.mean())) if len(y) else 0.0, 1.0, 1.0
    slope, icpt = np.polyfit(x, y, 1)
    pred = slope * x + icpt
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(np.exp(icpt)), float(np.exp(slope)), r2


def geodesic_rays(pres: ExtensionPresentation, g0: int, length: int) -> list:
    """Rays g0 s^k for each generator letter s, k = 0..length, kept while they stay geodesic.
    With no generators the only ray is the point g0."""
    if pres.n_generators == 0:
        return [(0, [g0])]
    rays = []
    for j in range(pres.n_generators):
        for e in (1, -1):
            ray = [g0]
            for _ in range(length):
                nxt = pres.transition(ray[-1], j, e)[0]
                if pres.gamma_distance(g0, nxt) != len(ray):
                    break
                ray.append(nxt)
            rays.append(((j + 1) * e, ray))
    return rays


def flare_measure(pres: ExtensionPresentation, alpha, beta, g0: int, N: int, R: MarkedGraph | None = None,
                  k: float = 0) -> FlareFit:
    """len(beta | h.R) along geodesic rays of length N out of g0, with a least-squares fit
    log len = log C + d log lambda over all rays."""
    R = R if R is not None else unit_rose(pres.rank)
    rows = []
    for name, ray in geodesic_rays(pres, g0, N):
        for d, h in enumerate(ray):
            G = act(pres.lifts[h], R)
            rows.append((name, d, h, float(length_of_class(G, beta)), almost_contained(beta, alpha, G, k)))
    if not rows:
        return FlareFit([], 0.0, 1.0, 1.0)
    C, lam, r2 = _fit([r[1] for r in rows], [r[3] for r in rows])
    return FlareFit(rows, C, lam, r2)


# --- quasiconvexity probe --------------------------------------------------------------------------

def distance_to_subgroup_orbit(pres: ExtensionPresentation, p: FiberPoint, H, cap: int = DEFAULT_CAP):
    """Bundle distance from p to the nearest i_h with h in H (over the identity fiber)."""
    def hit(q):
        return q.gamma == 0 and (not q.word or H.contains(q.word))

    if hit(p):
        return 0
    dist = {p: 0}
    q = deque([p])
    while q:
        x = q.popleft()
        for y in pres.neighbors(x):
            if y in dist:
                continue
            dist[y] = dist[x] + 1
            if hit(y):
                return dist[y]
            if len(dist) > cap:
                return None
            q.append(y)
    return None


def quasiconvexity_probe(pres: ExtensionPresentation, H, N: int, pairs: int = 10, seed: int = 0,
                         cap: int = DEFAULT_CAP) -> dict:
    """Max distance from bundle geodesics between points i_h (h in H, |h| <= N) to the orbit set."""
    words = [w for n in range(1, N + 1) for w in all_reduced_words(pres.rank, n) if H.contains(w)]
    if len(words) < 2:
        return {"N": N, "pairs": 0, "offset": 0, "overflow": False}
    rng = np.random.default_rng(seed)
    longest = [w for w in words if len(w) >= max(len(x) for x in words) - 1]
    best = 0
    overflow = False
    done = 0
    for _ in range(pairs):
        i, j = rng.choice(len(longest), size=2, replace=False)
        res = bundle_geodesic(pres, FiberPoint(0, longest[i]), FiberPoint(0, longest[j]), cap)
        if res.overflow:
            overflow = True
            continue
        done += 1
        for x in res.path:
            d = distance_to_subgroup_orbit(pres, x, H, cap)
            if d is None:
                overflow = True
            else:
                best = max(best, d)
    return {"N": N, "pairs": done, "offset": best, "overflow": overflow}


# --- atoroidality heuristic ------------------------------------------------------------------------

def periodic_classes(phi: Automorphism, max_length: int, max_power: int) -> list:
    """Classes of length <= max_length fixed (up to inversion) by some phi^k, k <= max_power.

    An empty answer is evidence of atoroidality, not a proof.
    """
    from .free_group import all_classes

    found = []
    for c in all_classes(phi.rank, max_length):
        w = c.cyclic_word
        for k in range(1, max_power + 1):
            w = phi(w)
            if ConjugacyClass(w) == c:
                found.append((c, k))
                break
            if len(cyclic_reduce(w)[0]) > 50 * max_length:
                break
    return found


def abelianization_has_infinite_order(phi: Automorphism, max_power: int = 64) -> bool:
    """Certificate of infinite order: the abelianization matrix has no power equal to I up to max_power
    and has an eigenvalue off the unit circle."""
    from .free_group import abelianization_matrix

    M = abelianization_matrix(phi)
    if np.max(np.abs(np.linalg.eigvals(M.astype(float)))) > 1 + 1e-9:
        return True
    P = np.eye(M.shape[0], dtype=np.int64)
    for _ in range(max_power):
        P = P @ M
        if np.array_equal(P, np.eye(M.shape[0], dtype=np.int64)):
            return False
    return True


__all__ = [
    "AxisDescription", "CapExceeded", "ExtensionPresentation", "FiberError", "FiberPoint", "FlareFit",
    "MinSet", "SearchResult", "WidthRow", "abelianization_has_infinite_order", "almost_contained",
    "axis_in_fiber", "bundle_distance", "bundle_geodesic", "distance_to_subgroup_orbit", "fiber_distance",
    "fiber_projection", "flare_measure", "geodesic_rays", "min_set", "on_axis", "orbit_length",
    "periodic_classes", "projection_diameter", "quasiconvexity_probe", "unit_rose", "width_estimate",
]
