"""Finite-scale coarse geometry on weighted graphs.

Distances come from one all-pairs shortest-path computation.  Every sup-type
quantity is computed exhaustively below a size budget and by seeded sampling
above it; sampled values are lower estimates and say so.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

TRIPLE_BUDGET = 300
QUAD_BUDGET = 64


@dataclass(frozen=True)
class Estimate:
    value: float
    exhaustive: bool

    @property
    def label(self) -> str:
        return "exact" if self.exhaustive else "lower estimate"


class FiniteMetricGraph:
    """Connected graph with positive edge weights and its path metric."""

    def __init__(self, n: int, edges):
        self.n = int(n)
        self.edges = tuple((int(u), int(v), w) for u, v, w in edges)
        if self.n < 1:
            raise ValueError("graph needs a vertex")
        for u, v, w in self.edges:
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) has an endpoint out of range")
            if not w > 0:
                raise ValueError("edge weights must be positive")
        rows = [u for u, v, _ in self.edges] + [v for u, v, _ in self.edges]
        cols = [v for u, v, _ in self.edges] + [u for u, v, _ in self.edges]
        ws = [float(w) for *_, w in self.edges] * 2
        A = csr_matrix((ws, (rows, cols)), shape=(self.n, self.n))
        if connected_components(A, directed=False)[0] != 1:
            raise ValueError("graph is not connected")
        # csr_matrix sums parallel edges, so keep the lightest one explicitly
        best: dict = {}
        for u, v, w in self.edges:
            if u != v:
                key = (min(u, v), max(u, v))
                best[key] = min(best.get(key, math.inf), float(w))
        r = [a for a, b in best] + [b for a, b in best]
        c = [b for a, b in best] + [a for a, b in best]
        A = csr_matrix((list(best.values()) * 2, (r, c)), shape=(self.n, self.n))
        self.dist = shortest_path(A, directed=False)
        self.dist.setflags(write=False)

    @classmethod
    def unweighted(cls, n, pairs):
        return cls(n, [(u, v, 1) for u, v in pairs])

    @classmethod
    def from_text(cls, text: str):
        """Edge-list text: a first line ``n``, then ``u v [w]`` per line; # starts a comment."""
        lines = [ln.split("#")[0].split() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        n = int(lines[0][0])
        edges = [(int(ln[0]), int(ln[1]), float(ln[2]) if len(ln) > 2 else 1) for ln in lines[1:]]
        return cls(n, edges)

    def to_text(self) -> str:
        return "\n".join([str(self.n)] + [f"{u} {v} {w}" for u, v, w in self.edges]) + "\n"

    def d(self, x, y) -> float:
        return float(self.dist[x, y])

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    def geodesic_hull(self, a, c) -> np.ndarray:
        """Vertices lying on some geodesic from a to c."""
        D = self.dist
        return np.flatnonzero(np.abs(D[a] + D[:, c] - D[a, c]) <= 1e-9)

    def geodesic(self, a, c) -> list:
        """One geodesic vertex sequence from a to c, lexicographically least at each step."""
        D = self.dist
        path = [a]
        nbrs = self._neighbors()
        while path[-1] != c:
            x = path[-1]
            nxt = min(y for y, w in nbrs[x] if abs(w + D[y, c] - D[x, c]) <= 1e-9)
            path.append(nxt)
        return path

    def _neighbors(self):
        if not hasattr(self, "_nbrs"):
            nb = [[] for _ in range(self.n)]
            for u, v, w in self.edges:
                nb[u].append((v, float(w)))
                nb[v].append((u, float(w)))
            self._nbrs = nb
        return self._nbrs


@dataclass(frozen=True)
class CoarseMap:
    """Vertex assignment between finite metric graphs."""

    source: FiniteMetricGraph
    target: FiniteMetricGraph
    assignment: tuple = field()

    def __post_init__(self):
        a = tuple(int(x) for x in self.assignment)
        if len(a) != self.source.n:
            raise ValueError("assignment must be total on source vertices")
        if any(not 0 <= x < self.target.n for x in a):
            raise ValueError("assignment hits a vertex outside the target")
        object.__setattr__(self, "assignment", a)

    def pulled_back(self) -> np.ndarray:
        """Target distances between images, indexed by source vertices."""
        idx = np.array(self.assignment)
        return self.target.dist[np.ix_(idx, idx)]

    def compose(self, other: "CoarseMap") -> "CoarseMap":
        """self after other."""
        if other.target is not self.source:
            raise ValueError("maps are not composable")
        return CoarseMap(other.source, self.target, tuple(self.assignment[x] for x in other.assignment))

    @property
    def lipschitz(self) -> float:
        D = self.target.dist
        a = self.assignment
        return max([D[a[u], a[v]] / float(w) for u, v, w in self.source.edges] + [0.0])


def identity_map(g: FiniteMetricGraph) -> CoarseMap:
    return CoarseMap(g, g, tuple(range(g.n)))


def constant_map(g: FiniteMetricGraph, h: FiniteMetricGraph, v: int = 0) -> CoarseMap:
    return CoarseMap(g, h, (v,) * g.n)


def collapse_map(g: FiniteMetricGraph, edge_indices) -> CoarseMap:
    """Quotient map collapsing the given edges (indices into g.edges) to points."""
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i in edge_indices:
        u, v, _ = g.edges[i]
        parent[find(u)] = find(v)
    roots = sorted({find(x) for x in range(g.n)})
    label = {r: i for i, r in enumerate(roots)}
    assignment = tuple(label[find(x)] for x in range(g.n))
    kept = [(assignment[u], assignment[v], w) for i, (u, v, w) in enumerate(g.edges)
            if assignment[u] != assignment[v]]
    return CoarseMap(g, FiniteMetricGraph(len(roots), kept), assignment)


# --- Gromov products, four-point delta, alignment --------------------------------------

def gromov_product(g: FiniteMetricGraph, x, y, base) -> float:
    """(x|y)_base = (d(base,x) + d(base,y) - d(x,y)) / 2."""
    return (g.d(base, x) + g.d(base, y) - g.d(x, y)) / 2


def delta_fourpoint(g: FiniteMetricGraph, budget: int = QUAD_BUDGET, samples: int = 200_000,
                    seed: int = 0) -> Estimate:
    """Four-point hyperbolicity constant: max over quadruples of half the gap between
    the two largest pairings.  Exhaustive up to ``budget`` vertices."""
    D = g.dist
    n = g.n
    if n <= budget:
        best = 0.0
        for x in range(n):
            # all (y, z, w) at once for this x
            a = D[x][:, None, None] + D[None, :, :]                        # d(x,y) + d(z,w): [y,z,w]
            b = D[x][None, :, None] + D[:, None, :]                        # d(x,z) + d(y,w)
            c = D[x][None, None, :] + D[:, :, None]                        # d(x,w) + d(y,z)
            s = np.sort(np.stack([a, b, c]), axis=0)
            best = max(best, float((s[2] - s[1]).max()) / 2)
        return Estimate(best, True)
    rng = np.random.default_rng(seed)
    q = rng.integers(n, size=(samples, 4))
    x, y, z, w = q.T
    s = np.sort(np.stack([D[x, y] + D[z, w], D[x, z] + D[y, w], D[x, w] + D[y, z]]), axis=0)
    return Estimate(float((s[2] - s[1]).max()) / 2, False)


def aligned(g: FiniteMetricGraph, a, b, c, K) -> bool:
    """d(a,b) + d(b,c) <= d(a,c) + K."""
    return g.d(a, b) + g.d(b, c) <= g.d(a, c) + K + 1e-12


def alignment_constant(p: CoarseMap, K_in: float = 0, budget: int = TRIPLE_BUDGET,
                       samples: int = 500_000, seed: int = 0) -> Estimate:
    """Max image alignment defect d'(pa,pb) + d'(pb,pc) - d'(pa,pc) over K_in-aligned triples."""
    D = p.source.dist
    E = p.pulled_back()
    best = 0.0
    if p.source.n <= budget:
        for a in range(p.source.n):
            src = D[a][:, None] + D - D[a][None, :]      # [b, c]: d(a,b) + d(b,c) - d(a,c)
            img = E[a][:, None] + E - E[a][None, :]
            mask = src <= K_in + 1e-12
            if mask.any():
                best = max(best, float(img[mask].max()))
        return Estimate(best, True)
    a, b, c = np.random.default_rng(seed).integers(p.source.n, size=(samples, 3)).T
    mask = D[a, b] + D[b, c] - D[a, c] <= K_in + 1e-12
    if mask.any():
        best = max(best, float((E[a, b] + E[b, c] - E[a, c])[mask].max()))
    return Estimate(best, False)


def max_offset_from_geodesics(g: FiniteMetricGraph, L: float) -> float:
    """Max over L-aligned triples (a,b,c) of the distance from b to the union of geodesics [a,c]."""
    D = g.dist
    n = g.n
    best = 0.0
    for a in range(n):
        for c in range(n):
            hull = g.geodesic_hull(a, c)
            off = D[:, hull].min(axis=1)
            mask = D[a] + D[:, c] - D[a, c] <= L + 1e-12
            best = max(best, float(off[mask].max()))
    return best


def composition_alignment_report(p: CoarseMap, q: CoarseMap) -> dict:
    """Explicit chain bounding the alignment constant of p after q.

    q sends aligned triples to K_q-aligned ones; a K_q-aligned middle point lies
    within D(K_q) of a geodesic between the outer points; p moves it by at most
    Lip(p) D(K_q).  Hence K(p q) <= K_p + 2 Lip(p) D(K_q).  In a delta-thin
    space D(L) <= 6 delta + L, reported alongside with the four-point delta.
    """
    K_q = alignment_constant(q, 0).value
    K_p = alignment_constant(p, 0).value
    lip = p.lipschitz
    offset = max_offset_from_geodesics(p.source, K_q)
    delta = delta_fourpoint(p.source).value
    measured = alignment_constant(p.compose(q), 0).value
    bound = K_p + 2 * lip * offset
    return {
        "K_q": K_q, "K_p": K_p, "lip_p": lip, "offset": offset, "delta": delta,
        "thin_offset_bound": 6 * delta + K_q, "bound": bound, "measured": measured,
        "holds": measured <= bound + 1e-9,
    }


# --- properness and quasi-isometry constants ----------------------------------------------

def properness_profile(p: CoarseMap) -> list:
    """Rows (D, C(D)): the least image distance over source pairs at distance >= D,
    for each source distance D that occurs."""
    D = p.source.dist
    E = p.pulled_back()
    iu = np.triu_indices(p.source.n, 1)
    d, e = D[iu], E[iu]
    if d.size == 0:
        return [(0.0, 0.0)]
    order = np.argsort(d, kind="stable")
    d, e = d[order], e[order]
    suffix = np.minimum.accumulate(e[::-1])[::-1]
    values, first = np.unique(d, return_index=True)
    return [(0.0, 0.0)] + [(float(v), float(suffix[i])) for v, i in zip(values, first)]


@dataclass(frozen=True)
class QIFit:
    K: float            # least K with d/K - K <= d' <= K d + K over all pairs
    multiplicative: float  # least lambda with d/lambda <= d' <= lambda d, over pairs with d, d' > 0


def qi_constants_fit(p: CoarseMap) -> QIFit:
    D = p.source.dist
    E = p.pulled_back()
    iu = np.triu_indices(p.source.n, 1)
    d, e = D[iu], E[iu]
    if d.size == 0:
        return QIFit(1.0, 1.0)
    # per pair: K >= e/(d+1) and K^2 + e K - d >= 0
    upper = e / (d + 1)
    lower = (-e + np.sqrt(e * e + 4 * d)) / 2
    K = max(1.0, float(upper.max()), float(lower.max()))
    pos = (d > 0) & (e > 0)
    if (d > 0).any() and not pos.all():
        lam = math.inf
    else:
        lam = max(1.0, float((e[pos] / d[pos]).max()), float((d[pos] / e[pos]).max()))
    return QIFit(K, lam)


def barycenter(g: FiniteMetricGraph, a, b, c):
    """Vertex minimizing the largest distance to the three sides (chosen geodesics) of a triangle."""
    sides = [g.geodesic(a, b), g.geodesic(b, c), g.geodesic(c, a)]
    D = g.dist
    worst = np.max(np.stack([D[:, s].min(axis=1) for s in sides]), axis=0)
    v = int(np.argmin(worst))
    return v, float(worst[v])
