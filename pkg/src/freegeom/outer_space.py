"""Marked metric graphs, length functions and the Lipschitz metric.

A marked graph stores its marking as one closed edge-path per generator of
F_r, based at ``base``.  Edge paths are tuples of signed 1-based edge ids:
``+k`` crosses edge k-1 from its source to its target, ``-k`` the other way.
Tightening an edge path is free reduction of that tuple, so the word
routines in ``free_group`` apply to edge paths unchanged.

The marking is inverted through a spanning tree: every non-tree edge e gives
a based loop y_e, the marking paths spell words in the y_e, and inverting
those words writes every loop of the graph back in F_r.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .free_group import (
    Automorphism,
    ConjugacyClass,
    SubgroupGraph,
    all_classes,
    cyclic_reduce,
    elementary_moves,
    compose,
    identity,
    invert_images,
    inverse,
    parse_word,
    format_word,
    reduce,
    stallings_graph,
)
from .free_group.automorphism import substitute

TOL = 1e-9


class MarkingError(ValueError):
    pass


def _exact(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


def _path_endpoints(edges, p):
    """Start and end vertex of a nonempty edge path."""
    s, d = edges[abs(p[0]) - 1]
    start = s if p[0] > 0 else d
    s, d = edges[abs(p[-1]) - 1]
    end = d if p[-1] > 0 else s
    return start, end


def _is_path(edges, p) -> bool:
    for x, y in zip(p, p[1:]):
        s, d = edges[abs(x) - 1]
        end = d if x > 0 else s
        s, d = edges[abs(y) - 1]
        if (s if y > 0 else d) != end:
            return False
    return True


@dataclass(frozen=True)
class MarkedGraph:
    """A point of Outer space: metric core graph plus marking loops.

    ``edges`` is a tuple of ``(src, dst)`` vertex pairs, ``lengths`` the
    positive edge lengths (Fractions when exact), ``marking`` r closed edge
    paths at ``base``.
    """

    n_vertices: int
    edges: tuple
    lengths: tuple
    marking: tuple
    base: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(s), int(d)) for s, d in self.edges))
        object.__setattr__(self, "lengths", tuple(_exact(x) for x in self.lengths))
        object.__setattr__(self, "marking", tuple(reduce(p) for p in self.marking))
        E, V = len(self.edges), self.n_vertices
        if len(self.lengths) != E:
            raise MarkingError("one length per edge is required")
        if any(not (x > 0) for x in self.lengths):
            raise MarkingError("edge lengths must be positive")
        for s, d in self.edges:
            if not (0 <= s < V and 0 <= d < V):
                raise MarkingError("edge endpoint out of range")
        deg = [0] * V
        for s, d in self.edges:
            deg[s] += 1
            deg[d] += 1
        if any(x < 2 for x in deg):
            raise MarkingError("graph is not a core graph (valence-1 or isolated vertex)")
        if not self._connected():
            raise MarkingError("graph is disconnected")
        if E - V + 1 != self.rank:
            raise MarkingError(f"first Betti number {E - V + 1} differs from rank {self.rank}")
        for i, p in enumerate(self.marking):
            if not p:
                raise MarkingError(f"marking loop {i + 1} is trivial")
            if any(not 1 <= abs(x) <= E for x in p) or not _is_path(self.edges, p):
                raise MarkingError(f"marking loop {i + 1} is not an edge path")
            if _path_endpoints(self.edges, p) != (self.base, self.base):
                raise MarkingError(f"marking loop {i + 1} is not closed at the basepoint")
        if self._inverse_marking() is None:
            raise MarkingError("marking loops do not generate the fundamental group")

    @property
    def rank(self) -> int:
        return len(self.marking)

    @property
    def volume(self):
        return sum(self.lengths)

    def _connected(self) -> bool:
        adj = [[] for _ in range(self.n_vertices)]
        for s, d in self.edges:
            adj[s].append(d)
            adj[d].append(s)
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return len(seen) == self.n_vertices

    # --- spanning tree and inverse marking -------------------------------
    def _tree(self):
        c = self._cache.get("tree")
        if c is None:
            parent = {self.base: None}
            q = deque([self.base])
            tree = set()
            inc = self.incidence
            while q:
                v = q.popleft()
                for x in inc[v]:
                    s, d = self.edges[abs(x) - 1]
                    u = d if x > 0 else s
                    if u not in parent:
                        parent[u] = x
                        tree.add(abs(x))
                        q.append(u)
            non_tree = [e for e in range(1, len(self.edges) + 1) if e not in tree]
            c = (parent, tree, {e: j + 1 for j, e in enumerate(non_tree)})
            self._cache["tree"] = c
        return c

    @property
    def incidence(self):
        """For each vertex, the signed edges leaving it (loops appear twice)."""
        c = self._cache.get("inc")
        if c is None:
            c = [[] for _ in range(self.n_vertices)]
            for k, (s, d) in enumerate(self.edges, start=1):
                c[s].append(k)
                c[d].append(-k)
            self._cache["inc"] = c
        return c

    def tree_path(self, v: int) -> tuple:
        """Edge path in the spanning tree from the basepoint to v."""
        parent = self._tree()[0]
        out = []
        while parent[v] is not None:
            x = parent[v]
            out.append(x)
            s, d = self.edges[abs(x) - 1]
            v = s if x > 0 else d
        return tuple(reversed(out))

    def _inverse_marking(self):
        c = self._cache.get("invmark", False)
        if c is False:
            _, _, idx = self._tree()
            ys = []
            for p in self.marking:
                ys.append(reduce((idx[abs(x)] if x > 0 else -idx[abs(x)]) for x in p if abs(x) in idx))
            c = invert_images(ys) if len(idx) == self.rank else None
            self._cache["invmark"] = c
        return c

    def loop_to_word(self, path: Sequence[int]) -> tuple:
        """The element of F_r read off a closed edge path (up to conjugacy if unbased)."""
        _, _, idx = self._tree()
        inv = self._inverse_marking()
        ys = tuple((idx[abs(x)] if x > 0 else -idx[abs(x)]) for x in path if abs(x) in idx)
        return substitute(inv, ys)

    def word_to_path(self, w: Sequence[int]) -> tuple:
        """Tightened based edge path representing w."""
        return substitute(self.marking, w)

    # --- lengths ------------------------------------------------------------
    def path_length(self, path: Iterable[int]):
        L = self.lengths
        return sum((L[abs(x) - 1] for x in path), Fraction(0) if self.is_exact else 0.0)

    @property
    def is_exact(self) -> bool:
        return all(isinstance(x, Fraction) for x in self.lengths)

    def loop_of(self, alpha) -> tuple:
        """Cyclically tightened edge loop representing a conjugacy class."""
        w = alpha.cyclic_word if isinstance(alpha, ConjugacyClass) else reduce(alpha)
        return cyclic_reduce(self.word_to_path(w))[0]

    def normalized(self) -> "MarkedGraph":
        vol = self.volume
        return MarkedGraph(self.n_vertices, self.edges, tuple(x / vol for x in self.lengths),
                           self.marking, self.base)

    def with_lengths(self, lengths) -> "MarkedGraph":
        return MarkedGraph(self.n_vertices, self.edges, tuple(lengths), self.marking, self.base)

    def float_lengths(self) -> np.ndarray:
        return np.array([float(x) for x in self.lengths])

    def smoothed(self) -> "MarkedGraph":
        """Equivalent marked graph with every valence-2 vertex other than the base erased."""
        c = self._cache.get("smooth")
        if c is not None:
            return c
        edges = {k: list(e) for k, e in enumerate(self.edges, start=1)}
        lengths = {k: x for k, x in enumerate(self.lengths, start=1)}
        marking = [list(p) for p in self.marking]
        nxt = len(edges) + 1
        while True:
            inc: dict[int, list] = {}
            for k, (a, b) in edges.items():
                inc.setdefault(a, []).append(k)
                inc.setdefault(b, []).append(-k)
            v = next((v for v, ds in sorted(inc.items())
                      if v != self.base and len(ds) == 2 and abs(ds[0]) != abs(ds[1])), None)
            if v is None:
                break
            d1, d2 = inc[v]
            far = []
            for d in (d1, d2):
                a, b = edges[abs(d)]
                far.append(b if d > 0 else a)
            e = nxt
            nxt += 1
            edges[e] = [far[0], far[1]]
            lengths[e] = lengths[abs(d1)] + lengths[abs(d2)]
            del edges[abs(d1)], edges[abs(d2)]
            marking = [_contract_pair(p, d1, d2, e) for p in marking]
        ids = sorted(edges)
        emap = {k: i + 1 for i, k in enumerate(ids)}
        verts = sorted({x for k in ids for x in edges[k]})
        vmap = {x: i for i, x in enumerate(verts)}
        c = MarkedGraph(len(verts), tuple((vmap[edges[k][0]], vmap[edges[k][1]]) for k in ids),
                        tuple(lengths[k] for k in ids),
                        tuple(tuple(emap[abs(x)] * (1 if x > 0 else -1) for x in p) for p in marking),
                        vmap[self.base])
        c._cache["smooth"] = c
        self._cache["smooth"] = c
        return c

    # --- text format --------------------------------------------------------
    def to_text(self) -> str:
        lines = [f"rank {self.rank}", f"vertices {self.n_vertices}", f"base {self.base}"]
        for (s, d), x in zip(self.edges, self.lengths):
            lines.append(f"edge {s} {d} {x if isinstance(x, Fraction) else repr(x)}")
        for p in self.marking:
            lines.append("mark " + " ".join(str(x) for x in p))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MarkedGraph":
        n = base = None
        edges, lengths, marking = [], [], []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#")[0].strip()
            if not line:
                continue
            key, *rest = line.split()
            try:
                if key == "vertices":
                    n = int(rest[0])
                elif key == "base":
                    base = int(rest[0])
                elif key == "edge":
                    edges.append((int(rest[0]), int(rest[1])))
                    lengths.append(Fraction(rest[2]) if "." not in rest[2] and "e" not in rest[2]
                                   else float(rest[2]))
                elif key == "mark":
                    marking.append(tuple(int(x) for x in rest))
                elif key != "rank":
                    raise MarkingError(f"line {lineno}: unknown key {key!r}")
            except (IndexError, ValueError) as exc:
                raise MarkingError(f"line {lineno}: {exc}") from None
        return cls(n, tuple(edges), tuple(lengths), tuple(marking), base or 0)


def _contract_pair(path, d1, d2, e):
    """Replace crossings (-d1, d2) by e and (-d2, d1) by -e in an edge path."""
    out = []
    i = 0
    while i < len(path):
        x = path[i]
        if x == -d1 and i + 1 < len(path) and path[i + 1] == d2:
            out.append(e)
            i += 2
        elif x == -d2 and i + 1 < len(path) and path[i + 1] == d1:
            out.append(-e)
            i += 2
        else:
            out.append(x)
            i += 1
    return out


# --- constructors --------------------------------------------------------------

def rose(lengths: Sequence) -> MarkedGraph:
    """Rose with one petal per generator, identity marking."""
    r = len(lengths)
    return MarkedGraph(1, tuple((0, 0) for _ in range(r)), tuple(lengths),
                       tuple((i,) for i in range(1, r + 1)))


def theta(lengths: Sequence, rank: int = 2) -> MarkedGraph:
    """Theta graph (two vertices, three edges) marked by a = e1 e2^-1, b = e1 e3^-1,
    with extra petals at vertex 0 for rank > 2."""
    edges = [(0, 1), (0, 1), (0, 1)] + [(0, 0)] * (rank - 2)
    marking = [(1, -2), (1, -3)] + [(4 + i,) for i in range(rank - 2)]
    return MarkedGraph(2, tuple(edges), tuple(lengths), tuple(marking))


def standard_marking(n_vertices: int, edges: Sequence, lengths: Sequence, twist=None,
                     base: int = 0) -> MarkedGraph:
    """Mark a graph by its spanning-tree loops, optionally precomposed with ``twist``.

    With ``twist`` an Automorphism, marking loop i spells twist(x_i) in the
    tree-loop basis.
    """
    E, V = len(edges), n_vertices
    r = E - V + 1
    # build a provisional marked graph to reuse the tree machinery
    inc = [[] for _ in range(V)]
    for k, (s, d) in enumerate(edges, start=1):
        inc[s].append(k)
        inc[d].append(-k)
    parent = {base: None}
    q = deque([base])
    tree = set()
    while q:
        v = q.popleft()
        for x in inc[v]:
            s, d = edges[abs(x) - 1]
            u = d if x > 0 else s
            if u not in parent:
                parent[u] = x
                tree.add(abs(x))
                q.append(u)

    def tpath(v):
        out = []
        while parent[v] is not None:
            x = parent[v]
            out.append(x)
            s, d = edges[abs(x) - 1]
            v = s if x > 0 else d
        return tuple(reversed(out))

    loops = []
    for k, (s, d) in enumerate(edges, start=1):
        if k not in tree:
            loops.append(reduce(tpath(s) + (k,) + inverse(tpath(d))))
    if len(loops) != r:
        raise MarkingError("graph is disconnected")
    images = twist.images if twist is not None else tuple((i,) for i in range(1, r + 1))
    marking = tuple(substitute(loops, w) for w in images)
    return MarkedGraph(V, tuple(edges), tuple(lengths), marking, base)


def random_graph_shape(rng, rank: int, n_vertices: int | None = None, max_tries: int = 10_000):
    """Random connected multigraph with first Betti number ``rank`` and all valences >= 3."""
    if n_vertices is None:
        n_vertices = int(rng.integers(1, 2 * rank - 1))
    E = rank + n_vertices - 1
    for _ in range(max_tries):
        edges = [tuple(int(v) for v in rng.integers(0, n_vertices, size=2)) for _ in range(E)]
        deg = [0] * n_vertices
        for s, d in edges:
            deg[s] += 1
            deg[d] += 1
        if min(deg) < 3:
            continue
        adj = {v: set() for v in range(n_vertices)}
        for s, d in edges:
            adj[s].add(d)
            adj[d].add(s)
        seen = {0}
        stack = [0]
        while stack:
            v = stack.pop()
            for u in adj[v] - seen:
                seen.add(u)
                stack.append(u)
        if len(seen) == n_vertices:
            return n_vertices, edges
    raise RuntimeError("failed to sample a graph shape")


def random_marked_graph(rng, rank: int = 3, n_vertices: int | None = None, twist_moves: int = 2,
                        denominator: int = 12) -> MarkedGraph:
    """Random volume-1 marked graph with rational edge lengths."""
    V, edges = random_graph_shape(rng, rank, n_vertices)
    raw = [Fraction(int(rng.integers(1, denominator + 1))) for _ in edges]
    vol = sum(raw)
    twist = identity(rank)
    moves = elementary_moves(rank)
    for _ in range(twist_moves):
        twist = compose(twist, moves[int(rng.integers(len(moves)))])
    return standard_marking(V, edges, [x / vol for x in raw], twist)


# --- length functions -------------------------------------------------------

def length_of_class(G: MarkedGraph, alpha):
    """Length of the immersed loop representing alpha in G."""
    loop = G.loop_of(alpha)
    if not loop:
        raise ValueError("the trivial class has no length")
    return G.path_length(loop)


# --- candidate loops -----------------------------------------------------------

def _rotate_to(cycle, v):
    """Rotate a cyclic edge path (given as (vertices, edges)) to start at vertex v."""
    verts, path = cycle
    i = verts.index(v)
    return path[i:] + path[:i]


def embedded_circles(G: MarkedGraph) -> list:
    """All embedded circles as (vertex list, cyclic edge path)."""
    E = len(G.edges)
    if E > 24:
        raise ValueError("embedded-circle enumeration is limited to 24 edges")
    out = []
    for mask in range(1, 1 << E):
        es = [k for k in range(1, E + 1) if mask >> (k - 1) & 1]
        deg: dict[int, int] = {}
        for k in es:
            s, d = G.edges[k - 1]
            deg[s] = deg.get(s, 0) + 1
            deg[d] = deg.get(d, 0) + 1
        if any(x != 2 for x in deg.values()):
            continue
        # walk the cycle starting at the smallest edge
        first = es[0]
        s, d = G.edges[first - 1]
        verts, path = [s], [first]
        used = {first}
        v = d
        while v != s or len(path) < len(es):
            nxt = None
            for k in es:
                if k in used:
                    continue
                a, b = G.edges[k - 1]
                if a == v:
                    nxt = (k, b)
                    break
                if b == v:
                    nxt = (-k, a)
                    break
            if nxt is None:
                break
            verts.append(v)
            path.append(nxt[0])
            used.add(abs(nxt[0]))
            v = nxt[1]
        if len(path) == len(es) and v == s:
            out.append((verts, tuple(path)))
    return out


def _arcs(G: MarkedGraph, sources: set, targets: set, forbidden_edges: set):
    """Embedded arcs from a vertex of ``sources`` to one of ``targets``, interior disjoint from both."""
    inc = G.incidence
    for p in sorted(sources):
        stack = [(p, (), {p})]
        while stack:
            v, path, seen = stack.pop()
            for x in inc[v]:
                if abs(x) in forbidden_edges:
                    continue
                s, d = G.edges[abs(x) - 1]
                u = d if x > 0 else s
                if u == v or u in seen:
                    continue
                if u in targets:
                    yield p, u, path + (x,)
                elif u not in sources:
                    stack.append((u, path + (x,), seen | {u}))


def candidate_paths(G: MarkedGraph) -> list:
    """Closed edge paths of all embedded circles, figure-eights and barbells of G.

    Paths are in the edges of ``G.smoothed()``.
    """
    G = G.smoothed()
    c = G._cache.get("cand_paths")
    if c is not None:
        return c
    circles = embedded_circles(G)
    out = [p for _, p in circles]
    for (v1, p1), (v2, p2) in combinations(circles, 2):
        e1 = {abs(x) for x in p1}
        e2 = {abs(x) for x in p2}
        if e1 & e2:
            continue
        shared = set(v1) & set(v2)
        if len(shared) == 1:
            v = shared.pop()
            a = _rotate_to((v1, p1), v)
            b = _rotate_to((v2, p2), v)
            out.append(a + b)
            out.append(a + inverse(b))
        elif not shared:
            for p, q, arc in _arcs(G, set(v1), set(v2), e1 | e2):
                a = _rotate_to((v1, p1), p)
                b = _rotate_to((v2, p2), q)
                out.append(a + arc + b + inverse(arc))
                out.append(a + arc + inverse(b) + inverse(arc))
    G._cache["cand_paths"] = out
    return out


def candidate_loops(G: MarkedGraph) -> list:
    """Candidate conjugacy classes (deduplicated, in enumeration order)."""
    G = G.smoothed()
    seen = {}
    for p in candidate_paths(G):
        c = ConjugacyClass(G.loop_to_word(p))
        seen.setdefault(c, None)
    return list(seen)


def _ratio_table(G: MarkedGraph, H: MarkedGraph):
    G = G.smoothed()
    rows = []
    for p in candidate_paths(G):
        w = G.loop_to_word(p)
        rows.append((ConjugacyClass(w), G.path_length(p), length_of_class(H, w)))
    return rows


def max_stretch(G: MarkedGraph, H: MarkedGraph):
    """(max ratio len_H/len_G over candidates of G, a maximizing class)."""
    if G.rank != H.rank:
        raise ValueError("rank mismatch")
    best, arg = None, None
    for c, lg, lh in _ratio_table(G, H):
        ratio = lh / lg
        if best is None or ratio > best:
            best, arg = ratio, c
    return best, arg


def lipschitz_distance(G: MarkedGraph, H: MarkedGraph) -> float:
    """d(G, H) = log max over candidate loops of G of len(a|H)/len(a|G)."""
    ratio, _ = max_stretch(G, H)
    return math.log(ratio)


def symmetrized_distance(G: MarkedGraph, H: MarkedGraph) -> float:
    return lipschitz_distance(G, H) + lipschitz_distance(H, G)


def brute_force_distance(G: MarkedGraph, H: MarkedGraph, max_length: int = 10) -> float:
    """log sup of length ratios over every class of word length <= max_length."""
    best = None
    for c in all_classes(G.rank, max_length):
        r = length_of_class(H, c) / length_of_class(G, c)
        if best is None or r > best:
            best = r
    return math.log(best)


def is_marked_isometric(G: MarkedGraph, H: MarkedGraph, tol: float = TOL) -> bool:
    return abs(lipschitz_distance(G, H)) <= tol and abs(lipschitz_distance(H, G)) <= tol


def thick_check(G: MarkedGraph, eps):
    """(systole >= eps, shortest class, systole); embedded circles realize the systole."""
    best, arg = None, None
    G = G.smoothed()
    for _, p in embedded_circles(G):
        L = G.path_length(p)
        if best is None or L < best:
            best, arg = L, ConjugacyClass(G.loop_to_word(p))
    return best >= eps - TOL, arg, best


# --- group action and covers -----------------------------------------------------

def act(phi: Automorphism, G: MarkedGraph) -> MarkedGraph:
    """The marked graph with length(act(phi,G), a) = length(G, phi^-1(a))."""
    if phi.rank != G.rank:
        raise ValueError("rank mismatch")
    marking = tuple(G.word_to_path(w) for w in phi.inverse_images)
    return MarkedGraph(G.n_vertices, G.edges, G.lengths, marking, G.base)


def factor_projection(G: MarkedGraph) -> list[SubgroupGraph]:
    """Free factors carried by proper connected noncontractible subgraphs of G."""
    G = G.smoothed()
    E = len(G.edges)
    if E > 24:
        raise ValueError("subgraph enumeration is limited to 24 edges")
    cores = set()
    out = []
    for mask in range(1, (1 << E) - 1):
        es = [k for k in range(1, E + 1) if mask >> (k - 1) & 1]
        core = _core_edges(G, es)
        if not core or core in cores:
            continue
        verts = {v for k in core for v in G.edges[k - 1]}
        rank = len(core) - len(verts) + 1
        if not 1 <= rank < G.rank:
            continue
        cores.add(core)
        out.append(stallings_graph(_subgraph_basis(G, core, verts), G.rank))
    return out


def _core_edges(G: MarkedGraph, es) -> frozenset | None:
    """Core of the subgraph spanned by edges ``es`` if it is connected, else None."""
    es = set(es)
    changed = True
    while changed:
        changed = False
        deg: dict[int, int] = {}
        for k in es:
            s, d = G.edges[k - 1]
            deg[s] = deg.get(s, 0) + 1
            deg[d] = deg.get(d, 0) + 1
        for k in list(es):
            s, d = G.edges[k - 1]
            if deg[s] == 1 or deg[d] == 1:
                es.discard(k)
                changed = True
    if not es:
        return None
    adj: dict[int, set] = {}
    for k in es:
        s, d = G.edges[k - 1]
        adj.setdefault(s, set()).add(d)
        adj.setdefault(d, set()).add(s)
    start = next(iter(adj))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u in adj[v] - seen:
            seen.add(u)
            stack.append(u)
    if len(seen) != len(adj):
        return None
    return frozenset(es)


def _subgraph_basis(G: MarkedGraph, es, verts) -> list:
    root = min(verts)
    to_root = G.tree_path(root)
    parent = {root: None}
    q = deque([root])
    tree = set()
    while q:
        v = q.popleft()
        for x in G.incidence[v]:
            if abs(x) not in es:
                continue
            s, d = G.edges[abs(x) - 1]
            u = d if x > 0 else s
            if u not in parent:
                parent[u] = x
                tree.add(abs(x))
                q.append(u)

    def tpath(v):
        out = []
        while parent[v] is not None:
            x = parent[v]
            out.append(x)
            s, d = G.edges[abs(x) - 1]
            v = s if x > 0 else d
        return tuple(reversed(out))

    gens = []
    for k in sorted(es):
        if k in tree:
            continue
        s, d = G.edges[k - 1]
        loop = reduce(to_root + tpath(s) + (k,) + inverse(tpath(d)) + inverse(to_root))
        gens.append(G.loop_to_word(loop))
    return gens


def _edge_group_elements(G: MarkedGraph) -> list:
    """F-element of the loop tree(s) e tree(d)^-1 for each edge (trivial on tree edges)."""
    out = []
    for k, (s, d) in enumerate(G.edges, start=1):
        loop = reduce(G.tree_path(s) + (k,) + inverse(G.tree_path(d)))
        out.append(G.loop_to_word(loop))
    return out


def cover(G: MarkedGraph, H: SubgroupGraph, normalize: bool = False) -> MarkedGraph:
    """The cover of G with fundamental group H, marked by H's spanning-tree basis."""
    if H.index == float("inf"):
        raise ValueError("cover requires a finite-index subgroup")
    if H.rank != G.rank:
        raise ValueError("rank mismatch")
    n = H.n_vertices
    gs = _edge_group_elements(G)

    def coset_after(c, w):
        return H.read(w, c)

    # vertex (v, c) -> v*n + c ; edge (k, c) -> (k-1)*n + c + 1
    edges, lengths = [], []
    for k, (s, d) in enumerate(G.edges, start=1):
        for c in range(n):
            edges.append((s * n + c, d * n + coset_after(c, gs[k - 1])))
            lengths.append(G.lengths[k - 1])
    marking = []
    for h in H.basis:
        path = G.word_to_path(h)
        c = 0
        lifted = []
        for x in path:
            k = abs(x)
            if x > 0:
                lifted.append((k - 1) * n + c + 1)
                c = coset_after(c, gs[k - 1])
            else:
                c = coset_after(c, inverse(gs[k - 1]))
                lifted.append(-((k - 1) * n + c + 1))
        if c != 0:
            raise MarkingError("lifted marking loop does not close up")
        marking.append(tuple(lifted))
    out = MarkedGraph(G.n_vertices * n, tuple(edges), tuple(lengths), tuple(marking), G.base * n)
    return out.normalized() if normalize else out


def parse_class(s: str, rank: int | None = None) -> ConjugacyClass:
    return ConjugacyClass(parse_word(s, rank))


def format_class(c: ConjugacyClass) -> str:
    return format_word(c.cyclic_word)


# --- changes of marking ------------------------------------------------------------

@dataclass(frozen=True)
class ChangeOfMarking:
    """A map G -> H sending vertices to vertices and each edge of G to an edge path of H.

    ``images[k-1]`` is the H-edge path of G-edge k (in its forward direction).
    """

    source: MarkedGraph
    target: MarkedGraph
    images: tuple

    def __post_init__(self):
        G, H = self.source, self.target
        object.__setattr__(self, "images", tuple(tuple(p) for p in self.images))
        if len(self.images) != len(G.edges):
            raise MarkingError("one image path per source edge is required")
        # vertex images must be consistent
        vimg: dict[int, int] = {}
        for k, ((s, d), p) in enumerate(zip(G.edges, self.images), start=1):
            if not p:
                continue
            if not _is_path(H.edges, p):
                raise MarkingError(f"image of edge {k} is not an edge path")
            a, b = _path_endpoints(H.edges, p)
            for v, x in ((s, a), (d, b)):
                if vimg.setdefault(v, x) != x:
                    raise MarkingError(f"images disagree at vertex {v}")
        object.__setattr__(self, "_vertex_images", vimg)

    def push_path(self, path: Sequence[int]) -> tuple:
        """Image of a G-edge path, tightened."""
        return substitute(self.images, path)

    @property
    def stretches(self) -> tuple:
        G, H = self.source, self.target
        return tuple(H.path_length(p) / G.lengths[k] for k, p in enumerate(self.images))

    @property
    def lipschitz(self):
        return max(self.stretches)

    def compose(self, other: "ChangeOfMarking") -> "ChangeOfMarking":
        """other after self."""
        return ChangeOfMarking(self.source, other.target,
                               tuple(substitute(other.images, p) for p in self.images))

    def check(self, max_length: int = 3) -> bool:
        """The map carries each marked class of length <= max_length to the target's loop."""
        G, H = self.source, self.target
        for c in all_classes(G.rank, max_length):
            img = cyclic_reduce(self.push_path(G.loop_of(c)))[0]
            if canonical_loop(img) != canonical_loop(H.loop_of(c)):
                return False
        return True


def canonical_loop(path: Sequence[int]) -> tuple:
    """Least rotation of a cyclic edge path or its reverse, for comparing loops."""
    p = tuple(path)
    if not p:
        return p
    cands = [p[i:] + p[:i] for i in range(len(p))]
    q = inverse(p)
    cands += [q[i:] + q[:i] for i in range(len(q))]
    return min(cands)
