"""Stallings folding: subgroup graphs, membership, index, and induced automorphisms.

The folding routine optionally carries *provenance*: every edge holds a word
in the original generating tuple, and folds are performed with a gauge change
at the absorbed vertex so that reading a closed path at the basepoint always
multiplies out to an expression of the element in the generators.  This is
what lets us invert automorphisms and change markings.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .automorphism import Automorphism, AutomorphismError
from .words import EMPTY, Word, check_rank, inverse, mul, reduce


class SubgroupError(ValueError):
    pass


class _Folder:
    """Mutable labelled graph used while folding."""

    def __init__(self, track: bool):
        self.track = track
        self.edges: dict[int, list] = {}  # id -> [src, dst, label>0, weight]
        self.inc: dict[int, set[int]] = {0: set()}
        self.next_v = 1
        self.next_e = 0

    def new_vertex(self) -> int:
        v = self.next_v
        self.next_v += 1
        self.inc[v] = set()
        return v

    def add_edge(self, s: int, d: int, x: int, w: Word = EMPTY):
        if x < 0:
            s, d, x, w = d, s, -x, inverse(w) if self.track else w
        e = self.next_e
        self.next_e += 1
        self.edges[e] = [s, d, x, w]
        self.inc[s].add(e)
        self.inc[d].add(e)

    def add_petal(self, word: Word, tag: Word):
        if not word:
            return
        v = 0
        for i, x in enumerate(word):
            last = i == len(word) - 1
            d = 0 if last else self.new_vertex()
            self.add_edge(v, d, x, tag if i == 0 else EMPTY)
            v = d

    def ends_at(self, v: int):
        """(label seen from v, edge id) for all edge-ends at v."""
        for e in self.inc[v]:
            s, d, x, _ = self.edges[e]
            if s == v:
                yield x, e
            if d == v:
                yield -x, e

    def _oriented(self, e: int, v: int, label: int):
        """Return (far vertex, weight read leaving v along label)."""
        s, d, x, w = self.edges[e]
        if label == x and s == v:
            return d, w
        return s, (inverse(w) if self.track else w)

    def _gauge(self, v: int, g: Word):
        if not self.track or not g:
            return
        gi = inverse(g)
        for e in self.inc[v]:
            s, d, x, w = self.edges[e]
            if s == v and d == v:
                self.edges[e][3] = mul(gi, w, g)
            elif d == v:
                self.edges[e][3] = mul(w, g)
            else:
                self.edges[e][3] = mul(gi, w)

    def _merge(self, keep: int, gone: int):
        for e in list(self.inc[gone]):
            rec = self.edges[e]
            if rec[0] == gone:
                rec[0] = keep
            if rec[1] == gone:
                rec[1] = keep
            self.inc[keep].add(e)
        del self.inc[gone]

    def _remove_edge(self, e: int):
        s, d, _, _ = self.edges.pop(e)
        self.inc[s].discard(e)
        if d in self.inc:
            self.inc[d].discard(e)

    def fold(self):
        work = deque(self.inc.keys())
        while work:
            v = work.popleft()
            if v not in self.inc:
                continue
            seen: dict[int, int] = {}
            clash = None
            for lab, e in self.ends_at(v):
                if lab in seen and seen[lab] != e:
                    clash = (lab, seen[lab], e)
                    break
                seen[lab] = e
            if clash is None:
                continue
            lab, e1, e2 = clash
            v1, w1 = self._oriented(e1, v, lab)
            v2, w2 = self._oriented(e2, v, lab)
            if v1 != v2:
                if v2 == 0:
                    v1, v2, w1, w2, e1, e2 = v2, v1, w2, w1, e2, e1
                self._gauge(v2, mul(inverse(w2), w1) if self.track else EMPTY)
                self._merge(v1, v2)
            self._remove_edge(e2)
            work.append(v1)
            work.append(v)

    def prune(self):
        """Iteratively remove non-base vertices of valence <= 1."""
        changed = True
        while changed:
            changed = False
            for v in list(self.inc):
                if v == 0:
                    continue
                deg = sum(1 for _ in self.ends_at(v))
                if deg <= 1:
                    for e in list(self.inc[v]):
                        self._remove_edge(e)
                    del self.inc[v]
                    changed = True


@dataclass(frozen=True)
class SubgroupGraph:
    """A folded core graph with basepoint 0 representing a subgroup of F_rank."""

    rank: int
    n_vertices: int
    edges: tuple  # ((src, dst, label>0), ...)
    _out: dict = field(default=None, repr=False, compare=False, hash=False)

    def __post_init__(self):
        out = {}
        for i, (s, d, x) in enumerate(self.edges):
            if (s, x) in out or (d, -x) in out:
                raise SubgroupError("graph is not folded")
            out[(s, x)] = (d, i)
            out[(d, -x)] = (s, i)
        object.__setattr__(self, "_out", out)

    # --- reading --------------------------------------------------------
    def read(self, w: Sequence[int], start: int = 0):
        v = start
        for x in w:
            nxt = self._out.get((v, x))
            if nxt is None:
                return None
            v = nxt[0]
        return v

    def contains(self, w: Sequence[int]) -> bool:
        return self.read(reduce(w)) == 0

    __contains__ = contains

    @property
    def is_full_cover(self) -> bool:
        return all(
            (v, x) in self._out
            for v in range(self.n_vertices)
            for x in list(range(1, self.rank + 1)) + list(range(-self.rank, 0))
        )

    @property
    def index(self) -> float:
        return self.n_vertices if self.is_full_cover else float("inf")

    @property
    def subgroup_rank(self) -> int:
        return len(self.edges) - self.n_vertices + 1

    def degree(self, v: int) -> int:
        return sum(1 for x in range(-self.rank, self.rank + 1) if x and (v, x) in self._out)

    # --- spanning tree basis -------------------------------------------
    def _tree(self):
        parent: dict[int, tuple[int, int]] = {0: None}
        order = [0]
        q = deque([0])
        letters = sorted(
            [x for x in range(-self.rank, self.rank + 1) if x],
            key=lambda x: 2 * abs(x) - (x > 0),
        )
        tree_edges = set()
        while q:
            v = q.popleft()
            for x in letters:
                nxt = self._out.get((v, x))
                if nxt is None:
                    continue
                u, e = nxt
                if u not in parent:
                    parent[u] = (v, x)
                    tree_edges.add(e)
                    order.append(u)
                    q.append(u)
        return parent, tree_edges

    def tree_path(self, v: int) -> Word:
        parent, _ = self._cached_tree
        path = []
        while parent[v] is not None:
            u, x = parent[v]
            path.append(x)
            v = u
        return tuple(reversed(path))

    @property
    def _cached_tree(self):
        c = self.__dict__.get("_tree_cache")
        if c is None:
            c = self._tree()
            object.__setattr__(self, "_tree_cache", c)
        return c

    @property
    def basis(self) -> tuple:
        """Free basis of the subgroup from the BFS spanning tree, one word per non-tree edge."""
        c = self.__dict__.get("_basis_cache")
        if c is None:
            _, tree = self._cached_tree
            c = []
            idx = {}
            for i, (s, d, x) in enumerate(self.edges):
                if i in tree:
                    continue
                idx[i] = len(c) + 1
                c.append(mul(self.tree_path(s), (x,), inverse(self.tree_path(d))))
            c = tuple(c)
            object.__setattr__(self, "_basis_cache", c)
            object.__setattr__(self, "_basis_index", idx)
        return c

    def express(self, w: Sequence[int]) -> Word:
        """Write an element of the subgroup as a word in ``basis`` (1-based letters)."""
        self.basis
        idx = self.__dict__["_basis_index"]
        v = 0
        out = []
        for x in reduce(w):
            nxt = self._out.get((v, x))
            if nxt is None:
                raise SubgroupError("element not in subgroup")
            u, e = nxt
            if e in idx:
                s, d, lab = self.edges[e]
                out.append(idx[e] if (x == lab and s == v) else -idx[e])
            v = u
        if v != 0:
            raise SubgroupError("element not in subgroup")
        return reduce(out)

    def coset_action(self, x: int) -> list[int]:
        """Permutation of vertices (cosets) induced by reading letter x; full covers only."""
        return [self._out[(v, x)][0] for v in range(self.n_vertices)]


def _fold(rank: int, gens: Sequence[Sequence[int]], track: bool) -> _Folder:
    f = _Folder(track)
    for i, g in enumerate(gens):
        g = reduce(g)
        check_rank(g, rank)
        f.add_petal(g, (i + 1,))
    f.fold()
    f.prune()
    return f


def _freeze(rank: int, f: _Folder) -> SubgroupGraph:
    # renumber vertices in BFS order from the base for determinism
    order = {0: 0}
    q = deque([0])
    letters = sorted([x for x in range(-rank, rank + 1) if x], key=lambda x: 2 * abs(x) - (x > 0))
    while q:
        v = q.popleft()
        ends = {lab: e for lab, e in f.ends_at(v)}
        for lab in letters:
            if lab in ends:
                u, _ = f._oriented(ends[lab], v, lab)
                if u not in order:
                    order[u] = len(order)
                    q.append(u)
    edges = sorted((order[s], order[d], x) for s, d, x, _ in f.edges.values())
    return SubgroupGraph(rank, len(order), tuple(edges))


def stallings_graph(gens: Sequence[Sequence[int]], rank: int) -> SubgroupGraph:
    """Folded core graph of the subgroup generated by ``gens``."""
    return _freeze(rank, _fold(rank, gens, track=False))


def invert_images(images: Sequence[Sequence[int]]) -> list[Word] | None:
    """Given images u_1..u_r of a basis, return words w_j with w_j(u) = x_j.

    Returns None when the u_i do not form a free basis.
    """
    r = len(images)
    f = _fold(r, images, track=True)
    if len(f.inc) != 1:
        return None
    loops: dict[int, Word] = {}
    for e, (s, d, x, w) in f.edges.items():
        if x in loops:
            return None
        loops[x] = w
    if sorted(loops) != list(range(1, r + 1)):
        return None
    return [reduce(loops[j]) for j in range(1, r + 1)]


def express_in_generators(gens: Sequence[Sequence[int]], w: Sequence[int], rank: int) -> Word | None:
    """Write w as a word in ``gens`` (letters are 1-based generator indices), or None."""
    f = _fold(rank, gens, track=True)
    v = 0
    out: list[int] = []
    for x in reduce(w):
        ends = {lab: e for lab, e in f.ends_at(v)}
        if x not in ends:
            return None
        v, wt = f._oriented(ends[x], v, x)
        out.extend(wt)
    if v != 0:
        return None
    return reduce(out)


def induced_automorphism(phi: Automorphism, H: SubgroupGraph) -> Automorphism:
    """phi restricted to H, written in H's spanning-tree basis."""
    basis = H.basis
    try:
        images = tuple(H.express(phi(h)) for h in basis)
        inv = tuple(H.express(phi.inverse()(h)) for h in basis)
    except SubgroupError:
        raise SubgroupError("subgroup not preserved") from None
    try:
        return Automorphism(images, inv)
    except AutomorphismError:
        raise SubgroupError("subgroup not preserved") from None
