"""Whitehead's algorithm: length minimization, primitivity and simplicity tests."""
from __future__ import annotations

import itertools
from collections import deque
from functools import lru_cache
from math import gcd
from typing import Sequence

import numpy as np

from .automorphism import Automorphism, substitute
from .words import (
    ConjugacyClass,
    Word,
    abelianization,
    canonical_cyclic,
    cyclic_reduce,
    reduce,
)


class BudgetExceeded(RuntimeError):
    """A search ran out of its node budget before reaching a decision."""


def _letters(rank: int) -> list[int]:
    return [x for i in range(1, rank + 1) for x in (i, -i)]


def whitehead_automorphism(rank: int, cut: frozenset, a: int) -> Automorphism:
    """The Whitehead automorphism (A, a): A contains a but not a^-1."""
    images = []
    for i in range(1, rank + 1):
        if i == abs(a):
            images.append((i,))
            continue
        img = [i]
        if i in cut:
            img.append(a)
        if -i in cut:
            img.insert(0, -a)
        images.append(tuple(img))
    inv_cut = (cut - {a}) | {-a}
    inv = []
    for i in range(1, rank + 1):
        if i == abs(a):
            inv.append((i,))
            continue
        img = [i]
        if i in inv_cut:
            img.append(-a)
        if -i in inv_cut:
            img.insert(0, a)
        inv.append(tuple(img))
    return Automorphism(tuple(images), tuple(inv))


@lru_cache(maxsize=None)
def whitehead_automorphisms(rank: int) -> tuple:
    """All nontrivial non-inner Whitehead automorphisms of the second kind."""
    out = []
    letters = _letters(rank)
    for a in letters:
        rest = [x for x in letters if x not in (a, -a)]
        for k in range(len(rest) + 1):
            for sub in itertools.combinations(rest, k):
                if k == 0 or k == len(rest):
                    continue
                cut = frozenset((a,) + sub)
                out.append(((cut, a), whitehead_automorphism(rank, cut, a)))
    return tuple(out)


@lru_cache(maxsize=None)
def signed_permutations(rank: int) -> tuple:
    out = []
    for perm in itertools.permutations(range(1, rank + 1)):
        for signs in itertools.product((1, -1), repeat=rank):
            out.append(tuple(((p * s),) for p, s in zip(perm, signs)))
    return tuple(out)


def _cyc(w: Word) -> Word:
    return cyclic_reduce(w)[0]


def _total(ws: Sequence[Word]) -> int:
    return sum(len(w) for w in ws)


def _lidx(x: int) -> int:
    return 2 * (abs(x) - 1) + (x < 0)


@lru_cache(maxsize=None)
def _cut_table(rank: int):
    autos = whitehead_automorphisms(rank)
    C = np.zeros((len(autos), 2 * rank), dtype=np.int64)
    a_idx = np.zeros(len(autos), dtype=np.int64)
    for k, ((cut, a), _) in enumerate(autos):
        for x in cut:
            C[k, _lidx(x)] = 1
        a_idx[k] = _lidx(a)
    return C, a_idx


def _graph_matrix(ws: Sequence[Word], rank: int) -> np.ndarray:
    M = np.zeros((2 * rank, 2 * rank), dtype=np.int64)
    for w in ws:
        n = len(w)
        for i in range(n):
            x, y = w[i], w[(i + 1) % n]
            M[_lidx(x), _lidx(-y)] += 1
            M[_lidx(-y), _lidx(x)] += 1
    return M


def length_changes(ws: Sequence[Word], rank: int) -> np.ndarray:
    """Change of total cyclic length under each Whitehead automorphism.

    Uses the classical count: capacity of the cut in the Whitehead graph minus
    the degree of the multiplier letter.
    """
    C, a_idx = _cut_table(rank)
    M = _graph_matrix(ws, rank)
    cap = ((C @ M) * (1 - C)).sum(axis=1)
    deg = M.sum(axis=1)[a_idx]
    return cap - deg


def whitehead_minimize(classes: Sequence[ConjugacyClass | Word], rank: int):
    """Greedy peak reduction of a tuple of conjugacy classes.

    Returns ``(minimized classes, total length, moves)`` where ``moves`` lists
    the ``(cut, letter)`` pairs applied, in order.
    """
    ws = [_cyc(c.cyclic_word if isinstance(c, ConjugacyClass) else reduce(c)) for c in classes]
    if any(not w for w in ws):
        raise ValueError("trivial class in tuple")
    autos = whitehead_automorphisms(rank)
    moves = []
    while True:
        delta = length_changes(ws, rank)
        k = int(np.argmin(delta))
        if delta[k] >= 0:
            break
        key, phi = autos[k]
        ws = [_cyc(substitute(phi.images, w)) for w in ws]
        moves.append(key)
    return tuple(ConjugacyClass(w) for w in ws), _total(ws), moves


def _canonical_tuple(ws: Sequence[Word], rank: int) -> tuple:
    """Canonical form of an ordered tuple of classes up to signed permutations."""
    best = None
    for perm in signed_permutations(rank):
        cand = tuple(canonical_cyclic(substitute(perm, w)) for w in ws)
        if best is None or cand < best:
            best = cand
    return best


def minimal_orbit(classes: Sequence[ConjugacyClass | Word], rank: int, budget: int = 100_000,
                  stop=None):
    """Breadth-first search over the minimal-length Whitehead orbit.

    Yields nothing; returns the set of canonical tuples visited, or the first
    tuple satisfying ``stop`` (returned as ``("found", tuple)``).
    Raises BudgetExceeded when more than ``budget`` tuples would be visited.
    """
    mins, total, _ = whitehead_minimize(classes, rank)
    start = tuple(c.cyclic_word for c in mins)
    if stop is not None and stop(start):
        return ("found", start)
    autos = whitehead_automorphisms(rank)
    seen = {_canonical_tuple(start, rank)}
    q = deque([start])
    while q:
        ws = q.popleft()
        for _, phi in autos:
            new = tuple(_cyc(substitute(phi.images, w)) for w in ws)
            if _total(new) != total:
                continue
            key = _canonical_tuple(new, rank)
            if key in seen:
                continue
            if stop is not None and stop(new):
                return ("found", new)
            seen.add(key)
            if len(seen) > budget:
                raise BudgetExceeded(f"Whitehead orbit search exceeded {budget} nodes")
            q.append(new)
    return ("exhausted", seen)


def _is_primitive_vector(v) -> bool:
    g = 0
    for x in v:
        g = gcd(g, abs(x))
    return g == 1


def is_primitive(w: Sequence[int], rank: int) -> bool:
    w = reduce(w)
    if not w:
        raise ValueError("the trivial word is not primitive or imprimitive")
    if not _is_primitive_vector(abelianization(w, rank)):
        return False
    _, total, _ = whitehead_minimize([w], rank)
    return total == 1


def whitehead_graph(w: Sequence[int], rank: int) -> dict[int, set[int]]:
    """Whitehead graph of the cyclic word w: an edge {x, y^-1} for each cyclic subword xy."""
    w = _cyc(reduce(w))
    g: dict[int, set[int]] = {x: set() for x in _letters(rank)}
    n = len(w)
    for i in range(n):
        x, y = w[i], w[(i + 1) % n]
        if n == 1:
            y = x
        g[x].add(-y)
        g[-y].add(x)
    return g


def _connected(g: dict[int, set[int]], removed=None) -> bool:
    verts = [v for v in g if v != removed]
    if not verts:
        return True
    seen = {verts[0]}
    stack = [verts[0]]
    while stack:
        v = stack.pop()
        for u in g[v]:
            if u != removed and u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(verts)


def has_cut_vertex(g: dict[int, set[int]]) -> bool:
    return any(not _connected(g, v) for v in g)


def is_simple(w: Sequence[int], rank: int, budget: int = 100_000) -> bool:
    """True iff w lies in a proper free factor of F_rank."""
    w = reduce(w)
    if not w:
        raise ValueError("the trivial word has no simplicity status")
    mins, total, _ = whitehead_minimize([w], rank)
    m = mins[0].cyclic_word
    if total == 1:
        return True

    def omits(ws):
        used = {abs(x) for x in ws[0]}
        return len(used) < rank

    if omits((m,)):
        return True
    g = whitehead_graph(m, rank)
    if _connected(g) and not has_cut_vertex(g):
        return False
    status, _ = minimal_orbit([m], rank, budget=budget, stop=omits)
    return status == "found"


def are_jointly_basis(u: Sequence[int], v: Sequence[int], rank: int):
    """Do some conjugates of u and v extend to a common free basis?"""
    mins, total, _ = whitehead_minimize([u, v], rank)
    if total != 2:
        return False
    a, b = mins[0].cyclic_word, mins[1].cyclic_word
    return abs(a[0]) != abs(b[0])
