"""Finite balls of the primitive loop graph and co-surface distance upper bounds.

Vertices are primitive conjugacy classes (up to inversion) of bounded length;
two are adjacent when they are jointly part of a free basis.  Each such pair
also spans an edge of the co-surface graph, so graph distances in a ball are
upper bounds for co-surface distances.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .free_group import (
    ConjugacyClass,
    all_classes,
    apply,
    are_jointly_basis,
    format_word,
    is_primitive,
)


def _word(c):
    return c.cyclic_word if isinstance(c, ConjugacyClass) else ConjugacyClass(c).cyclic_word


def pl_adjacent(alpha, beta, rank: int = 3) -> bool:
    """True iff the two primitive classes are distinct and jointly part of a free basis.

    Decided by peak reduction of the pair: the minimal total length over the
    Aut-orbit is 2 exactly for such pairs.
    """
    a, b = _word(alpha), _word(beta)
    if not is_primitive(a, rank) or not is_primitive(b, rank):
        raise ValueError("both classes must be primitive")
    return bool(are_jointly_basis(a, b, rank))


@dataclass
class PLBall:
    length_bound: int
    rank: int
    vertices: list
    adjacency: list  # sorted neighbor indices per vertex

    @property
    def edges(self) -> list:
        return [(i, j) for i, nb in enumerate(self.adjacency) for j in nb if i < j]

    def index(self, c) -> int:
        return self._index[ConjugacyClass(_word(c))]

    def __post_init__(self):
        self._index = {c: i for i, c in enumerate(self.vertices)}

    def to_text(self) -> str:
        lines = [f"# primitive loop graph ball, rank {self.rank}, length <= {self.length_bound}"]
        for c, nb in zip(self.vertices, self.adjacency):
            lines.append(f"{format_word(c.cyclic_word)}: " + " ".join(format_word(self.vertices[j].cyclic_word) for j in nb))
        return "\n".join(lines) + "\n"

    def distances_from(self, i: int) -> list:
        dist = [None] * len(self.vertices)
        dist[i] = 0
        q = deque([i])
        while q:
            v = q.popleft()
            for u in self.adjacency[v]:
                if dist[u] is None:
                    dist[u] = dist[v] + 1
                    q.append(u)
        return dist


def build_pl_ball(L: int, rank: int = 3) -> PLBall:
    """All primitive classes of length <= L and their joint-basis adjacencies."""
    verts = [c for c in all_classes(rank, L) if is_primitive(c.cyclic_word, rank)]
    adj = [[] for _ in verts]
    for i in range(len(verts)):
        for j in range(i + 1, len(verts)):
            if are_jointly_basis(verts[i].cyclic_word, verts[j].cyclic_word, rank):
                adj[i].append(j)
                adj[j].append(i)
    return PLBall(L, rank, verts, [sorted(nb) for nb in adj])


def cs_distance_upper(alpha, beta, L: int, rank: int = 3, ball: PLBall | None = None):
    """Distance between two primitive classes in the ball of radius L; an upper bound for
    their co-surface distance.  None when they are not connected inside the ball."""
    ball = ball if ball is not None else build_pl_ball(L, rank)
    try:
        i, j = ball.index(alpha), ball.index(beta)
    except KeyError:
        raise ValueError("classes must be primitive of length at most L") from None
    return ball.distances_from(i)[j]


def orbit_distance_table(phi, alpha, L: int, n_max: int, rank: int = 3) -> list:
    """Rows (n, |phi^n(alpha)|, upper bound for d(alpha, phi^n alpha)) while phi^n(alpha) fits in the ball."""
    ball = build_pl_ball(L, rank)
    w = _word(alpha)
    start = ball.index(w)
    dist = ball.distances_from(start)
    rows = []
    cur = w
    for n in range(n_max + 1):
        c = ConjugacyClass(cur)
        if len(c.cyclic_word) > L:
            break
        rows.append((n, len(c.cyclic_word), dist[ball.index(c)]))
        cur = apply(phi, cur)
    return rows
