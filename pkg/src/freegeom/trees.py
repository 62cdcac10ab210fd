"""Axes of conjugacy classes in the universal cover of a marked graph.

Two axes in the universal cover overlap in a segment made of whole edges, and
that segment projects to a path along which the periodic edge lines of both
classes agree.  Overlaps are therefore computed as common runs of the two
periodic lines, with no explicit tree.
"""
from __future__ import annotations

from .free_group import inverse
from .outer_space import MarkedGraph, length_of_class


def axis_overlap(beta, alpha, G: MarkedGraph):
    """Longest overlap of an axis of beta with an axis of alpha, capped at one period of beta.

    Returns (length, full) where ``full`` means a whole fundamental domain of
    beta lies on an axis of alpha.
    """
    lb = G.loop_of(beta)
    la = G.loop_of(alpha)
    if not lb or not la:
        raise ValueError("trivial class")
    L = G.lengths
    nb = len(lb)
    best = 0
    for line in (la, inverse(la)):
        na = len(line)
        for i in range(na):
            for j in range(nb):
                acc = 0
                n = 0
                while n < nb and line[(i + n) % na] == lb[(j + n) % nb]:
                    acc += L[abs(lb[(j + n) % nb]) - 1]
                    n += 1
                if n == nb:
                    return acc, True
                best = max(best, acc)
    return best, False


def almost_contained(beta, alpha, G: MarkedGraph, k) -> bool:
    """Whether beta is k-almost contained in alpha at G.

    True iff some axes of the two classes overlap in length >= len(beta|G) - k.
    """
    length = length_of_class(G, beta)
    if k >= length:
        return True
    overlap, full = axis_overlap(beta, alpha, G)
    return full or overlap >= length - k - 1e-12
