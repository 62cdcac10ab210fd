"""Automorphisms of F_r given by generator images, carried with their inverses."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .words import (
    EMPTY,
    Word,
    WordError,
    abelianization,
    check_rank,
    cyclic_reduce,
    format_word,
    inverse,
    mul,
    parse_word,
    reduce,
)


class AutomorphismError(ValueError):
    pass


def substitute(images: Sequence[Word], w: Sequence[int]) -> Word:
    """Apply the endomorphism x_i -> images[i-1] to w and reduce."""
    out: list[int] = []
    for x in w:
        img = images[x - 1] if x > 0 else _inv_cache(images[-x - 1])
        for y in img:
            if out and out[-1] == -y:
                out.pop()
            else:
                out.append(y)
    return tuple(out)


def _inv_cache(w: Word) -> Word:
    return tuple(-x for x in reversed(w))


@dataclass(frozen=True)
class Automorphism:
    """An automorphism x_i -> images[i-1], validated against ``inverse_images``.

    Construction checks that both substitutions compose to the identity in
    either order, so every instance is a genuine automorphism.
    """

    images: tuple
    inverse_images: tuple

    def __post_init__(self):
        images = tuple(reduce(w) for w in self.images)
        inv = tuple(reduce(w) for w in self.inverse_images)
        if len(images) != len(inv) or not images:
            raise AutomorphismError("images and inverse_images must have equal positive length")
        r = len(images)
        for w in images + inv:
            check_rank(w, r)
        for i in range(r):
            if substitute(images, inv[i]) != (i + 1,):
                raise AutomorphismError(
                    f"inverse check failed on generator {format_word((i + 1,))}: "
                    f"phi(phi^-1({format_word((i + 1,))})) = {format_word(substitute(images, inv[i]))}"
                )
            if substitute(inv, images[i]) != (i + 1,):
                raise AutomorphismError(
                    f"inverse check failed on generator {format_word((i + 1,))}: "
                    f"phi^-1(phi({format_word((i + 1,))})) = {format_word(substitute(inv, images[i]))}"
                )
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "inverse_images", inv)

    @property
    def rank(self) -> int:
        return len(self.images)

    def __call__(self, w: Sequence[int]) -> Word:
        return substitute(self.images, w)

    def inverse(self) -> "Automorphism":
        return Automorphism(self.inverse_images, self.images)

    def __matmul__(self, other: "Automorphism") -> "Automorphism":
        return compose(self, other)

    def __str__(self):
        return ", ".join(
            f"{format_word((i + 1,))}->{format_word(w)}" for i, w in enumerate(self.images)
        )

    @classmethod
    def from_images(cls, images: Sequence[Word | str]) -> "Automorphism":
        """Build from images alone; the inverse is found by Stallings folding."""
        from .stallings import invert_images

        imgs = [parse_word(w) if isinstance(w, str) else reduce(w) for w in images]
        inv = invert_images(imgs)
        if inv is None:
            raise AutomorphismError("images do not form a basis")
        return cls(tuple(imgs), tuple(inv))

    @classmethod
    def parse(cls, images: Sequence[str], inverse_images: Sequence[str] | None = None):
        r = len(images)
        imgs = tuple(parse_word(s, r) for s in images)
        if inverse_images is None:
            return cls.from_images(imgs)
        return cls(imgs, tuple(parse_word(s, r) for s in inverse_images))


def apply(phi: Automorphism, w: Sequence[int]) -> Word:
    return phi(w)


def compose(phi: Automorphism, psi: Automorphism) -> Automorphism:
    """phi o psi, i.e. apply psi first."""
    if phi.rank != psi.rank:
        raise AutomorphismError("rank mismatch")
    images = tuple(phi(w) for w in psi.images)
    inv = tuple(substitute(psi.inverse_images, w) for w in phi.inverse_images)
    return Automorphism(images, inv)


def identity(rank: int) -> Automorphism:
    gens = tuple((i,) for i in range(1, rank + 1))
    return Automorphism(gens, gens)


def inner(w: Sequence[int], rank: int) -> Automorphism:
    """i_w : x -> w x w^-1."""
    w = reduce(w)
    check_rank(w, rank)
    wi = inverse(w)
    images = tuple(mul(w, (i,), wi) for i in range(1, rank + 1))
    inv = tuple(mul(wi, (i,), w) for i in range(1, rank + 1))
    return Automorphism(images, inv)


def permutation(perm: Sequence[int]) -> Automorphism:
    """Signed permutation: x_i -> perm[i-1] (a signed letter)."""
    r = len(perm)
    images = tuple((p,) for p in perm)
    inv = [None] * r
    for i, p in enumerate(perm):
        inv[abs(p) - 1] = ((i + 1) * (1 if p > 0 else -1),)
    return Automorphism(images, tuple(inv))


def nielsen_move(rank: int, i: int, j: int, side: str = "right", sign: int = 1) -> Automorphism:
    """Elementary transvection x_i -> x_i x_j^sign (side='right') or x_j^sign x_i."""
    if i == j:
        raise AutomorphismError("transvection needs distinct generators")
    images = [(k,) for k in range(1, rank + 1)]
    inv = [(k,) for k in range(1, rank + 1)]
    if side == "right":
        images[i - 1] = (i, sign * j)
        inv[i - 1] = (i, -sign * j)
    else:
        images[i - 1] = (sign * j, i)
        inv[i - 1] = (-sign * j, i)
    return Automorphism(tuple(images), tuple(inv))


def elementary_moves(rank: int) -> list[Automorphism]:
    """Transvections and single-generator inversions (a generating set of Aut(F))."""
    moves = []
    for i in range(1, rank + 1):
        for j in range(1, rank + 1):
            if i == j:
                continue
            for side in ("right", "left"):
                for sign in (1, -1):
                    moves.append(nielsen_move(rank, i, j, side, sign))
    for i in range(1, rank + 1):
        moves.append(permutation([-k if k == i else k for k in range(1, rank + 1)]))
    return moves


def is_inner(phi: Automorphism) -> Word | None:
    """Return w with phi = i_w, or None.  Exact."""
    r = phi.rank
    img1 = phi.images[0]
    core, u = cyclic_reduce(img1)
    if core != (1,):
        return None
    # phi(x1) = u x1 u^-1 forces w = u x1^k for some k
    if r == 1:
        return u
    y = mul(inverse(u), phi.images[1], u)  # = x1^k x2 x1^-k
    k = 0
    while k < len(y) and y[k] in (1, -1) and y[k] == y[0]:
        k += 1
    k = k if (k and y[0] == 1) else (-k if k else 0)
    w = mul(u, (1,) * k if k >= 0 else (-1,) * (-k))
    wi = inverse(w)
    for i in range(r):
        if phi.images[i] != mul(w, (i + 1,), wi):
            return None
    return w


def abelianization_matrix(phi: Automorphism):
    import numpy as np

    r = phi.rank
    return np.array([abelianization(w, r) for w in phi.images], dtype=np.int64).T


def load_automorphism_lines(lines: Iterable[str], rank: int) -> Automorphism:
    """Parse ``a -> b`` / ``a = b`` lines into an automorphism (inverse computed)."""
    images: dict[int, Word] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "->" if "->" in line else "="
        if sep not in line:
            raise WordError(f"line {lineno}: expected 'gen -> word'")
        lhs, rhs = (s.strip() for s in line.split(sep, 1))
        g = parse_word(lhs, rank)
        if len(g) != 1 or g[0] < 0:
            raise WordError(f"line {lineno}: left side must be a generator, got {lhs!r}")
        images[g[0]] = parse_word(rhs, rank)
    missing = [format_word((i,)) for i in range(1, rank + 1) if i not in images]
    if missing:
        raise WordError(f"missing images for {', '.join(missing)}")
    return Automorphism.from_images([images[i] for i in range(1, rank + 1)])


__all__ = [
    "Automorphism",
    "AutomorphismError",
    "EMPTY",
    "apply",
    "compose",
    "identity",
    "inner",
    "is_inner",
    "nielsen_move",
    "permutation",
    "elementary_moves",
    "substitute",
    "abelianization_matrix",
    "load_automorphism_lines",
]
