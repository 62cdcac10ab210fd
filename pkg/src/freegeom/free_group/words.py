"""Reduced words and conjugacy classes in a free group of rank r.

A word is a tuple of nonzero ints: ``i`` stands for the generator x_i and
``-i`` for its inverse (1-based).  The printed form uses ``a..z`` for the
generators in rank order and upper case for inverses, so ``aB`` is the tuple
``(1, -2)``.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Iterable, Sequence

Word = tuple  # tuple[int, ...]; kept as an alias so signatures read naturally

EMPTY: Word = ()


class WordError(ValueError):
    pass


def reduce(letters: Iterable[int]) -> Word:
    """Freely reduce a letter sequence."""
    out: list[int] = []
    for x in letters:
        if x == 0:
            raise WordError("0 is not a letter")
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def inverse(w: Sequence[int]) -> Word:
    return tuple(-x for x in reversed(w))


def mul(*words: Sequence[int]) -> Word:
    out: list[int] = []
    for w in words:
        for x in w:
            if out and out[-1] == -x:
                out.pop()
            else:
                out.append(x)
    return tuple(out)


def power(w: Sequence[int], n: int) -> Word:
    if n < 0:
        w, n = inverse(w), -n
    return mul(*([tuple(w)] * n)) if n else EMPTY


def conjugate(w: Sequence[int], u: Sequence[int]) -> Word:
    """Return u w u^-1, reduced."""
    return mul(u, w, inverse(u))


def is_reduced(w: Sequence[int]) -> bool:
    return all(w[i] != -w[i + 1] for i in range(len(w) - 1))


def is_cyclically_reduced(w: Sequence[int]) -> bool:
    return is_reduced(w) and (len(w) < 2 or w[0] != -w[-1])


def cyclic_reduce(w: Sequence[int]) -> tuple[Word, Word]:
    """Split a reduced word as ``conjugator * core * conjugator^-1``.

    Returns ``(core, conjugator)`` with ``core`` cyclically reduced.  The
    trivial word gives ``((), ())``.
    """
    w = reduce(w)
    i, j = 0, len(w) - 1
    while i < j and w[i] == -w[j]:
        i += 1
        j -= 1
    return w[i:j + 1], w[:i]


def letter_key(x: int) -> int:
    # a < A < b < B < ...
    return 2 * abs(x) - (1 if x > 0 else 0)


def _least_rotation(w: Word) -> Word:
    if not w:
        return w
    keyed = [letter_key(x) for x in w]
    doubled = keyed + keyed
    n = len(w)
    best = min(range(n), key=lambda i: doubled[i:i + n])
    return w[best:] + w[:best]


def canonical_cyclic(w: Sequence[int]) -> Word:
    """Least rotation over the cyclic core of ``w`` and of its inverse."""
    core, _ = cyclic_reduce(w)
    if not core:
        return EMPTY
    r1 = _least_rotation(core)
    r2 = _least_rotation(inverse(core))
    k1 = [letter_key(x) for x in r1]
    k2 = [letter_key(x) for x in r2]
    return r1 if k1 <= k2 else r2


@dataclass(frozen=True)
class ConjugacyClass:
    """Unoriented conjugacy class; ``alpha`` and ``alpha^-1`` compare equal."""

    cyclic_word: Word
    canonical: Word = field(init=False, repr=False, compare=True)

    def __post_init__(self):
        core, _ = cyclic_reduce(self.cyclic_word)
        object.__setattr__(self, "cyclic_word", core)
        object.__setattr__(self, "canonical", canonical_cyclic(core))

    # equality/hash only through the canonical form
    def __eq__(self, other):
        if not isinstance(other, ConjugacyClass):
            return NotImplemented
        return self.canonical == other.canonical

    def __hash__(self):
        return hash(self.canonical)

    def __len__(self):
        return len(self.cyclic_word)

    @property
    def is_trivial(self) -> bool:
        return not self.cyclic_word

    def __str__(self):
        return format_word(self.canonical)


def conj_class(w: Sequence[int] | str) -> ConjugacyClass:
    if isinstance(w, str):
        w = parse_word(w)
    return ConjugacyClass(tuple(w))


# --- ASCII grammar -------------------------------------------------------

def parse_word(s: str, rank: int | None = None) -> Word:
    """Parse ``"abA"``-style text.  ``"1"``, ``"e"`` and ``""`` are the identity.

    Whitespace, ``*`` and ``.`` separators are ignored.
    """
    s = s.strip()
    if s in ("", "1", "e", "ε"):
        return EMPTY
    letters = []
    for pos, ch in enumerate(s):
        if ch in " *.\t":
            continue
        if ch in string.ascii_lowercase:
            x = ord(ch) - ord("a") + 1
        elif ch in string.ascii_uppercase:
            x = -(ord(ch) - ord("A") + 1)
        else:
            raise WordError(f"bad character {ch!r} at column {pos + 1} in {s!r}")
        if rank is not None and abs(x) > rank:
            raise WordError(f"generator {ch!r} at column {pos + 1} exceeds rank {rank}")
        letters.append(x)
    return reduce(letters)


def format_word(w: Sequence[int]) -> str:
    if not w:
        return "1"
    return "".join(
        chr(ord("a") + x - 1) if x > 0 else chr(ord("A") - x - 1) for x in w
    )


def check_rank(w: Sequence[int], rank: int) -> None:
    for x in w:
        if not 1 <= abs(x) <= rank:
            raise WordError(f"letter {x} out of range for rank {rank}")


def abelianization(w: Sequence[int], rank: int) -> tuple[int, ...]:
    v = [0] * rank
    for x in w:
        v[abs(x) - 1] += 1 if x > 0 else -1
    return tuple(v)


def all_reduced_words(rank: int, length: int) -> Iterable[Word]:
    """All reduced words of exactly the given length, in shortlex order."""
    letters = sorted([i for i in range(1, rank + 1)] + [-i for i in range(1, rank + 1)],
                     key=letter_key)

    def rec(prefix):
        if len(prefix) == length:
            yield tuple(prefix)
            return
        for x in letters:
            if prefix and prefix[-1] == -x:
                continue
            prefix.append(x)
            yield from rec(prefix)
            prefix.pop()

    yield from rec([])


def all_classes(rank: int, max_length: int) -> list[ConjugacyClass]:
    """Every nontrivial unoriented conjugacy class of length <= max_length."""
    seen: dict[Word, ConjugacyClass] = {}
    for n in range(1, max_length + 1):
        for w in all_reduced_words(rank, n):
            if not is_cyclically_reduced(w):
                continue
            c = canonical_cyclic(w)
            if c not in seen:
                seen[c] = ConjugacyClass(c)
    return list(seen.values())


def random_word(rng, rank: int, length: int) -> Word:
    """Uniform random reduced word of the given length."""
    out: list[int] = []
    while len(out) < length:
        x = int(rng.integers(1, rank + 1)) * (1 if rng.integers(0, 2) else -1)
        if out and out[-1] == -x:
            continue
        out.append(x)
    return tuple(out)
