import numpy as np
import pytest

from freegeom.free_group import Automorphism, elementary_moves, compose, identity


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def phi():
    """The infinite-order automorphism a->b, b->c, c->ab."""
    return Automorphism.parse(["b", "c", "ab"])


def random_automorphism(rng, rank=3, n_moves=6):
    moves = elementary_moves(rank)
    out = identity(rank)
    for _ in range(n_moves):
        out = compose(out, moves[int(rng.integers(len(moves)))])
    return out
