from collections import deque
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freegeom.free_group import (
    Automorphism,
    AutomorphismError,
    BudgetExceeded,
    ConjugacyClass,
    SubgroupError,
    all_reduced_words,
    compose,
    conj_class,
    cyclic_reduce,
    elementary_moves,
    format_word,
    identity,
    induced_automorphism,
    inner,
    inverse,
    is_inner,
    is_primitive,
    is_simple,
    load_automorphism_lines,
    mul,
    parse_word as W,
    random_word,
    reduce,
    stallings_graph,
    whitehead_minimize,
)
from freegeom.free_group.whitehead import whitehead_automorphisms, _cyc
from freegeom.free_group.automorphism import substitute

from conftest import random_automorphism

words = st.lists(st.sampled_from([1, -1, 2, -2, 3, -3]), max_size=20).map(reduce)


def test_reduce_examples():
    assert reduce(W("a") + W("b") + W("B") + W("c")) == W("ac")
    assert reduce((1, -1)) == ()


def test_parse_and_format_round_trip():
    for s in ["a", "abC", "CBA", "aabAb"]:
        assert format_word(W(s)) == s
    with pytest.raises(ValueError):
        W("a1")
    with pytest.raises(ValueError):
        W("d", rank=3)


def test_word_times_inverse(rng):
    for _ in range(1000):
        w = random_word(rng, 3, int(rng.integers(0, 65)))
        assert mul(w, inverse(w)) == ()


@given(words)
def test_reduce_idempotent(w):
    assert reduce(w) == w
    core, _ = cyclic_reduce(w)
    assert len(core) <= len(w)


def test_cyclic_reduce_examples():
    assert cyclic_reduce(W("abA")) == (W("b"), W("a"))
    assert cyclic_reduce(W("ab")) == (W("ab"), ())
    assert cyclic_reduce(()) == ((), ())


def test_cyclic_reduce_random(rng):
    for _ in range(1000):
        u = random_word(rng, 3, int(rng.integers(0, 8)))
        c = random_word(rng, 3, int(rng.integers(1, 8)))
        if len(c) > 1 and c[0] == -c[-1]:
            continue
        w = mul(u, c, inverse(u))
        core, conj = cyclic_reduce(w)
        assert mul(conj, core, inverse(conj)) == w
        assert ConjugacyClass(core) == ConjugacyClass(c)


def test_conjugacy_class_canonical():
    assert conj_class("ab") == conj_class("ba") == conj_class("BA")
    assert conj_class("abA") == conj_class("b")
    assert conj_class("ab") != conj_class("aB")
    assert hash(conj_class("abc")) == hash(conj_class("cab"))


def test_apply_examples(phi):
    assert phi(W("ac")) == W("bab")
    assert identity(3)(W("abC")) == W("abC")


def test_automorphism_requires_valid_inverse():
    with pytest.raises(AutomorphismError, match="generator a"):
        Automorphism((W("b"), W("c"), W("ab")), (W("c"), W("a"), W("b")))
    with pytest.raises(AutomorphismError):
        Automorphism.from_images([W("aa"), W("b"), W("c")])


def test_from_images_matches_known_inverse(phi):
    assert phi.inverse().images == (W("cA"), W("a"), W("b"))


def test_apply_inverse_and_homomorphism(rng, phi):
    for _ in range(300):
        u = random_word(rng, 3, 8)
        v = random_word(rng, 3, 8)
        assert phi(phi.inverse()(u)) == u
        assert phi(mul(u, v)) == mul(phi(u), phi(v))


def test_compose_laws(rng, phi):
    assert compose(phi, phi.inverse()) == identity(3)
    assert compose(identity(3), phi) == phi
    for _ in range(50):
        f, g, h = (random_automorphism(rng, 3, 4) for _ in range(3))
        assert compose(compose(f, g), h) == compose(f, compose(g, h))
        w = random_word(rng, 3, 6)
        assert compose(f, g)(w) == f(g(w))


def test_is_inner(rng, phi):
    assert is_inner(inner(W("a"), 3)) == W("a")
    assert is_inner(phi) is None
    for _ in range(500):
        w = random_word(rng, 3, int(rng.integers(0, 12)))
        assert is_inner(inner(w, 3)) == w


def test_conjugation_identity(rng):
    # phi i_x phi^-1 = i_phi(x)
    for _ in range(100):
        f = random_automorphism(rng, 3, 5)
        x = random_word(rng, 3, 5)
        assert is_inner(compose(compose(f, inner(x, 3)), f.inverse())) == f(x)


def test_load_automorphism_lines():
    f = load_automorphism_lines(["a -> b", "b -> c  # comment", "c -> ab"], 3)
    assert f.inverse_images == (W("cA"), W("a"), W("b"))


# --- Whitehead ------------------------------------------------------------

def test_whitehead_minimize_examples():
    m, total, _ = whitehead_minimize([W("a")], 3)
    assert total == 1 and m[0] == conj_class("a")
    m, total, _ = whitehead_minimize([W("abA")], 3)
    assert total == 1 and m[0] == conj_class("b")


def test_whitehead_never_increases_and_is_stable(rng):
    for _ in range(200):
        w = random_word(rng, 3, 10)
        if not _cyc(w):
            continue
        m, total, _ = whitehead_minimize([w], 3)
        assert total <= len(_cyc(w))
        assert whitehead_minimize(m, 3)[1] == total


def _bounded_orbit_reaches_length_one(w, rank, max_len):
    """Oracle: exhaustive Whitehead-orbit BFS restricted to cyclic length <= max_len."""
    start = _cyc(w)
    seen = {start}
    q = deque([start])
    autos = [phi for _, phi in whitehead_automorphisms(rank)]
    while q:
        u = q.popleft()
        if len(u) == 1:
            return True
        for phi in autos:
            v = _cyc(substitute(phi.images, u))
            if len(v) <= max_len and v not in seen:
                seen.add(v)
                q.append(v)
    return False


def test_primitivity_examples():
    assert is_primitive(W("a"), 3)
    assert not is_primitive(W("aa"), 3)
    w = W("aabAb")
    assert is_primitive(w, 3) == _bounded_orbit_reaches_length_one(w, 3, len(w))
    with pytest.raises(ValueError):
        is_primitive((), 3)


def test_primitivity_matches_bounded_orbit_oracle():
    for n in range(1, 5):
        for w in all_reduced_words(3, n):
            if len(_cyc(w)) != n:
                continue
            assert is_primitive(w, 3) == _bounded_orbit_reaches_length_one(w, 3, n), w


def test_primitive_images_of_nielsen_products(rng):
    for _ in range(200):
        f = random_automorphism(rng, 3, int(rng.integers(1, 7)))
        assert is_primitive(f((1,)), 3)
        assert whitehead_minimize([f((1,))], 3)[1] == 1


def test_primitivity_invariances(rng):
    from freegeom.free_group import permutation

    perm = permutation([2, 3, 1])
    for _ in range(200):
        w = random_word(rng, 3, 6)
        if not w:
            continue
        p = is_primitive(w, 3)
        u = random_word(rng, 3, 3)
        assert is_primitive(inverse(w), 3) == p
        assert is_primitive(mul(u, w, inverse(u)), 3) == p
        assert is_primitive(perm(w), 3) == p


def test_is_simple_examples():
    assert is_simple(W("abAB"), 3)
    assert is_simple(W("a"), 3)
    assert not is_simple(W("aabbcc"), 3)
    with pytest.raises(ValueError):
        is_simple((), 3)


def _bounded_orbit_omits_generator(w, rank):
    """Oracle: exhaustive Whitehead-orbit BFS over cyclic words no longer than w,
    looking for one that omits a generator."""
    start = _cyc(w)
    seen = {start}
    q = deque([start])
    autos = [phi for _, phi in whitehead_automorphisms(rank)]
    while q:
        u = q.popleft()
        if len({abs(x) for x in u}) < rank:
            return True
        for phi in autos:
            v = _cyc(substitute(phi.images, u))
            if len(v) <= len(start) and v not in seen:
                seen.add(v)
                q.append(v)
    return False


def test_is_simple_against_bounded_oracle(rng):
    for _ in range(60):
        w = _cyc(random_word(rng, 3, int(rng.integers(2, 7))))
        if not w:
            continue
        assert is_simple(w, 3) == _bounded_orbit_omits_generator(w, 3), w


def test_minimal_orbit_budget():
    from freegeom.free_group.whitehead import minimal_orbit

    status, seen = minimal_orbit([W("aabbcc")], 3)
    assert status == "exhausted" and len(seen) == 8
    with pytest.raises(BudgetExceeded):
        minimal_orbit([W("aabbcc")], 3, budget=2)


# --- Stallings ------------------------------------------------------------

def test_stallings_examples():
    H = stallings_graph([W("a"), W("b")], 3)
    assert H.n_vertices == 1 and len(H.edges) == 2 and H.index == float("inf")
    H2 = stallings_graph([W(s) for s in ["aa", "b", "abA", "c", "acA"]], 3)
    assert H2.n_vertices == 2 and H2.is_full_cover and H2.index == 2
    F = stallings_graph([W("a"), W("b"), W("c")], 3)
    assert F.index == 1


def _coset_table(perms):
    """Schreier coset enumeration oracle for a permutation representation of F_r on n points."""
    n = len(perms[0])
    inv = [[0] * n for _ in perms]
    for k, p in enumerate(perms):
        for i, j in enumerate(p):
            inv[k][j] = i

    def act(w, v=0):
        for x in w:
            v = perms[x - 1][v] if x > 0 else inv[-x - 1][v]
        return v

    # Schreier generators of the stabiliser of 0
    parent = {0: ()}
    q = deque([0])
    while q:
        v = q.popleft()
        for x in (1, -1, 2, -2, 3, -3):
            u = act((x,), v)
            if u not in parent:
                parent[u] = parent[v] + (x,)
                q.append(u)
    gens = []
    for v, pv in parent.items():
        for x in (1, 2, 3):
            u = act((x,), v)
            g = mul(pv, (x,), inverse(parent[u]))
            if g:
                gens.append(g)
    return act, gens, len(parent)


def test_stallings_membership_matches_coset_enumeration(rng):
    for _ in range(40):
        n = int(rng.integers(1, 7))
        perms = [list(rng.permutation(n)) for _ in range(3)]
        act, gens, orbit = _coset_table(perms)
        H = stallings_graph(gens, 3)
        assert H.index == orbit
        for _ in range(50):
            w = random_word(rng, 3, int(rng.integers(0, 10)))
            assert H.contains(w) == (act(w) == 0)


def test_basis_and_express(rng):
    H = stallings_graph([W(s) for s in ["aa", "b", "abA", "c", "acA"]], 3)
    assert len(H.basis) == H.subgroup_rank == 5
    for h in H.basis:
        assert H.contains(h)
    for _ in range(100):
        letters = random_word(rng, 5, 6)
        h = reduce(x for y in letters for x in (H.basis[y - 1] if y > 0 else inverse(H.basis[-y - 1])))
        e = H.express(h)
        back = reduce(x for y in e for x in (H.basis[y - 1] if y > 0 else inverse(H.basis[-y - 1])))
        assert back == h


def test_induced_automorphism(phi):
    H = stallings_graph([W(s) for s in ["aa", "b", "abA", "c", "acA"]], 3)
    assert induced_automorphism(identity(3), H) == identity(5)
    h = H.basis[2]
    res = induced_automorphism(inner(h, 3), H)
    assert is_inner(res) is not None
    with pytest.raises(SubgroupError, match="not preserved"):
        induced_automorphism(Automorphism.parse(["b", "a", "c"]), H)


def test_induced_automorphism_commutes_with_inclusion(phi):
    # phi acts on H_1(F_3; Z/2) with order 7, so phi^7 preserves every index-2 subgroup
    f = identity(3)
    for _ in range(7):
        f = compose(f, phi)
    H = stallings_graph([W(s) for s in ["aa", "b", "abA", "c", "acA"]], 3)
    res = induced_automorphism(f, H)
    for j, h in enumerate(H.basis):
        img = res.images[j]
        incl = reduce(x for y in img for x in (H.basis[y - 1] if y > 0 else inverse(H.basis[-y - 1])))
        assert incl == f(h)
    with pytest.raises(SubgroupError):
        induced_automorphism(phi, H)


def test_is_simple_against_nielsen_ball(rng):
    # one-sided: a shallow Nielsen ball can miss deep free factors, never invent one
    moves = elementary_moves(3)
    misses = 0
    for _ in range(40):
        w = _cyc(random_word(rng, 3, int(rng.integers(2, 9))))
        if not w:
            continue
        level = {w}
        found = False
        for _ in range(3):
            if any(len({abs(x) for x in u}) < 3 for u in level):
                found = True
                break
            level = {_cyc(m(u)) for u in level for m in moves}
        found = found or any(len({abs(x) for x in u}) < 3 for u in level)
        if found:
            assert is_simple(w, 3), w
        elif is_simple(w, 3):
            misses += 1
    print(f"nielsen-ball oracle missed {misses} simple words")


def test_primitive_implies_simple(rng):
    for _ in range(100):
        f = random_automorphism(rng, 3, 4)
        assert is_simple(f((2,)), 3)
