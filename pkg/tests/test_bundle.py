from collections import deque
from fractions import Fraction
from itertools import product

import pytest

from freegeom.bundle import (
    ExtensionPresentation,
    FiberError,
    FiberPoint,
    abelianization_has_infinite_order,
    axis_in_fiber,
    bundle_distance,
    bundle_geodesic,
    fiber_distance,
    fiber_projection,
    flare_measure,
    min_set,
    on_axis,
    orbit_length,
    periodic_classes,
    quasiconvexity_probe,
    unit_rose,
    width_estimate,
)
from freegeom.free_group import (
    Automorphism,
    ConjugacyClass,
    all_classes,
    compose,
    identity,
    inner,
    inverse,
    parse_word as W,
    permutation,
    random_word,
    reduce,
    stallings_graph,
)
from freegeom.outer_space import act, length_of_class


@pytest.fixture(scope="module")
def P():
    return ExtensionPresentation(3, [Automorphism.parse(["b", "c", "ab"])], "phi")


@pytest.fixture(scope="module")
def perm():
    return ExtensionPresentation(3, [Automorphism.parse(["b", "c", "a"])], "perm")


def _generator_automorphisms(pres):
    gens = [inner((x,), pres.rank) for k in range(1, pres.rank + 1) for x in (k, -k)]
    for t, s in zip(pres.generators, pres._inv):
        gens += [t, s]
    return gens


def _oracle_distance(pres, u, v, radius):
    """Plain BFS on automorphisms, keyed by their images."""
    gens = _generator_automorphisms(pres)
    start, goal = pres.to_automorphism(u), pres.to_automorphism(v)
    seen = {start.images: 0}
    q = deque([start])
    if start.images == goal.images:
        return 0
    while q:
        f = q.popleft()
        d = seen[f.images]
        if d == radius:
            continue
        for g in gens:
            h = compose(f, g)
            if h.images in seen:
                continue
            seen[h.images] = d + 1
            if h.images == goal.images:
                return d + 1
            q.append(h)
    return None


def test_gamma_bookkeeping(P, perm):
    assert perm.gamma_equal([1, 1, 1], [])
    assert not perm.gamma_equal([1], [])
    assert perm.gamma_id([1, 1]) == perm.gamma_id([-1])
    assert [len(perm.gamma_ball(N)) for N in range(4)] == [1, 3, 3, 3]
    assert [len(P.gamma_ball(N)) for N in range(5)] == [1, 3, 5, 7, 9]
    trivial = ExtensionPresentation(3)
    assert trivial.gamma_ball(5) == [(0, 0, ())]
    # composing with an inner automorphism does not change the Gamma element
    assert P.gamma_equal([1, 1], [1, 1]) and P.gamma_id([1, -1, 1]) == P.gamma_id([1])
    assert P.locate(compose(P.lift([1, 1]), inner(W("ab"), 3)))[1] == W("ab")


def test_transitions_are_exact(P, perm):
    for pres in (P, perm):
        for g, _, _ in pres.gamma_ball(3):
            for j in range(pres.n_generators):
                for e in (1, -1):
                    g2, c = pres.transition(g, j, e)
                    t = pres.generators[j] if e > 0 else pres._inv[j]
                    assert compose(pres.lifts[g], t) == compose(pres.lifts[g2], inner(c, 3))


def test_step_matches_automorphism_composition(P, rng):
    gens = _generator_automorphisms(P)
    for _ in range(40):
        p = P.point([int(x) for x in rng.choice([1, -1], size=int(rng.integers(4)))],
                    random_word(rng, 3, int(rng.integers(6))))
        for k in range(P.n_bundle_generators):
            assert P.to_automorphism(P.step(p, k)) == compose(P.to_automorphism(p), gens[k])
    assert P.generator_names == ["i_a", "i_A", "i_b", "i_B", "i_c", "i_C", "t1", "t1^-1"]
    assert P.mu_bl == 2


def test_point_and_from_automorphism_roundtrip(P, rng):
    for _ in range(20):
        p = P.point([1, 1, -1, 1], random_word(rng, 3, 5))
        assert P.from_automorphism(P.to_automorphism(p)) == p


def test_fiber_distance_matches_bfs(P, rng):
    for _ in range(15):
        b = [int(x) for x in rng.choice([1, -1], size=2)]
        u = P.point(b, random_word(rng, 3, 3))
        v = P.point(b, random_word(rng, 3, 3))
        # BFS in the fiber: only the conjugation generators
        gens = [inner((x,), 3) for x in (1, -1, 2, -2, 3, -3)]
        start, goal = P.to_automorphism(u), P.to_automorphism(v)
        seen = {start.images: 0}
        q = deque([start])
        while goal.images not in seen:
            f = q.popleft()
            for g in gens:
                h = compose(f, g)
                if h.images not in seen:
                    seen[h.images] = seen[f.images] + 1
                    q.append(h)
        assert fiber_distance(u, v) == seen[goal.images]
    with pytest.raises(FiberError):
        fiber_distance(FiberPoint(0, ()), FiberPoint(1, ()))
    assert fiber_distance(FiberPoint(0, ()), FiberPoint(0, W("ab"))) == 2


def test_bundle_distance_examples(P):
    u = FiberPoint(0, ())
    assert bundle_distance(P, u, u).distance == 0
    assert bundle_distance(P, u, P.step(u, 6)).distance == 1
    for a in ("ab", "abc", "aab", "cAb"):
        v = FiberPoint(0, W(a))
        assert bundle_distance(P, u, v).distance <= fiber_distance(u, v)
    res = bundle_distance(P, u, FiberPoint(0, W("aaaa")), cap=50)
    assert res.overflow and res.distance is None


def test_bundle_distance_matches_oracle(P, perm, rng):
    for pres in (P, perm):
        for _ in range(8):
            u = pres.point([int(x) for x in rng.choice([1, -1], size=int(rng.integers(3)))],
                           random_word(rng, 3, 3))
            v = pres.point([int(x) for x in rng.choice([1, -1], size=int(rng.integers(3)))],
                           random_word(rng, 3, 3))
            d = bundle_distance(pres, u, v).distance
            assert d == bundle_distance(pres, v, u).distance
            if d <= 4:
                assert _oracle_distance(pres, u, v, 4) == d
            else:
                assert _oracle_distance(pres, u, v, 4) is None


def test_geodesic_is_shortlex_least(P):
    u = FiberPoint(0, ())
    K = P.n_bundle_generators
    for a in ("a", "ab", "Bc", "abc", "aCb"):
        v = FiberPoint(0, W(a))
        res = bundle_geodesic(P, u, v)
        assert len(res.word) == res.distance == len(res.path) - 1
        assert res.path[0] == u and res.path[-1] == v
        for p, q, k in zip(res.path, res.path[1:], res.word):
            assert P.step(p, k) == q
        # brute force: the first word of that length in lexicographic order reaching v
        for word in product(range(K), repeat=res.distance):
            p = u
            for k in word:
                p = P.step(p, k)
            if p == v:
                assert word == res.word
                break


def test_axis_in_fiber(P):
    ax = axis_in_fiber(P, W("a"))
    assert ax.core == W("a") and ax.conjugator == () and ax.translation_length == 1
    ax = axis_in_fiber(P, W("bcB"))
    assert ax.conjugator == W("b") and ax.core == W("c")
    with pytest.raises(ValueError):
        axis_in_fiber(P, ())
    R = unit_rose(3)
    for base in ([], [1], [1, 1], [-1], [-1, -1, -1]):
        g = P.gamma_id(base)
        for c in all_classes(3, 4):
            ax = axis_in_fiber(P, c.cyclic_word, base)
            assert ax.translation_length == 3 * length_of_class(act(P.lifts[g], R), c)
            # constant on the conjugacy class
            assert axis_in_fiber(P, reduce(W("b") + c.cyclic_word + W("B")), base).translation_length == ax.translation_length


def test_translation_length_under_basis_rotation(perm):
    sigma = permutation([2, 3, 1])
    for c in all_classes(3, 4):
        assert (axis_in_fiber(perm, sigma(c.cyclic_word)).translation_length
                == axis_in_fiber(perm, c.cyclic_word).translation_length)


def test_fiber_projection(P, rng):
    ax = axis_in_fiber(P, W("a"))
    for w in ("", "a", "aaa", "AA"):
        x = FiberPoint(0, W(w))
        assert on_axis(x, ax) and fiber_projection(x, ax) == x
    ax = axis_in_fiber(P, W("c"))
    # i_{c w} with w leaving the axis immediately projects to i_c
    assert fiber_projection(FiberPoint(0, W("cab")), ax) == FiberPoint(0, W("c"))
    assert fiber_projection(FiberPoint(0, W("CCbA")), ax) == FiberPoint(0, W("CC"))
    ax = axis_in_fiber(P, W("bcB"))
    assert fiber_projection(FiberPoint(0, W("bcca")), ax) == FiberPoint(0, W("bcc"))
    assert fiber_projection(FiberPoint(0, W("a")), ax) == FiberPoint(0, W("b"))
    ax = axis_in_fiber(P, W("ab"), [1])
    g = ax.gamma
    for _ in range(100):
        x = FiberPoint(g, random_word(rng, 3, 8))
        y = FiberPoint(g, random_word(rng, 3, 8))
        px, py = fiber_projection(x, ax), fiber_projection(y, ax)
        assert on_axis(px, ax)
        assert fiber_distance(px, py) <= fiber_distance(x, y)
        assert fiber_distance(x, px) <= fiber_distance(x, py)
    with pytest.raises(FiberError):
        fiber_projection(FiberPoint(0, ()), ax)


def test_min_set(P):
    R = unit_rose(3)
    trivial = ExtensionPresentation(3)
    ms = min_set(trivial, ConjugacyClass(W("ab")), R, 4)
    assert ms.members == [0] and ms.center == 0
    ms = min_set(P, ConjugacyClass(W("a")), R, 6)
    assert len(ms.table) == 13
    lengths = [row[3] for row in ms.table]
    assert ms.minlen == min(lengths) == Fraction(1, 3)
    assert lengths == [Fraction(n, 3) for n in (1, 2, 1, 3, 1, 4, 2, 6, 2, 9, 3, 13, 4)]
    assert ms.members == [0, 1, 2, 4, 6, 8]
    for g, _, _, length in ms.table:
        assert (g in ms.members) == (length <= 2 * ms.minlen)
    assert orbit_length(P, ms.center, ConjugacyClass(W("a")), R) == ms.minlen


def test_width_trivial_and_finite(perm):
    trivial = ExtensionPresentation(3)
    for row in width_estimate(trivial, W("ab"), [1, 2, 3]):
        assert row.diameter == 0 and row.geodesic_length == 2 * row.N * 2
    for row in width_estimate(perm, W("a"), [2, 4]):
        assert 0 <= row.diameter <= 1 and row.diameter <= row.geodesic_length
    with pytest.raises(ValueError):
        width_estimate(perm, (), [1])


def test_width_inverse_and_conjugate(P):
    # (a, b, |u|) with b a conjugate of a or of a^-1 by u
    for a, b, conj in (("a", "A", 0), ("ab", "BA", 0), ("ab", "ba", 1), ("b", "aBA", 1)):
        ra = width_estimate(P, W(a), [2, 4])
        rb = width_estimate(P, W(b), [2, 4])
        for x, y in zip(ra, rb):
            assert abs(x.diameter - y.diameter) <= 2 * conj


def test_width_overflow_is_flagged(P):
    rows = width_estimate(P, W("ab"), [2, 4], cap=2000)
    assert not rows[0].overflow and rows[1].overflow and rows[1].diameter is None


def test_flare_measure(P):
    R = unit_rose(3)
    trivial = ExtensionPresentation(3)
    a = ConjugacyClass(W("a"))
    fit = flare_measure(trivial, a, a, 0, 6, R)
    assert len(fit.rows) == 1
    ms = min_set(P, a, R, 6)
    fit = flare_measure(P, a, a, ms.center, 6, R)
    assert all(row[3] >= float(ms.minlen) for row in fit.rows)
    assert all(row[4] for row in fit.rows)
    assert {row[1] for row in fit.rows} == set(range(7))
    assert fit.lam > 1 and fit.exponential


def test_quasiconvexity_probe(P):
    H = stallings_graph([W("ab"), W("cac")], 3)
    rows = [quasiconvexity_probe(P, H, N, pairs=4) for N in (2, 3, 4)]
    assert all(r["pairs"] == 4 and not r["overflow"] for r in rows)
    assert all(r["offset"] >= 0 for r in rows)
    cyc = stallings_graph([W("a")], 3)
    assert quasiconvexity_probe(P, cyc, 3, pairs=3)["offset"] == 0


def test_atoroidality_scan():
    phi = Automorphism.parse(["b", "c", "ab"])
    assert periodic_classes(phi, 4, 6) == []
    assert abelianization_has_infinite_order(phi)
    sigma = Automorphism.parse(["b", "c", "a"])
    found = dict((c.cyclic_word, k) for c, k in periodic_classes(sigma, 2, 6))
    assert found[W("a")] == 3
    assert not abelianization_has_infinite_order(sigma)
    assert not abelianization_has_infinite_order(identity(3))
