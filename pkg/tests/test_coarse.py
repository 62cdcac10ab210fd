import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from freegeom.coarse import (
    CoarseMap,
    FiniteMetricGraph,
    aligned,
    alignment_constant,
    barycenter,
    collapse_map,
    composition_alignment_report,
    constant_map,
    delta_fourpoint,
    gromov_product,
    identity_map,
    properness_profile,
    qi_constants_fit,
)


def random_tree(rng, n, weights=False):
    edges = []
    for v in range(1, n):
        w = int(rng.integers(1, 4)) if weights else 1
        edges.append((int(rng.integers(v)), v, w))
    return FiniteMetricGraph(n, edges)


def random_graph(rng, n, extra):
    g = random_tree(rng, n)
    edges = list(g.edges)
    for _ in range(extra):
        u, v = rng.integers(n, size=2)
        if u != v:
            edges.append((int(u), int(v), 1))
    return FiniteMetricGraph(n, edges)


def cycle(n):
    return FiniteMetricGraph.unweighted(n, [(i, (i + 1) % n) for i in range(n)])


def _slow_delta(g):
    D = g.dist
    best = 0.0
    for x, y, z, w in itertools.product(range(g.n), repeat=4):
        s = sorted((D[x, y] + D[z, w], D[x, z] + D[y, w], D[x, w] + D[y, z]))
        best = max(best, (s[2] - s[1]) / 2)
    return best


def _slow_alignment(p, K_in):
    D, E = p.source.dist, p.pulled_back()
    best = 0.0
    for a, b, c in itertools.product(range(p.source.n), repeat=3):
        if D[a, b] + D[b, c] <= D[a, c] + K_in + 1e-12:
            best = max(best, E[a, b] + E[b, c] - E[a, c])
    return best


def test_graph_validation():
    with pytest.raises(ValueError, match="connected"):
        FiniteMetricGraph(3, [(0, 1, 1)])
    with pytest.raises(ValueError):
        FiniteMetricGraph(2, [(0, 1, 0)])
    g = FiniteMetricGraph(2, [(0, 1, 3), (0, 1, 1)])
    assert g.d(0, 1) == 1
    h = FiniteMetricGraph.from_text(g.to_text())
    assert np.array_equal(h.dist, g.dist)


def test_gromov_product_examples(rng):
    g = cycle(10)
    for x in range(10):
        assert gromov_product(g, x, x, 3) == g.d(x, 3)
    # base on a geodesic between x and y
    assert gromov_product(cycle(10), 0, 4, 2) == 0


def test_gromov_product_in_trees_is_distance_to_center(rng):
    for _ in range(20):
        t = random_tree(rng, 25, weights=True)
        x, y, b = rng.integers(25, size=3)
        # the tripod center is the unique vertex on all three geodesics
        D = t.dist
        center = [v for v in range(t.n)
                  if abs(D[x, v] + D[v, y] - D[x, y]) < 1e-9
                  and abs(D[x, v] + D[v, b] - D[x, b]) < 1e-9
                  and abs(D[y, v] + D[v, b] - D[y, b]) < 1e-9]
        assert len(center) == 1
        assert gromov_product(t, x, y, b) == pytest.approx(D[b, center[0]])


def test_delta_of_trees_is_zero(rng):
    for _ in range(10):
        assert delta_fourpoint(random_tree(rng, 40, weights=True)).value == 0


def test_delta_of_cycles():
    for n in range(3, 11):
        assert delta_fourpoint(cycle(n)).value == _slow_delta(cycle(n))
    values = [delta_fourpoint(cycle(n)).value for n in range(8, 65, 8)]
    assert values == [n / 4 for n in range(8, 65, 8)]


def test_delta_sampling_is_a_lower_estimate(rng):
    g = random_graph(rng, 40, 15)
    exact = delta_fourpoint(g)
    sampled = delta_fourpoint(g, budget=10, samples=5000)
    assert exact.exhaustive and not sampled.exhaustive
    assert sampled.value <= exact.value
    assert sampled.label == "lower estimate"


def test_aligned_examples(rng):
    g = cycle(12)
    assert aligned(g, 0, 3, 6, 0)
    assert not aligned(g, 0, 9, 3, 0)
    assert aligned(g, 0, 9, 3, 2 * g.diameter)
    for _ in range(50):
        a, b, c = rng.integers(12, size=3)
        K = float(rng.integers(0, 5))
        assert aligned(g, a, b, c, K) == (g.d(a, b) + g.d(b, c) <= g.d(a, c) + K)
        if aligned(g, a, b, c, K):
            assert aligned(g, a, b, c, K + 1)


def test_alignment_constant_examples(rng):
    g = random_graph(rng, 30, 10)
    assert alignment_constant(identity_map(g)).value == 0
    assert alignment_constant(constant_map(g, cycle(5), 2)).value == 0


def test_alignment_of_collapse_maps_matches_enumeration(rng):
    for _ in range(4):
        g = random_graph(rng, 25, 12)
        idx = rng.choice(len(g.edges), size=6, replace=False)
        p = collapse_map(g, idx)
        for K in (0, 1, 2):
            assert alignment_constant(p, K).value == _slow_alignment(p, K)


def test_properness_profile_examples(rng):
    g = random_graph(rng, 20, 5)
    prof = properness_profile(identity_map(g))
    assert all(C == D for D, C in prof)
    assert all(C == 0 for _, C in properness_profile(constant_map(g, g)))
    p = collapse_map(g, rng.choice(len(g.edges), size=4, replace=False))
    Cs = [C for _, C in properness_profile(p)]
    assert Cs == sorted(Cs)


def test_qi_fit_examples(rng):
    g = random_graph(rng, 20, 6)
    assert qi_constants_fit(identity_map(g)).K == 1
    doubled = FiniteMetricGraph(g.n, [(u, v, 2 * w) for u, v, w in g.edges])
    fit = qi_constants_fit(CoarseMap(g, doubled, tuple(range(g.n))))
    assert fit.multiplicative == 2
    Dm = g.diameter
    assert fit.K == pytest.approx(2 * Dm / (Dm + 1))


def test_qi_fit_matches_pairwise_minimization(rng):
    for _ in range(5):
        g = random_graph(rng, 15, 5)
        h = random_graph(rng, 10, 3)
        p = CoarseMap(g, h, tuple(int(x) for x in rng.integers(10, size=15)))
        K = qi_constants_fit(p).K
        D, E = g.dist, p.pulled_back()
        # K is admissible and no smaller grid value is
        ok = lambda k: all(D[i, j] / k - k <= E[i, j] + 1e-9 and E[i, j] <= k * D[i, j] + k + 1e-9
                           for i in range(15) for j in range(15))
        assert ok(K)
        assert not ok(K - 1e-6) or K == 1


def test_composition_bound(rng):
    for _ in range(3):
        g = random_graph(rng, 18, 4)
        q = collapse_map(g, rng.choice(len(g.edges), size=3, replace=False))
        p = collapse_map(q.target, rng.choice(len(q.target.edges), size=3, replace=False))
        rep = composition_alignment_report(p, q)
        assert rep["holds"]
        assert rep["offset"] <= rep["thin_offset_bound"] + 1e-9


def test_barycenter(rng):
    t = random_tree(rng, 30)
    for _ in range(10):
        a, b, c = (int(x) for x in rng.integers(30, size=3))
        v, r = barycenter(t, a, b, c)
        assert r == 0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.integers(0, 2**32 - 1))
def test_distance_table_is_a_metric(n, seed):
    g = random_graph(np.random.default_rng(seed), n, n // 2)
    D = g.dist
    assert np.array_equal(D, D.T)
    assert (np.diag(D) == 0).all()
    for k in range(n):
        assert (D <= D[:, [k]] + D[[k], :] + 1e-9).all()
