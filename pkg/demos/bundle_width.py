"""Geodesics in the Cayley graph bundle of a free-by-cyclic group, and how far they stray from the fiber.

For phi: a -> b, b -> c, c -> ab every class flares, so geodesics between points of one
fiber stay close to it.  For psi: a -> a, b -> b a^5, c -> c the class a is fixed and the
geodesic from a^-N to a^N leaves the fiber farther as N grows.

    python demos/bundle_width.py
"""
from freegeom.bundle import ExtensionPresentation, FiberPoint, bundle_geodesic, width_estimate
from freegeom.free_group import Automorphism, parse_word

phi = Automorphism.from_images([parse_word("b"), parse_word("c"), parse_word("ab")])
psi = Automorphism.from_images([parse_word("a"), parse_word("baaaaa"), parse_word("c")])

for name, f in (("phi", phi), ("psi", psi)):
    P = ExtensionPresentation(3, [f], name)
    print(f"{name}: bundle generators {' '.join(P.generator_names)}, mu_bl = {P.mu_bl}")
    res = bundle_geodesic(P, FiberPoint(0, (-1, -1, -1)), FiberPoint(0, (1, 1, 1)))
    print("  geodesic a^-3 -> a^3:", " ".join(P.generator_names[k] for k in res.word), f"({res.distance})")
    for row in width_estimate(P, (1,), [2, 4, 6], cap=10**6):
        print(f"  N={row.N}: length {row.geodesic_length}, width {row.diameter}, {row.nodes} nodes")
