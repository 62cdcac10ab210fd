"""Primitive elements, simple elements and a small ball of the primitive loop graph.

    python demos/primitive_loops.py
"""
from freegeom.factor_graphs import build_pl_ball, cs_distance_upper
from freegeom.free_group import is_primitive, is_simple, parse_word

for s in ["a", "ab", "abab", "abAB", "aabb", "abcABC", "aab"]:
    w = parse_word(s, 3)
    print(f"{s:8} primitive={is_primitive(w, 3)!s:5} simple={is_simple(w, 3)}")

ball = build_pl_ball(2)
print(f"PL ball of radius 2: {len(ball.vertices)} classes, {len(ball.edges)} edges")
print("upper bound for d(a, bc):", cs_distance_upper(parse_word("a"), parse_word("bc"), 2))
