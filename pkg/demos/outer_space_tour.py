"""Walk through a few points of Outer space for F_3 and the Lipschitz metric between them.

    python demos/outer_space_tour.py
"""
from fractions import Fraction

import numpy as np

from freegeom.free_group import elementary_moves, format_word, stallings_graph
from freegeom.outer_space import (
    act,
    candidate_loops,
    cover,
    length_of_class,
    lipschitz_distance,
    random_marked_graph,
    rose,
    symmetrized_distance,
)

third = Fraction(1, 3)
R = rose([third, third, third])
print("the symmetric rose has", len(candidate_loops(R)), "candidate loops")

# a Nielsen move doubles a and halves ab
move = elementary_moves(3)[0]
S = act(move, R)
print("d(R, move.R) =", round(lipschitz_distance(R, S), 6), " d(move.R, R) =", round(lipschitz_distance(S, R), 6))
for w in [(1,), (2,), (1, 2), (1, -2)]:
    print(f"  len({format_word(w)}): {length_of_class(R, w)} -> {length_of_class(S, w)}")

# the metric is not symmetric on random graphs
rng = np.random.default_rng(1)
G, H = random_marked_graph(rng), random_marked_graph(rng)
print("random pair:", round(lipschitz_distance(G, H), 6), round(lipschitz_distance(H, G), 6),
      "symmetrized", round(symmetrized_distance(G, H), 6))

# lifting both graphs to the double cover for the kernel of c -> Z/2 keeps the distance
H2 = stallings_graph([(3, 3), (1,), (3, 1, -3), (2,), (3, 2, -3)], 3)
print("index", H2.index, "cover distance", round(lipschitz_distance(cover(G, H2), cover(H, H2)), 6))
