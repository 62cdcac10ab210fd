"""Fold a random map between two graphs and watch legal length grow along the path.

    python demos/folding_paths.py
"""
import numpy as np

from freegeom.folding import check_legal_flare, folding_path_from_map, legal_length, random_folding_map
from freegeom.free_group import all_classes, format_word
from freegeom.outer_space import lipschitz_distance, random_marked_graph

rng = np.random.default_rng(7)
G = random_marked_graph(rng)
phi = random_folding_map(rng, G, n_folds=6)
path = folding_path_from_map(phi, 1 / 64)

total = sum(path.log_stretches)
d = lipschitz_distance(phi.source, path.graphs[-1])
print(f"{len(path)} graphs, total time {path.total_time:.4f}")
print(f"sum of step log-stretches {total:.6f} vs d(G, H) = {d:.6f}")

# the short class whose legal length grows most
gated = list(zip(path.graphs, path.gates))
alpha = max((c.cyclic_word for c in all_classes(3, 4)),
            key=lambda w: float(legal_length(w, *gated[-1])) - float(legal_length(w, *gated[0])))
print(f"legal length of {format_word(alpha)} along the path:")
for i in range(0, len(path.gates), max(1, len(path.gates) // 8)):
    print(f"  t={path.times[i]:.4f}  leg={float(legal_length(alpha, path.graphs[i], path.gates[i])):.5f}")

rep = check_legal_flare(path, alpha)
print(f"{len(rep.rows)} grid pairs checked, {len(rep.violations)} violations")
