"""Gate structures, folding paths, legal length and the flaring inequalities.

A folding path is driven by its terminal graph H.  Every edge of the current
graph G_t carries its image in H as a list of pieces ``(x, u, w)``: signed
H-edge x traversed over the interval [u, w] of its length, measured in the
direction of travel.  All images have the same stretch, so G_t's volume-1
metric is image length divided by the total image length lambda_t, and
d(G_t, H) = log lambda_t.  Directions at a vertex share a gate exactly when
their images leave along the same H-edge germ.  One step folds every gate
by a common amount s (in H-coordinates) and renormalizes; the elapsed time
is log(lambda_t / lambda_{t+1}).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .free_group import ConjugacyClass, all_classes, inverse, reduce
from .free_group.automorphism import substitute
from .outer_space import (
    ChangeOfMarking,
    MarkedGraph,
    MarkingError,
    lipschitz_distance,
    length_of_class,
)

EPS = 1e-12
DEFAULT_DT = 1 / 64


class FoldingError(RuntimeError):
    pass


# --- gate structures -------------------------------------------------------------

@dataclass(frozen=True)
class GateStructure:
    """Partition of the directions at each vertex into gates.

    A direction is a signed edge leaving the vertex: +k leaves edge k's
    source, -k leaves its target.
    """

    gates: tuple  # per vertex: tuple of frozensets of directions

    def __post_init__(self):
        canon = tuple(tuple(sorted((frozenset(g) for g in gs), key=sorted)) for gs in self.gates)
        object.__setattr__(self, "gates", canon)
        object.__setattr__(self, "_gate", {d: g for gs in canon for g in gs for d in g})

    def gate_of(self, d: int) -> frozenset:
        return self._gate[d]

    def is_illegal(self, d1: int, d2: int) -> bool:
        return d1 != d2 and d2 in self._gate[d1]

    def illegal_turns(self) -> list:
        out = []
        for gs in self.gates:
            for g in gs:
                ds = sorted(g)
                out += [(a, b) for i, a in enumerate(ds) for b in ds[i + 1:]]
        return out

    def min_gates(self) -> int:
        return min(len(gs) for gs in self.gates)


def _directions(G: MarkedGraph) -> list:
    return [list(ds) for ds in G.incidence]


def induced_gates(phi: ChangeOfMarking) -> GateStructure:
    """Gates of the source: directions identified iff their images start with the same edge."""
    G = phi.source
    out = []
    for ds in _directions(G):
        groups: dict[int, set] = {}
        for d in ds:
            img = phi.images[abs(d) - 1]
            if not img:
                raise FoldingError("map collapses an edge; not a local homothety")
            germ = img[0] if d > 0 else -img[-1]
            groups.setdefault(germ, set()).add(d)
        out.append(tuple(frozenset(g) for _, g in sorted(groups.items(), key=lambda kv: min(kv[1]))))
    return GateStructure(tuple(out))


def trivial_gates(G: MarkedGraph) -> GateStructure:
    return GateStructure(tuple(tuple(frozenset([d]) for d in ds) for ds in _directions(G)))


# --- legal length --------------------------------------------------------------------

LEGAL_THRESHOLD = 3


def legal_segments(loop: Sequence[int], G: MarkedGraph, gates: GateStructure) -> tuple[list, bool]:
    """Lengths of the maximal legal segments of a cyclic edge loop, and whether it is all legal."""
    n = len(loop)
    cuts = [i for i in range(n) if gates.is_illegal(-loop[i - 1], loop[i])]
    L = [G.lengths[abs(x) - 1] for x in loop]
    if not cuts:
        return [sum(L)], True
    segs = []
    for j, c in enumerate(cuts):
        nxt = cuts[(j + 1) % len(cuts)]
        idx = range(c, nxt) if nxt > c else list(range(c, n)) + list(range(0, nxt))
        segs.append(sum(L[i] for i in idx))
    return segs, False


def legal_length(alpha, G: MarkedGraph, gates: GateStructure, threshold=LEGAL_THRESHOLD):
    """Sum of the maximal legal segments of alpha|G of length >= threshold."""
    loop = G.loop_of(alpha)
    if not loop:
        raise ValueError("trivial class")
    segs, _ = legal_segments(loop, G, gates)
    return sum(s for s in segs if s >= threshold - EPS)


def has_legal_segment(alpha, G, gates, length=LEGAL_THRESHOLD) -> bool:
    loop = G.loop_of(alpha)
    segs, legal = legal_segments(loop, G, gates)
    return legal or max(segs) >= length - EPS


def longest_illegal_segment(alpha, G, gates, threshold=LEGAL_THRESHOLD) -> float:
    """Sup of lengths of immersed segments of the periodic line of alpha with no legal
    subsegment of length ``threshold`` (infinite when every legal segment is short)."""
    loop = G.loop_of(alpha)
    segs, legal = legal_segments(loop, G, gates)
    if legal:
        return threshold
    long_idx = [i for i, s in enumerate(segs) if s >= threshold - EPS]
    if not long_idx:
        return math.inf
    best = 0.0
    n = len(segs)
    for j, i in enumerate(long_idx):
        k = long_idx[(j + 1) % len(long_idx)]
        gap = 0.0
        m = (i + 1) % n
        while m != k:
            gap += float(segs[m])
            m = (m + 1) % n
        best = max(best, gap + 2 * threshold)
    return best


def illegality_constant(rank: int, m_breve: int | None = None) -> int:
    """m = (2r-1)(18 m_breve (3r-3) + 6); m_breve defaults to r(2r-1)."""
    if rank < 2:
        raise ValueError("rank must be at least 2")
    if m_breve is None:
        m_breve = rank * (2 * rank - 1)
    if m_breve < 1:
        raise ValueError("m_breve must be positive")
    return (2 * rank - 1) * (18 * m_breve * (3 * rank - 3) + 6)


# --- pieces of H-paths ------------------------------------------------------------------

def _plen(pieces) -> float:
    return sum(w - u for _, u, w in pieces)


def _reverse(pieces, HL):
    return [(-x, HL[abs(x) - 1] - w, HL[abs(x) - 1] - u) for x, u, w in reversed(pieces)]


def _split(pieces, s):
    """(prefix of length s, remainder)."""
    pre, rest = [], []
    acc = 0.0
    for i, (x, u, w) in enumerate(pieces):
        if acc + (w - u) <= s + EPS:
            pre.append((x, u, w))
            acc += w - u
            if abs(acc - s) <= EPS:
                return pre, list(pieces[i + 1:])
            continue
        cut = u + (s - acc)
        pre.append((x, u, cut))
        return pre, [(x, cut, w)] + list(pieces[i + 1:])
    return pre, rest


def _common_prefix(paths) -> float:
    total = 0.0
    i = 0
    while True:
        if any(i >= len(p) for p in paths):
            return total
        x, u, _ = paths[0][i]
        if any(p[i][0] != x or abs(p[i][1] - u) > EPS for p in paths):
            return total
        ends = [p[i][2] for p in paths]
        total += min(ends) - u
        if max(ends) - min(ends) > EPS:
            return total
        i += 1


# --- folding state ------------------------------------------------------------------------

class _FoldState:
    def __init__(self, phi: ChangeOfMarking):
        G, H = phi.source, phi.target
        self.H = H
        self.HL = [float(x) for x in H.lengths]
        self.edges: dict[int, list] = {}
        for k, ((s, d), p) in enumerate(zip(G.edges, phi.images), start=1):
            self.edges[k] = [s, d, [(x, 0.0, self.HL[abs(x) - 1]) for x in p]]
        self.parent = list(range(G.n_vertices))
        self.n_vertices = G.n_vertices
        self.marking = [tuple(p) for p in G.marking]
        self.base = G.base
        self.next_edge = len(G.edges) + 1
        self.order = list(range(1, len(G.edges) + 1))  # edge numbering of the current graph

    # union-find on vertices
    def find(self, v):
        while self.parent[v] != v:
            self.parent[v] = self.parent[self.parent[v]]
            v = self.parent[v]
        return v

    def new_vertex(self):
        self.parent.append(self.n_vertices)
        self.n_vertices += 1
        return self.n_vertices - 1

    @property
    def lam(self) -> float:
        return sum(_plen(p) for _, _, p in self.edges.values())

    def image(self, d):
        s, t, p = self.edges[abs(d)]
        return p if d > 0 else _reverse(p, self.HL)

    def gates(self):
        at: dict[int, dict[int, list]] = {}
        for k, (s, d, p) in self.edges.items():
            for sign, v in ((1, s), (-1, d)):
                img = p if sign > 0 else _reverse(p, self.HL)
                at.setdefault(self.find(v), {}).setdefault(img[0][0], []).append(sign * k)
        return at

    def illegal_gates(self):
        out = []
        for v, groups in sorted(self.gates().items()):
            for germ, ds in sorted(groups.items()):
                if len(ds) > 1:
                    out.append((v, sorted(ds)))
        return out

    def max_fold(self, illegal):
        cp = min(_common_prefix([self.image(d) for d in ds]) for _, ds in illegal)
        count: dict[int, int] = {}
        for _, ds in illegal:
            for d in ds:
                count[abs(d)] = count.get(abs(d), 0) + 1
        bound = min(_plen(self.edges[k][2]) / c for k, c in count.items())
        return min(cp, bound)

    def fold(self, illegal, s):
        """Fold every gate by s; return the substitution old edge -> path of new edges."""
        subst = {k: (k,) for k in self.edges}
        consumed = []
        for v, ds in illegal:
            w = self.new_vertex()
            pre, _ = _split(self.image(ds[0]), s)
            m = self.next_edge
            self.next_edge += 1
            self.edges[m] = [v, w, pre]
            for d in ds:
                k = abs(d)
                src, dst, p = self.edges[k]
                if d > 0:
                    _, rest = _split(p, s)
                    self.edges[k] = [w, dst, rest]
                    local = (m, k)
                else:
                    _, rest = _split(_reverse(p, self.HL), s)
                    self.edges[k] = [src, w, _reverse(rest, self.HL)]
                    local = (k, -m)
                subst = {e: substitute_one(path, k, local) for e, path in subst.items()}
                if _plen(self.edges[k][2]) <= EPS:
                    consumed.append(k)
        for k in consumed:
            if k not in self.edges:
                continue
            s0, d0, _ = self.edges.pop(k)
            a, b = self.find(s0), self.find(d0)
            if a != b:
                self.parent[max(a, b)] = min(a, b)
            subst = {e: tuple(x for x in path if abs(x) != k) for e, path in subst.items()}
        subst = {e: reduce(p) for e, p in subst.items()}
        self.marking = [substitute_map(subst, p) for p in self.marking]
        return subst

    def snapshot(self):
        """Freeze into a volume-1 MarkedGraph; returns (graph, edge-id map)."""
        lam = self.lam
        roots = sorted({self.find(v) for k in self.edges for v in self.edges[k][:2]})
        vmap = {v: i for i, v in enumerate(roots)}
        ids = sorted(self.edges)
        emap = {k: i + 1 for i, k in enumerate(ids)}
        edges = tuple((vmap[self.find(self.edges[k][0])], vmap[self.find(self.edges[k][1])]) for k in ids)
        lengths = tuple(_plen(self.edges[k][2]) / lam for k in ids)
        marking = tuple(tuple(emap[abs(x)] * (1 if x > 0 else -1) for x in p) for p in self.marking)
        G = MarkedGraph(len(roots), edges, lengths, marking, vmap[self.find(self.base)])
        return G, emap

    def gate_structure(self, G: MarkedGraph, emap) -> GateStructure:
        inv = {v: k for k, v in emap.items()}
        out = []
        for ds in G.incidence:
            groups: dict[int, set] = {}
            for d in ds:
                img = self.image(inv[abs(d)] * (1 if d > 0 else -1))
                groups.setdefault(img[0][0], set()).add(d)
            out.append(tuple(frozenset(g) for _, g in sorted(groups.items(), key=lambda kv: min(kv[1]))))
        return GateStructure(tuple(out))

    def image_in_target(self, emap):
        """Current images as H-edge paths when every vertex sits at an H-vertex, else None."""
        out = []
        for k in sorted(emap, key=emap.get):
            p = self.edges[k][2]
            if any(u > EPS or abs(w - self.HL[abs(x) - 1]) > EPS for x, u, w in p):
                return None
            out.append(tuple(x for x, _, _ in p))
        return tuple(out)


def substitute_one(path, k, local):
    out = []
    for x in path:
        if x == k:
            out.extend(local)
        elif x == -k:
            out.extend(inverse(local))
        else:
            out.append(x)
    return tuple(out)


def substitute_map(subst, path):
    out = []
    for x in path:
        img = subst[abs(x)]
        out.extend(img if x > 0 else inverse(img))
    return reduce(out)


# --- folding paths ----------------------------------------------------------------------------

@dataclass
class FoldingPath:
    """Discretized folding path: times, volume-1 graphs, step maps and gates.

    ``prefix`` holds an optional rescaling segment (start graph, rescaled
    graph, its length) that precedes the folding part.
    """

    times: list
    graphs: list
    step_maps: list
    gates: list
    dt: float
    prefix: tuple | None = None
    target: MarkedGraph | None = None

    def __len__(self):
        return len(self.graphs)

    @property
    def total_time(self) -> float:
        return self.times[-1] - self.times[0] if self.times else 0.0

    @property
    def log_stretches(self) -> list:
        return [math.log(float(m.lipschitz)) for m in self.step_maps]

    def composite(self, j: int, k: int) -> ChangeOfMarking:
        m = self.step_maps[j]
        for i in range(j + 1, k):
            m = m.compose(self.step_maps[i])
        return m

    def to_text(self) -> str:
        out = []
        for t, G in zip(self.times, self.graphs):
            out.append(f"# t = {t:.12g}")
            out.append(G.to_text())
        out.append("# steps: index, t_start, t_end, log_stretch")
        for i, ls in enumerate(self.log_stretches):
            out.append(f"step {i} {self.times[i]:.12g} {self.times[i + 1]:.12g} {ls:.12g}")
        return "\n".join(out) + "\n"


def fold_step(state_or_graph, gates=None, dt: float = DEFAULT_DT):
    """One folding step of size dt (split at the first edge-consumption event).

    Accepts a ``_FoldState``; returns (new graph, step map, elapsed time).  For a
    bare graph with a gate structure use ``fold_graph_step``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    st = state_or_graph
    before, emap0 = st.snapshot()
    illegal = st.illegal_gates()
    if not illegal:
        return before, None, 0.0
    lam = st.lam
    K = sum(len(ds) - 1 for _, ds in illegal)
    s_target = lam * (1 - math.exp(-dt)) / K
    s = min(s_target, st.max_fold(illegal))
    subst = st.fold(illegal, s)
    after, emap1 = st.snapshot()
    st.last_emap = emap1
    images = tuple(_renumber(subst[k], emap1) for k in sorted(emap0, key=emap0.get))
    step = ChangeOfMarking(before, after, images)
    return after, step, math.log(lam / st.lam)


def _renumber(path, emap):
    return tuple(emap[abs(x)] * (1 if x > 0 else -1) for x in path)


def fold_graph_step(G: MarkedGraph, gates: GateStructure, dt: float = DEFAULT_DT):
    """Fold a graph along a prescribed gate structure for time dt.

    The fold identifies equal initial segments of all directions sharing a
    gate, at common speed, then renormalizes to volume 1.  Returns
    (G', step map, elapsed time); a structure without illegal turns returns G.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not gates.illegal_turns():
        return G, None, 0.0
    # realize the gates by a private target: each gate's directions share a germ
    L = [float(x) for x in G.lengths]
    lam = sum(L)
    K = sum(len(g) - 1 for gs in gates.gates for g in gs)
    s = lam * (1 - math.exp(-dt)) / K
    count: dict[int, int] = {}
    for gs in gates.gates:
        for g in gs:
            if len(g) > 1:
                for d in g:
                    count[abs(d)] = count.get(abs(d), 0) + 1
    s = min([s] + [L[k - 1] / c for k, c in count.items()])
    edges = {k: [a, b, L[k - 1]] for k, (a, b) in enumerate(G.edges, start=1)}
    parent = list(range(G.n_vertices))
    nv = G.n_vertices
    next_edge = len(G.edges) + 1
    subst = {k: (k,) for k in edges}
    consumed = []

    def find(v):
        while parent[v] != v:
            v = parent[v]
        return v

    for v, gs in enumerate(gates.gates):
        for g in gs:
            if len(g) < 2:
                continue
            w = nv
            parent.append(w)
            nv += 1
            m = next_edge
            next_edge += 1
            edges[m] = [v, w, s]
            for d in sorted(g):
                k = abs(d)
                a, b, ln = edges[k]
                edges[k] = [w, b, ln - s] if d > 0 else [a, w, ln - s]
                local = (m, k) if d > 0 else (k, -m)
                subst = {e: substitute_one(p, k, local) for e, p in subst.items()}
                if edges[k][2] <= EPS:
                    consumed.append(k)
    for k in consumed:
        if k in edges:
            a, b, _ = edges.pop(k)
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
            subst = {e: tuple(x for x in p if abs(x) != k) for e, p in subst.items()}
    ids = sorted(edges)
    emap = {k: i + 1 for i, k in enumerate(ids)}
    roots = sorted({find(v) for k in ids for v in edges[k][:2]})
    vmap = {v: i for i, v in enumerate(roots)}
    total = sum(edges[k][2] for k in ids)
    marking = tuple(_renumber(substitute_map({e: reduce(p) for e, p in subst.items()}, p), emap)
                    for p in G.marking)
    G2 = MarkedGraph(len(roots), tuple((vmap[find(edges[k][0])], vmap[find(edges[k][1])]) for k in ids),
                     tuple(edges[k][2] / total for k in ids), marking, vmap[find(G.base)])
    images = tuple(_renumber(reduce(subst[k]), emap) for k in range(1, len(G.edges) + 1))
    return G2, ChangeOfMarking(G, G2, images), math.log(lam / total)


def folding_path_from_map(phi: ChangeOfMarking, dt: float = DEFAULT_DT, max_steps: int = 100_000) -> FoldingPath:
    """Folding path determined by a folding map phi: G -> H (uniform stretch, >= 2 gates)."""
    st = _FoldState(phi)
    stretches = [float(x) for x in phi.stretches]
    if max(stretches) - min(stretches) > 1e-9 * max(stretches):
        raise FoldingError("map is not a local homothety with uniform stretch")
    G0, emap = st.snapshot()
    gates0 = st.gate_structure(G0, emap)
    if gates0.min_gates() < 2:
        raise FoldingError("map induces fewer than 2 gates at some vertex")
    times, graphs, maps, gates = [0.0], [G0], [], [gates0]
    t = 0.0
    for _ in range(max_steps):
        if not st.illegal_gates():
            break
        G1, step, elapsed = fold_step(st, dt=dt)
        t += elapsed
        times.append(t)
        graphs.append(G1)
        maps.append(step)
        if st.illegal_gates():
            gates.append(st.gate_structure(G1, st.last_emap))
    else:
        raise FoldingError("folding did not terminate within the step budget")
    return FoldingPath(times, graphs, maps, gates, dt, target=phi.target)


# --- computed optimal maps ------------------------------------------------------------------------

def straight_map(G: MarkedGraph, H: MarkedGraph, vertex_paths: dict | None = None) -> ChangeOfMarking:
    """The map sending each G-vertex v to the end of the H-path ``vertex_paths[v]`` (default:
    everything to H's basepoint) and each edge to the tightened path between."""
    P = {v: () for v in range(G.n_vertices)} if vertex_paths is None else vertex_paths
    images = []
    for k, (s, d) in enumerate(G.edges, start=1):
        loop = reduce(G.tree_path(s) + (k,) + inverse(G.tree_path(d)))
        g = H.word_to_path(G.loop_to_word(loop))
        images.append(reduce(inverse(P[s]) + g + P[d]))
    return ChangeOfMarking(G, H, tuple(images))


def _map_score(phi: ChangeOfMarking):
    st = phi.stretches
    top = max(st)
    return (float(top), sum(1 for x in st if float(x) >= float(top) * (1 - 1e-12)))


def optimize_map(G: MarkedGraph, H: MarkedGraph, budget: int = 2000) -> ChangeOfMarking:
    """Local descent on vertex images (moving lifts one H-edge at a time) lowering the
    maximal stretch and then the size of the tension subgraph."""
    P = {v: () for v in range(G.n_vertices)}
    best = straight_map(G, H, P)
    score = _map_score(best)
    for _ in range(budget):
        improved = False
        for v in range(G.n_vertices):
            end_dirs = _path_end_directions(H, P[v])
            for x in end_dirs:
                Q = dict(P)
                Q[v] = reduce(P[v] + (x,))
                try:
                    cand = straight_map(G, H, Q)
                except MarkingError:
                    continue
                sc = _map_score(cand)
                if sc < score:
                    P, best, score, improved = Q, cand, sc, True
        if not improved:
            return best
    raise FoldingError("tension adjustment exceeded its iteration budget")


def _path_end_directions(H: MarkedGraph, p):
    v = H.base if not p else _end_vertex(H, p)
    return list(H.incidence[v])


def _end_vertex(H, p):
    s, d = H.edges[abs(p[-1]) - 1]
    return d if p[-1] > 0 else s


def folding_path(G: MarkedGraph, H: MarkedGraph, dt: float = DEFAULT_DT, phi: ChangeOfMarking | None = None,
                 budget: int = 2000, tol: float = 1e-9) -> FoldingPath:
    """Geodesic from G to H: optional rescaling prefix followed by a folding path.

    With ``phi`` supplied it must be a folding map.  Otherwise an optimal map is
    sought by tension descent; when its stretch is not uniform, G is first
    rescaled so that it is, and the concatenation is verified to be geodesic.
    """
    if lipschitz_distance(G, H) <= tol and lipschitz_distance(H, G) <= tol:
        return FoldingPath([0.0], [G], [], [], dt, target=H)
    if phi is not None:
        return folding_path_from_map(phi, dt)
    phi = optimize_map(G, H, budget)
    if any(not p for p in phi.images):
        raise FoldingError("optimal map found by tension descent collapses an edge")
    d = lipschitz_distance(G, H)
    if abs(math.log(float(phi.lipschitz)) - d) > 1e-6:
        raise FoldingError("tension descent did not reach an optimal map")
    image_lengths = [float(H.path_length(p)) for p in phi.images]
    vol = sum(image_lengths)
    G2 = G.with_lengths([x / vol for x in image_lengths])
    prefix_len = lipschitz_distance(G, G2)
    if abs(prefix_len + lipschitz_distance(G2, H) - d) > 1e-6:
        raise FoldingError("rescaling prefix is not geodesic")
    phi2 = ChangeOfMarking(G2, H, phi.images)
    if is_isometry_map(phi2):
        path = FoldingPath([0.0], [G2], [], [], dt, target=H)
    else:
        path = folding_path_from_map(phi2, dt)
    path.prefix = (G, G2, prefix_len)
    path.times = [t + prefix_len for t in path.times]
    return path


def is_isometry_map(phi: ChangeOfMarking) -> bool:
    return all(len(p) == 1 for p in phi.images) and len({abs(p[0]) for p in phi.images}) == len(phi.images)


# --- random folding maps ---------------------------------------------------------------------------

def fold_turn(G: MarkedGraph, d1: int, d2: int, s) -> ChangeOfMarking:
    """Partially fold the initial segments of length s of directions d1, d2 (at one vertex).

    The result is renormalized to volume 1; the returned map is the fold.
    """
    edges = {k: [a, b, x] for k, ((a, b), x) in enumerate(zip(G.edges, G.lengths), start=1)}
    v1 = edges[abs(d1)][0] if d1 > 0 else edges[abs(d1)][1]
    v2 = edges[abs(d2)][0] if d2 > 0 else edges[abs(d2)][1]
    if v1 != v2 or abs(d1) == abs(d2):
        raise ValueError("directions must leave the same vertex along distinct edges")
    if not 0 < s < min(edges[abs(d1)][2], edges[abs(d2)][2]):
        raise ValueError("fold length must be positive and shorter than both edges")
    w = G.n_vertices
    m = len(edges) + 1
    edges[m] = [v1, w, s]
    images = {k: (k,) for k in range(1, len(G.edges) + 1)}
    for d in (d1, d2):
        k = abs(d)
        a, b, ln = edges[k]
        edges[k] = [w, b, ln - s] if d > 0 else [a, w, ln - s]
        images[k] = (m, k) if d > 0 else (k, -m)
    vol = sum(x for _, _, x in edges.values())
    marking = tuple(substitute_map(images, p) for p in G.marking)
    H = MarkedGraph(G.n_vertices + 1, tuple((a, b) for a, b, _ in edges.values()),
                    tuple(x / vol for _, _, x in edges.values()), marking, G.base)
    return ChangeOfMarking(G, H, tuple(images[k] for k in range(1, len(G.edges) + 1)))


def random_folding_map(rng, G: MarkedGraph, n_folds: int = 3, max_tries: int = 200,
                       fraction=(0.2, 0.8)) -> ChangeOfMarking:
    """A folding map G -> H built from random partial folds, with >= 2 gates everywhere.

    Each fold acts on a turn of the current graph that no edge image crosses,
    so edge images stay immersed and the stretch stays uniform.
    """
    for _ in range(max_tries):
        phi = _try_random_folds(rng, G, n_folds, fraction)
        if phi is not None:
            gates = induced_gates(phi)
            if gates.min_gates() >= 2 and gates.illegal_turns():
                return phi
    raise FoldingError("could not sample a folding map with two gates at every vertex")


def _try_random_folds(rng, G: MarkedGraph, n_folds: int, fraction):
    phi = ChangeOfMarking(G, G, tuple((k,) for k in range(1, len(G.edges) + 1)))
    done = 0
    for _ in range(20 * n_folds):
        if done == n_folds:
            break
        H = phi.target
        v = int(rng.integers(H.n_vertices))
        ds = H.incidence[v]
        if len(ds) < 3:
            continue
        i, j = rng.choice(len(ds), size=2, replace=False)
        d1, d2 = ds[int(i)], ds[int(j)]
        if abs(d1) == abs(d2):
            continue
        taken = {frozenset((-x, y)) for p in phi.images for x, y in zip(p, p[1:])}
        if frozenset((d1, d2)) in taken:
            continue
        s = float(rng.uniform(*fraction)) * float(min(H.lengths[abs(d1) - 1], H.lengths[abs(d2) - 1]))
        phi = phi.compose(fold_turn(H, d1, d2, s))
        done += 1
    if done < n_folds:
        return None
    # re-express so the source keeps G's exact lengths
    return ChangeOfMarking(G, phi.target, phi.images)


# --- projections and flaring checks -----------------------------------------------------------------

def left_right_projection(path: FoldingPath, alpha, m: float, threshold=LEGAL_THRESHOLD):
    """Grid versions of the left and right projections of alpha to the path.

    left = first grid time where alpha has a legal segment of length ``threshold``
    (inf when none); right = last grid time where alpha has an illegal segment of
    length m (the path's start time when none).
    """
    left, right = math.inf, None
    for t, G, gates in zip(path.times, path.graphs, path.gates):
        if left == math.inf and has_legal_segment(alpha, G, gates, threshold):
            left = t
        if longest_illegal_segment(alpha, G, gates, threshold) > m:
            right = t
    if left == math.inf and len(path.graphs) > len(path.gates):
        left = path.times[-1]  # the terminal graph carries no illegal turns
    return left, (path.times[0] if right is None else right)


@dataclass
class FlareReport:
    rows: list = field(default_factory=list)  # (t_a, t_b, class, lhs, rhs, margin)
    violations: list = field(default_factory=list)
    applicable: bool = True
    note: str = ""

    def to_csv(self) -> str:
        lines = ["t_a,t_b,class,lhs,rhs,margin"]
        for ta, tb, c, lhs, rhs, margin in self.rows:
            lines.append(f"{ta:.12g},{tb:.12g},{c},{lhs:.12g},{rhs:.12g},{margin:.12g}")
        return "\n".join(lines) + "\n"


def _gated_graphs(path: FoldingPath):
    """(time, graph, gates) with the terminal graph carrying the trivial structure."""
    out = []
    for i, (t, G) in enumerate(zip(path.times, path.graphs)):
        gates = path.gates[i] if i < len(path.gates) else trivial_gates(G)
        out.append((t, G, gates))
    return out


def check_legal_flare(path: FoldingPath, alpha, threshold=LEGAL_THRESHOLD) -> FlareReport:
    """leg(a|G_b) >= leg(a|G_a) e^{b-a}/3 on all grid pairs, with e^{-2dt} slack."""
    rep = FlareReport()
    slack = math.exp(-2 * path.dt)
    legs = [(t, float(legal_length(alpha, G, g, threshold))) for t, G, g in _gated_graphs(path)]
    name = str(ConjugacyClass(alpha.cyclic_word if isinstance(alpha, ConjugacyClass) else alpha))
    for i, (ta, la) in enumerate(legs):
        for tb, lb in legs[i + 1:]:
            rhs = la * math.exp(tb - ta) / 3
            rep.rows.append((ta, tb, name, lb, rhs, lb - rhs * slack))
            if lb < rhs * slack - 1e-12:
                rep.violations.append((ta, tb, name, lb, rhs))
    return rep


def check_containment_flare(path: FoldingPath, alpha, beta, k: float, s_index: int, m: float,
                            contained=None) -> FlareReport:
    """Containment-flare inequalities at grid index s_index.

    Needs s >= right(alpha), beta k-almost contained in alpha at G_s (``contained``
    may pass a precomputed answer) and len(beta|G_s) >= 3k + 3m.  Checks
    leg(beta|G_s) >= (2/m) len(beta|G_s) and len(beta|G_t) >= (2/(3m)) len(beta|G_s) e^{t-s}.
    """
    from .trees import almost_contained

    rep = FlareReport()
    graphs = _gated_graphs(path)
    ts, Gs, gs = graphs[s_index]
    _, right = left_right_projection(path, alpha, m)
    len_s = float(length_of_class(Gs, beta))
    if contained is None:
        contained = almost_contained(beta, alpha, Gs, k)
    if ts < right or not contained or len_s < 3 * k + 3 * m:
        rep.applicable = False
        rep.note = "not applicable"
        return rep
    slack = math.exp(-2 * path.dt)
    name = str(ConjugacyClass(beta.cyclic_word if isinstance(beta, ConjugacyClass) else beta))
    leg = float(legal_length(beta, Gs, gs))
    rhs = 2 * len_s / m
    rep.rows.append((ts, ts, name, leg, rhs, leg - rhs))
    if leg < rhs - 1e-12:
        rep.violations.append((ts, ts, name, leg, rhs))
    for t, G, _ in graphs[s_index + 1:]:
        lhs = float(length_of_class(G, beta))
        rhs = 2 * len_s * math.exp(t - ts) / (3 * m)
        rep.rows.append((ts, t, name, lhs, rhs, lhs - rhs * slack))
        if lhs < rhs * slack - 1e-12:
            rep.violations.append((ts, t, name, lhs, rhs))
    return rep


def halving_dichotomy(path: FoldingPath, alpha, window: int):
    """Windows of ``window`` grid steps on which alpha stays illegal, with whether its
    length at the start exceeds twice its length at the end (the halving branch)."""
    out = []
    flags = [not has_legal_segment(alpha, G, g) for _, G, g in _gated_graphs(path)]
    lens = [float(length_of_class(G, alpha)) for G in path.graphs]
    for i in range(len(flags) - window):
        if all(flags[i:i + window + 1]):
            out.append((path.times[i], path.times[i + window], lens[i] > 2 * lens[i + window]))
    return out


# --- bounded backtracking -------------------------------------------------------------------------------

def bbt_estimate(phi: ChangeOfMarking, L: float, classes=None) -> float:
    """Largest excursion of phi-images of sampled geodesic segments (length <= L) off the
    geodesic between their image endpoints; a lower estimate of BBT(phi)."""
    G, H = phi.source, phi.target
    if classes is None:
        classes = all_classes(G.rank, 4)
    HL = [float(x) for x in H.lengths]
    GL = [float(x) for x in G.lengths]
    best = 0.0
    for c in classes:
        loop = G.loop_of(c)
        if not loop:
            continue
        n = len(loop)
        reps = 1 + int(L / max(1e-12, sum(GL[abs(x) - 1] for x in loop)))
        line = loop * (reps + 1)
        for i in range(n):
            acc = 0.0
            seg = []
            for x in line[i:]:
                if acc + GL[abs(x) - 1] > L + EPS:
                    break
                acc += GL[abs(x) - 1]
                seg.append(x)
                best = max(best, _excursion(phi, seg, HL))
    return best


def _excursion(phi, seg, HL) -> float:
    path = [y for x in seg for y in (phi.images[x - 1] if x > 0 else inverse(phi.images[-x - 1]))]
    geo = reduce(path)
    stack: list[int] = []
    best = 0.0
    for y in path:
        if stack and stack[-1] == -y:
            stack.pop()
        else:
            stack.append(y)
        k = 0
        while k < len(stack) and k < len(geo) and stack[k] == geo[k]:
            k += 1
        best = max(best, sum(HL[abs(z) - 1] for z in stack[k:]))
    return best
