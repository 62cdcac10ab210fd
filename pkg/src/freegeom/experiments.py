"""Experiment runners behind the command line.  Each returns a Report of CSV rows plus a summary."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bundle import (
    CapExceeded,
    ExtensionPresentation,
    FiberPoint,
    flare_measure,
    min_set,
    periodic_classes,
    quasiconvexity_probe,
    unit_rose,
    width_estimate,
)
from .coarse import FiniteMetricGraph, delta_fourpoint
from .config import ConfigError, ExperimentConfig
from .factor_graphs import build_pl_ball, orbit_distance_table
from .folding import check_legal_flare, folding_path, folding_path_from_map, random_folding_map
from .free_group import ConjugacyClass, format_word, stallings_graph
from .free_group.whitehead import is_primitive
from .outer_space import (
    MarkedGraph,
    act,
    cover,
    lipschitz_distance,
    random_marked_graph,
    rose,
    symmetrized_distance,
)


@dataclass
class Report:
    columns: list
    rows: list
    summary: dict
    files: dict = field(default_factory=dict)   # suffix -> text
    overflow: bool = False


@dataclass
class Diagnostic:
    level: str          # "error" or "warning"
    message: str

    def __str__(self):
        return f"{self.level}: {self.message}"


def validate(cfg: ExperimentConfig, scan_length: int = 4, scan_power: int = 6) -> list:
    """Checks beyond parsing: kind requirements and a heuristic periodic-class scan."""
    out = []
    needs_gamma = {"flare", "pl-ball"}
    if cfg.kind in needs_gamma and not cfg.automorphisms:
        out.append(Diagnostic("error", f"kind {cfg.kind} needs at least one generator section [t1]"))
    for name, phi in cfg.automorphisms:
        found = periodic_classes(phi, scan_length, scan_power)
        if found:
            c, k = found[0]
            out.append(Diagnostic(
                "warning",
                f"periodic class found: {name}^{k} fixes [{format_word(c.cyclic_word)}] "
                f"({len(found)} classes of length <= {scan_length} periodic with power <= {scan_power})"))
    return out


def presentation(cfg: ExperimentConfig) -> ExtensionPresentation:
    return ExtensionPresentation(cfg.rank, [phi for _, phi in cfg.automorphisms], cfg.name)


def _classes(cfg, key="classes"):
    return [ConjugacyClass(w) for w in cfg.get_words(key)]


def _automorphism(cfg, name):
    for n, phi in cfg.automorphisms:
        if n == name:
            return phi
    cfg._error("H", f"unknown automorphism {name!r}")


def _graph(cfg, key, rng, G=None) -> MarkedGraph:
    source = cfg.get_str(key)
    if source == "rose":
        return rose([Fraction(1, cfg.rank)] * cfg.rank)
    if source == "random":
        return random_marked_graph(rng, cfg.rank)
    if source == "same" and G is not None:
        return G
    if source.startswith("act ") and G is not None:
        return act(_automorphism(cfg, source.split()[1]), G)
    path = cfg.base_dir / source
    try:
        H = MarkedGraph.from_text(path.read_text())
    except OSError:
        cfg._error(key, f"{key}: expected rose, random, same, act tN or a graph file, got {source!r}")
    except ValueError as exc:
        cfg._error(key, f"{key}: {exc}")
    if H.rank != cfg.rank:
        cfg._error(key, f"{key}: graph rank {H.rank} differs from config rank {cfg.rank}")
    return H


# --- runners -------------------------------------------------------------------------------

def run_distance(cfg, rng, cap) -> Report:
    rows = []
    for i in range(cfg.get_int("pairs")):
        G = _graph(cfg, "G", rng)
        H = _graph(cfg, "H", rng, G)
        d1, d2 = lipschitz_distance(G, H), lipschitz_distance(H, G)
        rows.append((i, d1, d2, symmetrized_distance(G, H)))
    return Report(["pair", "d_GH", "d_HG", "symmetrized"], rows,
                  {"pairs": len(rows), "max_d_GH": max((r[1] for r in rows), default=0.0)})


def run_fold(cfg, rng, cap) -> Report:
    dt = cfg.get_float("dt")
    G = _graph(cfg, "G", rng)
    if cfg.get_str("H") == "fold":
        path = folding_path_from_map(random_folding_map(rng, G, n_folds=6), dt)
        H = path.graphs[-1]
    else:
        H = _graph(cfg, "H", rng, G)
        path = folding_path(G, H, dt)
    rows = [(i, path.times[i], path.times[i + 1], s) for i, s in enumerate(path.log_stretches)]
    d = lipschitz_distance(G, H)
    total = sum(path.log_stretches) + (path.prefix[2] if path.prefix else 0.0)
    violations = 0
    for c in _classes(cfg):
        violations += len(check_legal_flare(path, c).violations)
    summary = {"steps": len(rows), "distance": d, "log_stretch_total": total,
               "telescoping_error": abs(total - d), "legal_flare_violations": violations}
    return Report(["step", "t_start", "t_end", "log_stretch"], rows, summary, {"path.txt": path.to_text()})


def run_flare(cfg, rng, cap) -> Report:
    pres = presentation(cfg)
    R = unit_rose(cfg.rank)
    N, k = cfg.get_int("N"), cfg.get_float("k")
    rows, fits = [], {}
    for c in _classes(cfg):
        ms = min_set(pres, c, R, N)
        fit = flare_measure(pres, c, c, ms.center, N, R, k)
        name = format_word(c.cyclic_word)
        for ray, d, h, length, contained in fit.rows:
            rows.append((name, ray, d, pres.gamma_word(h), length, contained))
        fits[name] = {"minlen": float(ms.minlen), "center": pres.gamma_word(ms.center),
                      "min_set_size": len(ms.members), "C": fit.C, "lambda": fit.lam, "r2": fit.r2,
                      "exponential": fit.exponential}
    return Report(["class", "ray", "distance", "gamma", "length", "contained"], rows, {"fits": fits})


def width_verdict(values: list, bound: float) -> dict:
    """Stabilization read-out of a width table; None entries are overflowed rows."""
    seen = [v for v in values if v is not None]
    if not seen:
        return {"estimate": None, "onset": None, "nonincreasing_after_onset": None, "bounded": None,
                "strictly_increasing": None}
    onset = seen.index(max(seen))
    tail = seen[onset:]
    return {"estimate": max(seen), "onset": onset,
            "nonincreasing_after_onset": all(x >= y for x, y in zip(tail, tail[1:])),
            "bounded": max(seen) <= bound,
            "strictly_increasing": len(seen) == len(values) and all(x < y for x, y in zip(seen, seen[1:]))}


def run_width(cfg, rng, cap) -> Report:
    pres = presentation(cfg)
    Ns, bound = cfg.get_ints("N"), cfg.get_float("width_bound")
    rows, verdicts, overflow = [], {}, False
    for w in cfg.get_words("classes"):
        name = format_word(w)
        table = width_estimate(pres, w, Ns, cap)
        for r in table:
            rows.append((name, r.N, r.geodesic_length, r.diameter, r.nodes, r.overflow))
            overflow |= r.overflow
        verdicts[name] = width_verdict([r.diameter for r in table], bound)
    summary = {"width_bound": bound, "classes": verdicts}
    return Report(["class", "N", "geodesic_length", "diameter", "nodes", "overflow"], rows, summary, overflow=overflow)


def run_pl_ball(cfg, rng, cap) -> Report:
    L = cfg.get_int("L")
    ball = build_pl_ball(L, cfg.rank)
    alpha = cfg.get_words("orbit_class")[0]
    if not is_primitive(alpha, cfg.rank):
        cfg._error("orbit_class", "orbit_class must be primitive")
    dist = ball.distances_from(ball.index(alpha))
    rows = [(format_word(c.cyclic_word), len(nb), dist[i]) for i, (c, nb) in enumerate(zip(ball.vertices, ball.adjacency))]
    summary = {"vertices": len(ball.vertices), "edges": len(ball.edges)}
    if cfg.automorphisms:
        table = orbit_distance_table(cfg.automorphisms[0][1], alpha, L, cfg.get_int("n_max"), cfg.rank)
        summary["orbit_table"] = [list(r) for r in table]
    return Report(["class", "degree", "distance_from_orbit_class"], rows, summary, {"graph.txt": ball.to_text()})


def run_lift(cfg, rng, cap) -> Report:
    H = stallings_graph(cfg.get_words("subgroup"), cfg.rank)
    if H.index != 2:
        cfg._error("subgroup", f"subgroup must have index 2, has index {H.index}")
    rows = []
    for i in range(cfg.get_int("pairs")):
        G1, G2 = random_marked_graph(rng, cfg.rank), random_marked_graph(rng, cfg.rank)
        d, dc = lipschitz_distance(G1, G2), lipschitz_distance(cover(G1, H), cover(G2, H))
        rows.append((i, d, dc, abs(d - dc)))
    worst = max((r[3] for r in rows), default=0.0)
    return Report(["pair", "d_X", "d_cover", "abs_difference"], rows,
                  {"pairs": len(rows), "max_abs_difference": worst, "isometric_within_1e-9": worst <= 1e-9})


def run_quasiconvexity(cfg, rng, cap) -> Report:
    pres = presentation(cfg)
    H = stallings_graph(cfg.get_words("subgroup"), cfg.rank)
    rows, overflow = [], False
    for N in cfg.get_ints("N"):
        r = quasiconvexity_probe(pres, H, N, cfg.get_int("pairs"), seed=cfg.seed, cap=cap)
        rows.append((N, r["pairs"], r["offset"], r["overflow"]))
        overflow |= r["overflow"]
    return Report(["N", "pairs", "offset", "overflow"], rows,
                  {"subgroup_index": H.index, "max_offset": max((r[2] for r in rows), default=0)}, overflow=overflow)


def ball_graph(pres, radius, cap, fiber_only=False, start=None) -> FiniteMetricGraph:
    """The ball of the given radius about start (default the identity) in the bundle, or in its fiber tree."""
    start = start if start is not None else FiberPoint(0, ())
    index = {start: 0}
    q = deque([start])
    depth = {start: 0}
    edges = set()
    K = 2 * pres.rank if fiber_only else pres.n_bundle_generators
    while q:
        p = q.popleft()
        for k in range(K):
            y = pres.step(p, k)
            if y not in index:
                if depth[p] == radius:
                    continue
                if len(index) >= cap:
                    raise CapExceeded(f"ball exceeded {cap} vertices")
                index[y] = len(index)
                depth[y] = depth[p] + 1
                q.append(y)
            i, j = index[p], index[y]
            edges.add((min(i, j), max(i, j)))
    return FiniteMetricGraph.unweighted(len(index), sorted(edges))


def run_hyperbolicity(cfg, rng, cap) -> Report:
    pres = presentation(cfg)
    r = cfg.get_int("radius")
    budget, samples = cfg.get_int("budget"), cfg.get_int("samples")
    rows = []
    for space, fiber_only in (("fiber tree", True), ("bundle", False)):
        g = ball_graph(pres, r, cap, fiber_only)
        est = delta_fourpoint(g, budget=budget, samples=samples, seed=cfg.seed)
        rows.append((space, g.n, est.value, est.label))
    return Report(["space", "vertices", "delta", "label"], rows, {"radius": r})


RUNNERS = {
    "distance": run_distance,
    "fold": run_fold,
    "flare": run_flare,
    "width": run_width,
    "pl-ball": run_pl_ball,
    "lift": run_lift,
    "quasiconvexity": run_quasiconvexity,
    "hyperbolicity": run_hyperbolicity,
}


def run(cfg: ExperimentConfig, seed: int | None = None, cap: int | None = None) -> Report:
    errors = [d for d in validate(cfg) if d.level == "error"]
    if errors:
        raise ConfigError(errors[0].message, None, None, cfg.path)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return RUNNERS[cfg.kind](cfg, rng, cfg.cap if cap is None else cap)


# --- output ----------------------------------------------------------------------------------

def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, Fraction, np.floating)):
        x = float(x)
        return "inf" if math.isinf(x) else f"{x:.12g}"
    return str(x)


def clean(x):
    """JSON-ready copy with floats rounded to 12 significant digits."""
    if isinstance(x, dict):
        return {str(k): clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [clean(v) for v in x]
    if isinstance(x, bool) or x is None or isinstance(x, (int, str)):
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    x = float(x)
    return None if not math.isfinite(x) else float(f"{x:.12g}")


def to_csv(report: Report) -> str:
    lines = [",".join(report.columns)]
    for row in report.rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_report(report: Report, cfg: ExperimentConfig, out: Path, seed: int, cap: int) -> list:
    import json

    out.mkdir(parents=True, exist_ok=True)
    stem = cfg.name
    written = []
    (out / f"{stem}.csv").write_text(to_csv(report))
    written.append(out / f"{stem}.csv")
    doc = {"name": cfg.name, "kind": cfg.kind, "rank": cfg.rank, "seed": seed, "cap": cap,
           "generators": [f"{n}: {phi}" for n, phi in cfg.automorphisms],
           "overflow": report.overflow, "columns": report.columns, "rows": clean(report.rows),
           "summary": clean(report.summary)}
    (out / f"{stem}.json").write_text(json.dumps(doc, indent=1) + "\n")
    written.append(out / f"{stem}.json")
    for suffix, text in report.files.items():
        (out / f"{stem}.{suffix}").write_text(text)
        written.append(out / f"{stem}.{suffix}")
    return written
