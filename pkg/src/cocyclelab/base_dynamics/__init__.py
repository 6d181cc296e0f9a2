"""Concrete hyperbolic base systems and their orbit machinery.

Two bases are provided: hyperbolic toral automorphisms (`CatMapSystem`) and
two-sided subshifts of finite type (`SftSystem`).  Both expose the same
surface: stepping, the adapted metric (optionally snapped by a Hoelder
exponent), the bracket, exact periodic-point enumeration, the closing
construction, and dense-orbit plans over an experiment grid.
"""

from __future__ import annotations

import csv

from .hyperbolic import (ClosingError, ClosingResult, CoverageError,
                         DenseOrbitPlan, HyperbolicityData, TorusGrid)
from .shift import SftGrid, SftPoint, SftSystem, sft_transitive_plan, _primitive_root
from .torus import CatMapSystem, TorusPoint, wrap_half, wrap_unit

__all__ = [
    "CatMapSystem", "TorusPoint", "SftSystem", "SftPoint", "SftGrid",
    "TorusGrid", "HyperbolicityData", "ClosingResult", "ClosingError",
    "CoverageError", "DenseOrbitPlan",
    "base_step", "distance", "bracket", "periodic_points", "periodic_count",
    "anosov_closing", "transitive_point", "make_grid",
    "periodic_orbit_representatives", "write_periodic_points_csv",
]


def base_step(system, x, k: int = 1):
    """k-th iterate of the base map (negative k steps backward)."""
    return system.step(x, k)


def distance(system, x, y, alpha: float | None = None) -> float:
    return system.distance(x, y, alpha)


def bracket(system, x, y):
    return system.bracket(x, y)


def periodic_points(system, n: int) -> list:
    return system.periodic_points(n)


def periodic_count(system, n: int) -> int:
    return system.periodic_count(n)


def anosov_closing(system, x, n: int, positions=None) -> ClosingResult:
    return system.anosov_closing(x, n, positions)


def make_grid(system, resolution: float):
    """Experiment grid at the requested metric resolution."""
    if system.kind == "cat_map":
        return system.grid_for_resolution(resolution)
    if resolution >= system.diameter:
        return SftGrid(system, 0)
    import math
    depth = max(0, math.ceil(math.log(resolution) / math.log(system.theta)))
    return SftGrid(system, depth)


def transitive_point(system, resolution: float, two_sided: bool = False) -> DenseOrbitPlan:
    """Dense-orbit plan whose first-visit map covers the resolution grid."""
    grid = make_grid(system, resolution)
    return make_plan(system, grid, two_sided=two_sided)


def make_plan(system, grid, two_sided: bool = False, seed_point=None) -> DenseOrbitPlan:
    if system.kind == "cat_map":
        return system.transitive_plan(grid, two_sided=two_sided, seed_point=seed_point)
    return sft_transitive_plan(system, grid, two_sided=two_sided)


def periodic_orbit_representatives(system, n_max: int) -> list:
    """One representative per periodic orbit of primitive period <= n_max.

    Returns (point, period) pairs; the period is the primitive one.
    """
    reps = []
    seen = set()
    for n in range(1, n_max + 1):
        for p in system.periodic_points(n):
            key = _orbit_key(system, p, n)
            if key in seen:
                continue
            seen.add(key)
            reps.append((p, n))
    return reps


def _orbit_key(system, p, n: int):
    if system.kind == "cat_map":
        pts = [p]
        for _ in range(n - 1):
            pts.append(system.step(pts[-1]))
        return min((round(q.x1, 9), round(q.x2, 9)) for q in pts)
    root = _primitive_root(p.center)
    return min(_rotations(root))


def _rotations(word):
    return [word[i:] + word[:i] for i in range(len(word))]


def write_periodic_points_csv(system, n_max: int, path):
    """Export Fix(f^n) for n = 1..n_max with columns (n, index, coordinates...)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if system.kind == "cat_map":
            writer.writerow(["n", "index", "x1", "x2"])
            for n in range(1, n_max + 1):
                for i, p in enumerate(system.periodic_points(n)):
                    writer.writerow([n, i, repr(p.x1), repr(p.x2)])
        else:
            writer.writerow(["n", "index", "word"])
            for n in range(1, n_max + 1):
                for i, p in enumerate(system.periodic_points(n)):
                    writer.writerow([n, i, "".join(map(str, p.center))])
    return path
