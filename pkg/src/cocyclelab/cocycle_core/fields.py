"""Scalar parameter fields over the base.

Cocycle families are parametrized by maps x -> R (rotation angles, bump
amplitudes, matrix rates).  Each field evaluates pointwise at a base point,
vectorizes over a precomputed orbit, and pulls back exactly under the base
map, which keeps coboundary-generated cocycles closed under the same
representation.
"""

from __future__ import annotations

import numpy as np

from ..base_dynamics.torus import CatMapSystem, TorusPoint
from ..base_dynamics.shift import SftPoint, SftSystem


class OrbitData:
    """Base-orbit samples shared by every field evaluation along an orbit.

    For a torus base, `positions` holds the (N, 2) coordinate rows.  For a
    shift base, `symbols` is a symbol array covering the window
    [origin_k - pad, origin_k + N - 1 + pad] of the orbit through row 0.
    """

    def __init__(self, system, positions=None, symbols=None, symbols_origin=0,
                 n_rows=None):
        self.system = system
        self.positions = positions
        self.symbols = symbols
        self.symbols_origin = symbols_origin
        if positions is not None:
            self.n_rows = len(positions)
        else:
            self.n_rows = n_rows

    @staticmethod
    def from_orbit(system, x, n: int, pad: int = 8) -> "OrbitData":
        """Orbit rows x, f x, ..., f^n x (n+1 rows)."""
        if isinstance(system, CatMapSystem):
            coords = x.as_array() if isinstance(x, TorusPoint) else np.asarray(x)
            return OrbitData(system, positions=system.orbit_array(coords, n))
        symbols = np.array([x.symbol(j) for j in range(-pad, n + pad + 1)],
                           dtype=np.int64)
        return OrbitData(system, symbols=symbols, symbols_origin=pad,
                         n_rows=n + 1)

    @staticmethod
    def from_plan(system, plan) -> "OrbitData":
        """Wrap a transitive orbit plan; row r is iterate r - n_backward."""
        if getattr(plan, "positions", None) is not None:
            return OrbitData(system, positions=plan.positions)
        return OrbitData(system, symbols=plan.symbols,
                         symbols_origin=plan.symbols_origin - plan.n_backward,
                         n_rows=plan.N + 1)

    def symbol_rows(self, lo: int, hi: int) -> np.ndarray:
        """(n_rows, hi-lo+1) window of symbols around each orbit row."""
        if (self.symbols_origin + lo < 0
                or self.symbols_origin + self.n_rows - 1 + hi >= len(self.symbols)):
            raise ValueError(
                f"orbit symbol data does not cover window [{lo}, {hi}]; "
                "use a deeper grid or more padding")
        offs = np.arange(lo, hi + 1)
        idx = self.symbols_origin + np.arange(self.n_rows)[:, None] + offs[None, :]
        return self.symbols[idx]


class BaseFunction:
    kind = "abstract"

    def value(self, system, x) -> float:
        raise NotImplementedError

    def values(self, orbit: OrbitData) -> np.ndarray:
        raise NotImplementedError

    def pullback(self, system, k: int = 1) -> "BaseFunction":
        """The field x -> value(f^k x), in the same representation."""
        raise NotImplementedError

    def sup_norm(self) -> float:
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


class Const(BaseFunction):
    kind = "const"

    def __init__(self, c: float):
        self.c = float(c)

    def value(self, system, x):
        return self.c

    def values(self, orbit):
        return np.full(orbit.n_rows, self.c)

    def pullback(self, system, k=1):
        return self

    def sup_norm(self):
        return abs(self.c)

    def to_config(self):
        return {"kind": "const", "c": self.c}

    def __repr__(self):
        return f"Const({self.c})"


class Trig(BaseFunction):
    """Finite trigonometric sum on the 2-torus.

    terms: sequence of (amplitude, (k1, k2), phase) contributing
    amplitude * cos(2 pi (k1 x1 + k2 x2) + phase).  Integer frequency
    vectors make the pullback under a linear automorphism exact: the
    frequency k becomes A^T k.
    """

    kind = "trig"

    def __init__(self, terms):
        self.terms = [(float(a), (int(k[0]), int(k[1])), float(ph))
                      for a, k, ph in terms]

    def value(self, system, x):
        coords = x.as_array() if isinstance(x, TorusPoint) else np.asarray(x)
        total = 0.0
        for a, k, ph in self.terms:
            total += a * np.cos(2.0 * np.pi * (k[0] * coords[0] + k[1] * coords[1]) + ph)
        return float(total)

    def values(self, orbit):
        pos = orbit.positions
        total = np.zeros(len(pos))
        for a, k, ph in self.terms:
            total += a * np.cos(2.0 * np.pi * (pos @ np.array(k, dtype=float)) + ph)
        return total

    def pullback(self, system, k=1):
        if not isinstance(system, CatMapSystem):
            raise TypeError("trig fields live over a torus base")
        m = system.int_matrix if k >= 0 else system.int_inverse
        mt = [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
        terms = self.terms
        for _ in range(abs(k)):
            terms = [(a, (mt[0][0] * kk[0] + mt[0][1] * kk[1],
                          mt[1][0] * kk[0] + mt[1][1] * kk[1]), ph)
                     for a, kk, ph in terms]
        return Trig(terms)

    def sup_norm(self):
        return sum(abs(a) for a, _, _ in self.terms)

    def to_config(self):
        return {"kind": "trig",
                "terms": [[a, list(k), ph] for a, k, ph in self.terms]}

    def __repr__(self):
        return f"Trig({self.terms!r})"


class Cylinder(BaseFunction):
    """Locally constant function on a shift, determined by the window
    [-radius, radius].  Words absent from the table take `default`."""

    kind = "cylinder"

    def __init__(self, radius: int, table: dict, default: float = 0.0):
        self.radius = int(radius)
        self.table = {tuple(int(s) for s in w): float(v) for w, v in table.items()}
        self.default = float(default)
        width = 2 * self.radius + 1
        for w in self.table:
            if len(w) != width:
                raise ValueError(f"table word {w} does not have length {width}")

    def value(self, system, x):
        w = tuple(x.symbol(j) for j in range(-self.radius, self.radius + 1))
        return self.table.get(w, self.default)

    def values(self, orbit):
        rows = orbit.symbol_rows(-self.radius, self.radius)
        n_sym = len(orbit.system.transition)
        width = 2 * self.radius + 1
        powers = n_sym ** np.arange(width - 1, -1, -1, dtype=np.int64)
        lookup = np.full(n_sym ** width, self.default)
        for w, v in self.table.items():
            lookup[int(np.dot(w, powers))] = v
        return lookup[rows @ powers]

    def pullback(self, system, k=1):
        if not isinstance(system, SftSystem):
            raise TypeError("cylinder fields live over a shift base")
        if k == 0:
            return self
        r_new = self.radius + abs(k)
        width_new = 2 * r_new + 1
        shift = k + r_new - self.radius   # start of the old window inside the new
        table = {}
        for w in system.admissible_words(width_new):
            sub = w[shift:shift + 2 * self.radius + 1]
            v = self.table.get(sub, self.default)
            if v != self.default:
                table[w] = v
        return Cylinder(r_new, table, self.default)

    def sup_norm(self):
        vals = [abs(v) for v in self.table.values()] + [abs(self.default)]
        return max(vals)

    def to_config(self):
        return {"kind": "cylinder", "radius": self.radius,
                "default": self.default,
                "table": {"".join(str(s) for s in w): v
                          for w, v in self.table.items()}}

    def __repr__(self):
        return f"Cylinder(radius={self.radius}, entries={len(self.table)})"


def field_from_config(cfg: dict) -> BaseFunction:
    kind = cfg.get("kind")
    if kind == "const":
        return Const(cfg["c"])
    if kind == "trig":
        return Trig([(t[0], tuple(t[1]), t[2]) for t in cfg["terms"]])
    if kind == "cylinder":
        table = {tuple(int(ch) for ch in w): v for w, v in cfg["table"].items()}
        return Cylinder(cfg["radius"], table, cfg.get("default", 0.0))
    raise ValueError(f"unknown field kind {kind!r}")
