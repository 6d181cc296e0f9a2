"""Cocycles over a hyperbolic base and the skew products they generate.

Every built-in family evaluates its lift, fiber derivative, and inverse in
closed form at arbitrary fiber points, so products along orbits accumulate
only rounding error.  Sampled group elements appear in two places only:
snapshots returned to the caller, and grid-tabulated cocycles read from disk.

Composition order: a factor list [g1, g2, g3] means x -> g1(x) o g2(x) o g3(x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .circle import (G_DEFAULT, CircleDiffeo, identity_defect, monotone_repair)
from .fields import (BaseFunction, Const, Cylinder, OrbitData, Trig,
                     field_from_config)

_TWO_PI = 2.0 * math.pi


def _pick(params: tuple, i):
    """Per-row parameter values; i may be an int or an index array."""
    return tuple(p[i] for p in params)


# ---------------------------------------------------------------------------
# circle factors
# ---------------------------------------------------------------------------

class RotationFactor:
    """y -> y + tau(x)."""

    kind = "rotation"

    def __init__(self, angle: BaseFunction):
        self.angle = angle

    def params_point(self, system, x):
        return (self.angle.value(system, x),)

    def params_orbit(self, orbit: OrbitData):
        return (self.angle.values(orbit),)

    def lift_vals(self, params, y):
        return y + params[0]

    def deriv_vals(self, params, y):
        return np.ones_like(np.asarray(y, dtype=float) + params[0])

    def inv_vals(self, params, z):
        return z - params[0]

    def to_config(self):
        return {"kind": "rotation", "angle": self.angle.to_config()}


class BumpFactor:
    """y -> y + (a(x) / 2 pi) sin(2 pi (y - phi(x))).

    Parabolic interpolation between a hyperbolic fixed point at phi(x) with
    multiplier 1 + a and one at phi(x) + 1/2 with multiplier 1 - a.  Requires
    sup |a| < 1 to stay in the diffeomorphism group.
    """

    kind = "bump"

    def __init__(self, amplitude: BaseFunction, phase: BaseFunction | None = None):
        if amplitude.sup_norm() >= 1.0:
            raise ValueError(
                f"bump amplitude sup {amplitude.sup_norm():.6g} must be < 1")
        self.amplitude = amplitude
        self.phase = phase if phase is not None else Const(0.0)

    def params_point(self, system, x):
        return (self.amplitude.value(system, x), self.phase.value(system, x))

    def params_orbit(self, orbit):
        return (self.amplitude.values(orbit), self.phase.values(orbit))

    def lift_vals(self, params, y):
        a, ph = params
        return y + (a / _TWO_PI) * np.sin(_TWO_PI * (y - ph))

    def deriv_vals(self, params, y):
        a, ph = params
        return 1.0 + a * np.cos(_TWO_PI * (y - ph))

    def inv_vals(self, params, z):
        # Newton solve of lift(y) = z; the lift is a contraction perturbation
        # of the identity, so convergence is global and quadratic.
        a, ph = params
        y = z - (a / _TWO_PI) * np.sin(_TWO_PI * (z - ph))
        for _ in range(60):
            f = y + (a / _TWO_PI) * np.sin(_TWO_PI * (y - ph)) - z
            if np.max(np.abs(f)) < 1e-15:
                break
            y = y - f / (1.0 + a * np.cos(_TWO_PI * (y - ph)))
        return y

    def to_config(self):
        return {"kind": "bump", "amplitude": self.amplitude.to_config(),
                "phase": self.phase.to_config()}


_FACTOR_KINDS = {}


def factor_from_config(cfg: dict):
    kind = cfg.get("kind")
    if kind == "rotation":
        return RotationFactor(field_from_config(cfg["angle"]))
    if kind == "bump":
        phase = field_from_config(cfg["phase"]) if "phase" in cfg else None
        return BumpFactor(field_from_config(cfg["amplitude"]), phase)
    raise ValueError(f"unknown circle factor kind {kind!r}")


class DiffeoField:
    """Map x -> circle diffeo, a pointwise composition of parametrized factors."""

    def __init__(self, factors):
        self.factors = list(factors)

    def lift_point(self, system, x, y):
        for f in reversed(self.factors):
            y = f.lift_vals(f.params_point(system, x), y)
        return y

    def deriv_point(self, system, x, y):
        d = np.ones_like(np.asarray(y, dtype=float))
        for f in reversed(self.factors):
            p = f.params_point(system, x)
            d = d * f.deriv_vals(p, y)
            y = f.lift_vals(p, y)
        return d

    def inv_point(self, system, x, z):
        for f in self.factors:
            z = f.inv_vals(f.params_point(system, x), z)
        return z

    def snapshot(self, system, x, G: int = G_DEFAULT) -> CircleDiffeo:
        grid = np.arange(G) / G
        lift = np.asarray(self.lift_point(system, x, grid), dtype=float)
        deriv = np.asarray(self.deriv_point(system, x, grid), dtype=float)
        return CircleDiffeo(monotone_repair(lift), deriv)

    def params_orbit(self, orbit: OrbitData):
        return [f.params_orbit(orbit) for f in self.factors]

    def to_config(self):
        return [f.to_config() for f in self.factors]

    @staticmethod
    def from_config(cfgs) -> "DiffeoField":
        return DiffeoField([factor_from_config(c) for c in cfgs])


class _FieldRowEval:
    """Evaluates a DiffeoField at orbit row i: lift, derivative, inverse."""

    def __init__(self, factors, params):
        self.factors = factors
        self.params = params

    def lift(self, i, y):
        for f, p in zip(reversed(self.factors), reversed(self.params)):
            y = f.lift_vals(_pick(p, i), y)
        return y

    def deriv(self, i, y):
        d = np.ones_like(np.asarray(y, dtype=float))
        for f, p in zip(reversed(self.factors), reversed(self.params)):
            pi = _pick(p, i)
            d = d * f.deriv_vals(pi, y)
            y = f.lift_vals(pi, y)
        return d

    def lift_and_deriv(self, i, y):
        d = np.ones_like(np.asarray(y, dtype=float))
        for f, p in zip(reversed(self.factors), reversed(self.params)):
            pi = _pick(p, i)
            d = d * f.deriv_vals(pi, y)
            y = f.lift_vals(pi, y)
        return y, d

    def inv(self, i, z):
        for f, p in zip(self.factors, self.params):
            z = f.inv_vals(_pick(p, i), z)
        return z


# ---------------------------------------------------------------------------
# circle cocycles
# ---------------------------------------------------------------------------

class FamilyCocycle:
    """Phi(x) = field(x); the direct (non-coboundary) circle families."""

    fiber = "circle"

    def __init__(self, field: DiffeoField, alpha: float, family_id: str):
        self.field = field
        self.alpha = float(alpha)
        self.family_id = family_id

    def evaluator(self, system, orbit: OrbitData):
        inner = _FieldRowEval(self.field.factors, self.field.params_orbit(orbit))
        return _FamilyEvaluator(inner, orbit.n_rows)

    def snapshot(self, system, x, G: int = G_DEFAULT) -> CircleDiffeo:
        return self.field.snapshot(system, x, G)

    def to_config(self):
        return {"family": self.family_id, "alpha": self.alpha,
                "factors": self.field.to_config()}


class _FamilyEvaluator:
    def __init__(self, inner: _FieldRowEval, n_rows: int):
        self._e = inner
        self.n_steps = n_rows

    def lift_at(self, i, y):
        return self._e.lift(i, y)

    def deriv_at(self, i, y):
        return self._e.deriv(i, y)

    def lift_and_deriv_at(self, i, y):
        return self._e.lift_and_deriv(i, y)

    def inv_at(self, i, z):
        return self._e.inv(i, z)


class CoboundaryCocycle:
    """Phi(x) = u(f x) o u(x)^(-1) for a generator field u.

    Algebraically a coboundary by construction; evaluation composes the
    closed forms, so no sampling enters the product chains.
    """

    fiber = "circle"

    def __init__(self, generator: DiffeoField, alpha: float,
                 family_id: str = "coboundary_generated"):
        self.generator = generator
        self.alpha = float(alpha)
        self.family_id = family_id

    def evaluator(self, system, orbit: OrbitData):
        inner = _FieldRowEval(self.generator.factors,
                              self.generator.params_orbit(orbit))
        return _CoboundaryEvaluator(inner, orbit.n_rows)

    def snapshot(self, system, x, G: int = G_DEFAULT) -> CircleDiffeo:
        grid = np.arange(G) / G
        ev = self.evaluator(system, OrbitData.from_orbit(system, x, 1))
        lift, deriv = ev.lift_and_deriv_at(0, grid)
        return CircleDiffeo(monotone_repair(np.asarray(lift, dtype=float)),
                            np.asarray(deriv, dtype=float))

    def generator_snapshot(self, system, x, G: int = G_DEFAULT) -> CircleDiffeo:
        return self.generator.snapshot(system, x, G)

    def to_config(self):
        return {"family": self.family_id, "alpha": self.alpha,
                "generator": self.generator.to_config()}


class _CoboundaryEvaluator:
    """Steps i use generator rows i and i+1."""

    def __init__(self, inner: _FieldRowEval, n_rows: int):
        self._e = inner
        self.n_steps = n_rows - 1

    def _next(self, i):
        if isinstance(i, (int, np.integer)):
            return i + 1
        return np.asarray(i) + 1

    def lift_at(self, i, y):
        w = self._e.inv(i, y)
        return self._e.lift(self._next(i), w)

    def deriv_at(self, i, y):
        w = self._e.inv(i, y)
        return self._e.deriv(self._next(i), w) / self._e.deriv(i, w)

    def lift_and_deriv_at(self, i, y):
        w = self._e.inv(i, y)
        d_in = self._e.deriv(i, w)
        out, d_out = self._e.lift_and_deriv(self._next(i), w)
        return out, d_out / d_in

    def inv_at(self, i, z):
        w = self._e.inv(self._next(i), z)
        return self._e.lift(i, w)


class GridTableCocycle:
    """Phi constant on grid cells, each value a sampled circle diffeo.

    The one family whose evaluation interpolates; it exists so solved
    transfer functions and on-disk tables can re-enter the pipeline.
    """

    fiber = "circle"

    def __init__(self, grid, table: dict, alpha: float,
                 family_id: str = "grid_table"):
        self.grid = grid
        self.table = dict(table)
        self.alpha = float(alpha)
        self.family_id = family_id
        sizes = {g.G for g in table.values()}
        if len(sizes) > 1:
            raise ValueError("all cell diffeos must share one grid size")
        self.G = sizes.pop() if sizes else G_DEFAULT

    def _codes(self, orbit: OrbitData) -> np.ndarray:
        if orbit.positions is not None:
            return self.grid.code_of_array(orbit.positions)
        rows = orbit.symbol_rows(-self.grid.depth, self.grid.depth)
        return rows @ self.grid._powers

    def cell_diffeo(self, code: int) -> CircleDiffeo:
        try:
            return self.table[int(code)]
        except KeyError:
            raise KeyError(f"grid table has no entry for cell {code}") from None

    def evaluator(self, system, orbit: OrbitData):
        return _GridTableEvaluator(self, self._codes(orbit))

    def snapshot(self, system, x, G: int | None = None) -> CircleDiffeo:
        if hasattr(self.grid, "cell_of"):
            g = self.cell_diffeo(self.grid.cell_of(x))
        else:
            g = self.cell_diffeo(int(self.grid.code_of_array(x.as_array())))
        return g

    def to_config(self):
        return {"family": self.family_id, "alpha": self.alpha,
                "grid": self.grid.describe(), "cells": len(self.table)}


class _GridTableEvaluator:
    def __init__(self, coc: GridTableCocycle, codes: np.ndarray):
        self._coc = coc
        self._codes = codes
        self.n_steps = len(codes)

    def _g(self, i) -> CircleDiffeo:
        if not isinstance(i, (int, np.integer)):
            raise TypeError("grid-table evaluation steps one row at a time")
        return self._coc.cell_diffeo(self._codes[i])

    def lift_at(self, i, y):
        return self._g(i).eval_lift(y)

    def deriv_at(self, i, y):
        return self._g(i).eval_deriv(y)

    def lift_and_deriv_at(self, i, y):
        g = self._g(i)
        return g.eval_lift(y), g.eval_deriv(y)

    def inv_at(self, i, z):
        return self._g(i).inverse_lift(z)


# ---------------------------------------------------------------------------
# matrix factors and linear cocycles
# ---------------------------------------------------------------------------

class RotationMatrixFactor:
    """2x2 rotation by angle(x) radians."""

    kind = "rotation_matrix"
    dim = 2

    def __init__(self, angle: BaseFunction):
        self.angle = angle

    def mats_orbit(self, orbit: OrbitData) -> np.ndarray:
        th = self.angle.values(orbit)
        c, s = np.cos(th), np.sin(th)
        out = np.empty((len(th), 2, 2))
        out[:, 0, 0] = c
        out[:, 0, 1] = -s
        out[:, 1, 0] = s
        out[:, 1, 1] = c
        return out

    def mat_point(self, system, x) -> np.ndarray:
        th = self.angle.value(system, x)
        c, s = math.cos(th), math.sin(th)
        return np.array([[c, -s], [s, c]])

    def to_config(self):
        return {"kind": "rotation_matrix", "angle": self.angle.to_config()}


class DiagExpFactor:
    """diag(exp(r_1(x)), ..., exp(r_d(x)))."""

    kind = "diag_exp"

    def __init__(self, rates):
        self.rates = list(rates)
        self.dim = len(self.rates)

    def mats_orbit(self, orbit):
        vals = np.stack([np.exp(r.values(orbit)) for r in self.rates], axis=-1)
        out = np.zeros((orbit.n_rows, self.dim, self.dim))
        idx = np.arange(self.dim)
        out[:, idx, idx] = vals
        return out

    def mat_point(self, system, x):
        return np.diag([math.exp(r.value(system, x)) for r in self.rates])

    def to_config(self):
        return {"kind": "diag_exp", "rates": [r.to_config() for r in self.rates]}


class FixedMatrixFactor:
    kind = "fixed_matrix"

    def __init__(self, matrix):
        self.matrix = np.asarray(matrix, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("fixed factor must be a square matrix")
        if abs(np.linalg.det(self.matrix)) < 1e-12:
            raise ValueError("fixed factor must be invertible")
        self.dim = self.matrix.shape[0]

    def mats_orbit(self, orbit):
        return np.broadcast_to(self.matrix, (orbit.n_rows,) + self.matrix.shape).copy()

    def mat_point(self, system, x):
        return self.matrix

    def to_config(self):
        return {"kind": "fixed_matrix", "matrix": self.matrix.tolist()}


def matrix_factor_from_config(cfg: dict):
    kind = cfg.get("kind")
    if kind == "rotation_matrix":
        return RotationMatrixFactor(field_from_config(cfg["angle"]))
    if kind == "diag_exp":
        return DiagExpFactor([field_from_config(c) for c in cfg["rates"]])
    if kind == "fixed_matrix":
        return FixedMatrixFactor(cfg["matrix"])
    raise ValueError(f"unknown matrix factor kind {kind!r}")


class MatrixField:
    """Map x -> GL(d), a pointwise product of parametrized matrix factors."""

    def __init__(self, factors):
        self.factors = list(factors)
        dims = {f.dim for f in self.factors}
        if len(dims) != 1:
            raise ValueError("matrix factors must agree on dimension")
        self.dim = dims.pop()

    def value(self, system, x) -> np.ndarray:
        out = np.eye(self.dim)
        for f in self.factors:
            out = out @ f.mat_point(system, x)
        return out

    def values_orbit(self, orbit: OrbitData) -> np.ndarray:
        out = None
        for f in self.factors:
            m = f.mats_orbit(orbit)
            out = m if out is None else np.einsum("nij,njk->nik", out, m)
        if out is None:
            out = np.broadcast_to(np.eye(self.dim),
                                  (orbit.n_rows, self.dim, self.dim)).copy()
        return out

    def to_config(self):
        return [f.to_config() for f in self.factors]

    @staticmethod
    def from_config(cfgs) -> "MatrixField":
        return MatrixField([matrix_factor_from_config(c) for c in cfgs])


class LinearCocycle:
    """A(x) = field(x) acting on R^d."""

    fiber = "linear"

    def __init__(self, field: MatrixField, alpha: float,
                 family_id: str = "linear_family"):
        self.field = field
        self.alpha = float(alpha)
        self.family_id = family_id
        self.dim = field.dim

    def evaluator(self, system, orbit: OrbitData):
        return _LinearEvaluator(self.field.values_orbit(orbit))

    def matrix(self, system, x) -> np.ndarray:
        return self.field.value(system, x)

    def to_config(self):
        return {"family": self.family_id, "alpha": self.alpha,
                "dim": self.dim, "matrix_factors": self.field.to_config()}


class LinearCoboundary:
    """A(x) = V(f x) V(x)^(-1) for a generator field V."""

    fiber = "linear"

    def __init__(self, generator: MatrixField, alpha: float,
                 family_id: str = "coboundary_generated"):
        self.generator = generator
        self.alpha = float(alpha)
        self.family_id = family_id
        self.dim = generator.dim

    def evaluator(self, system, orbit: OrbitData):
        vals = self.generator.values_orbit(orbit)
        mats = np.einsum("nij,njk->nik", vals[1:],
                         np.linalg.inv(vals[:-1]))
        return _LinearEvaluator(mats)

    def matrix(self, system, x) -> np.ndarray:
        fx = system.step(x)
        return self.generator.value(system, fx) @ np.linalg.inv(
            self.generator.value(system, x))

    def to_config(self):
        return {"family": self.family_id, "alpha": self.alpha,
                "dim": self.dim, "matrix_generator": self.generator.to_config()}


class _LinearEvaluator:
    def __init__(self, mats: np.ndarray):
        self.mats = mats
        self._invs = None
        self.n_steps = len(mats)

    def mat_at(self, i):
        return self.mats[i]

    def inv_at(self, i):
        if self._invs is None:
            self._invs = np.linalg.inv(self.mats)
        return self._invs[i]


# ---------------------------------------------------------------------------
# skew products and orbit-wise operations
# ---------------------------------------------------------------------------

@dataclass
class SkewSystem:
    """Base system plus cocycle: F(x, y) = (f x, Phi(x) y)."""

    base: object
    cocycle: object

    @property
    def fiber(self) -> str:
        return self.cocycle.fiber

    def describe(self) -> str:
        return f"{self.base.kind} base, {self.cocycle.family_id} cocycle"


def skew_step(S: SkewSystem, state, k: int = 1):
    """k-fold skew product step from state = (x, y)."""
    x, y = state
    if k == 0:
        return state
    sys, coc = S.base, S.cocycle
    if k > 0:
        orbit = OrbitData.from_orbit(sys, x, k)
        ev = coc.evaluator(sys, orbit)
        if S.fiber == "circle":
            for i in range(k):
                y = ev.lift_at(i, y)
            y = float(np.asarray(y) % 1.0)
        else:
            for i in range(k):
                y = ev.mat_at(i) @ y
        return (sys.step(x, k), y)
    m = -k
    xm = sys.step(x, k)
    orbit = OrbitData.from_orbit(sys, xm, m)
    ev = coc.evaluator(sys, orbit)
    if S.fiber == "circle":
        for i in range(m - 1, -1, -1):
            y = ev.inv_at(i, y)
        y = float(np.asarray(y) % 1.0)
    else:
        for i in range(m - 1, -1, -1):
            y = ev.inv_at(i) @ y
    return (xm, y)


def cocycle_product(S: SkewSystem, x, n: int, G: int = G_DEFAULT):
    """Phi^(n)(x) as a sampled group element (or matrix for linear fibers).

    Circle products are computed by chaining closed-form lifts through the
    whole fiber grid at once, so the snapshot is exact at its samples up to
    rounding; negative n walks the inverse factors backward.
    """
    sys, coc = S.base, S.cocycle
    if S.fiber == "linear":
        d = coc.dim
        out = np.eye(d)
        if n == 0:
            return out
        if n > 0:
            ev = coc.evaluator(sys, OrbitData.from_orbit(sys, x, n))
            for i in range(n):
                out = ev.mat_at(i) @ out
            return out
        m = -n
        ev = coc.evaluator(sys, OrbitData.from_orbit(sys, sys.step(x, n), m))
        for i in range(m - 1, -1, -1):
            out = ev.inv_at(i) @ out
        return out

    grid = np.arange(G) / G
    if n == 0:
        return CircleDiffeo(grid.copy(), np.ones(G))
    y = grid.copy()
    d = np.ones(G)
    if n > 0:
        ev = coc.evaluator(sys, OrbitData.from_orbit(sys, x, n))
        for i in range(n):
            y, di = ev.lift_and_deriv_at(i, y)
            d = d * di
    else:
        m = -n
        ev = coc.evaluator(sys, OrbitData.from_orbit(sys, sys.step(x, n), m))
        for i in range(m - 1, -1, -1):
            y = ev.inv_at(i, y)
            d = d / ev.deriv_at(i, y)
    return CircleDiffeo(monotone_repair(np.asarray(y, dtype=float)),
                        np.asarray(d, dtype=float))


def fiber_derivative(S: SkewSystem, state, n: int):
    """D Phi^(n) at the fiber point: scalar for circles, matrix for linear."""
    x, y = state
    if S.fiber == "linear":
        return cocycle_product(S, x, n)
    if n == 0:
        return 1.0
    sys, coc = S.base, S.cocycle
    if n > 0:
        ev = coc.evaluator(sys, OrbitData.from_orbit(sys, x, n))
        d = 1.0
        for i in range(n):
            y, di = ev.lift_and_deriv_at(i, y)
            d *= float(di)
        return d
    m = -n
    ev = coc.evaluator(sys, OrbitData.from_orbit(sys, sys.step(x, n), m))
    d = 1.0
    for i in range(m - 1, -1, -1):
        y = ev.inv_at(i, y)
        d /= float(ev.deriv_at(i, y))
    return d


# ---------------------------------------------------------------------------
# periodic-orbit obstruction
# ---------------------------------------------------------------------------

@dataclass
class PooReport:
    """Outcome of the periodic-obstruction scan up to a period bound."""

    family_id: str
    fiber: str
    max_period_checked: int
    tol: float
    worst_defect: float
    worst_period: int
    worst_witness: object
    per_period: list = field(repr=False, default_factory=list)
    verdict: bool = False

    def summary(self) -> str:
        state = "pass" if self.verdict else "FAIL"
        return (f"poo[{self.family_id}] periods<={self.max_period_checked}: "
                f"worst defect {self.worst_defect:.3e} at period "
                f"{self.worst_period} -> {state} (tol {self.tol:.1e})")


def poo_check(S: SkewSystem, max_period: int, tol: float = 1e-4,
              G: int = G_DEFAULT) -> PooReport:
    """Scan every fixed point of f^n, n <= max_period, for identity defects.

    The defect of a circle product is its C0 distance to the identity; for
    linear fibers it is the spectral-norm distance of the matrix to I.
    """
    sys = S.base
    worst = -1.0
    worst_n = 0
    worst_p = None
    per_period = []
    for n in range(1, max_period + 1):
        local = 0.0
        pts = sys.periodic_points(n)
        for p in pts:
            prod = cocycle_product(S, p, n, G=G)
            if S.fiber == "circle":
                defect = identity_defect(prod)
            else:
                defect = float(np.linalg.norm(prod - np.eye(S.cocycle.dim), 2))
            if defect > local:
                local = defect
            if defect > worst:
                worst, worst_n, worst_p = defect, n, p
        per_period.append((n, len(pts), local))
    return PooReport(
        family_id=S.cocycle.family_id, fiber=S.fiber,
        max_period_checked=max_period, tol=tol,
        worst_defect=worst, worst_period=worst_n, worst_witness=worst_p,
        per_period=per_period, verdict=bool(worst <= tol),
    )


def make_coboundary(generator, alpha: float):
    """Coboundary cocycle from a generator field (circle or matrix)."""
    if isinstance(generator, DiffeoField):
        return CoboundaryCocycle(generator, alpha)
    if isinstance(generator, MatrixField):
        return LinearCoboundary(generator, alpha)
    raise TypeError(f"cannot build a coboundary from {type(generator).__name__}")


# ---------------------------------------------------------------------------
# Hoelder estimate
# ---------------------------------------------------------------------------

def holder_estimate(S: SkewSystem, n_pairs: int = 400, rng=None,
                    G: int = 256) -> dict:
    """Empirical Hoelder constant of x -> Phi(x) in the group metric.

    Samples base pairs across dyadic distance scales and returns the largest
    observed ratio d_G(Phi(x), Phi(y)) / d(x, y)^alpha.
    """
    from .circle import group_distance

    rng = np.random.default_rng(rng)
    sys = S.base
    alpha = S.cocycle.alpha
    ratios = []
    for _ in range(n_pairs):
        x, y = _sample_base_pair(sys, rng)
        dxy = sys.distance(x, y)
        if dxy <= 0.0:
            continue
        if S.fiber == "circle":
            gx = S.cocycle.snapshot(sys, x, G)
            gy = S.cocycle.snapshot(sys, y, G)
            num = group_distance(gx, gy)
        else:
            num = float(np.linalg.norm(
                S.cocycle.matrix(sys, x) - S.cocycle.matrix(sys, y), 2))
        ratios.append(num / dxy ** alpha)
    if not ratios:
        raise RuntimeError("no valid sample pairs were drawn")
    arr = np.array(ratios)
    return {"constant": float(arr.max()), "median": float(np.median(arr)),
            "alpha": alpha, "n_pairs": len(ratios)}


def _sample_base_pair(sys, rng):
    from ..base_dynamics.torus import CatMapSystem, TorusPoint
    from ..base_dynamics.shift import SftPoint, SftSystem

    if isinstance(sys, CatMapSystem):
        x = rng.random(2)
        r = 10.0 ** rng.uniform(-5, math.log10(sys.hyp.delta0))
        angle = rng.uniform(0.0, _TWO_PI)
        y = x + r * np.array([math.cos(angle), math.sin(angle)])
        return TorusPoint.from_array(x), TorusPoint.from_array(y)
    if isinstance(sys, SftSystem):
        L = 14
        word = _random_admissible(sys, 2 * L + 1, rng)
        x = _periodic_extension(sys, word, L)
        # Small radii dominate the ratio for locally constant data, so bias
        # toward them instead of sampling the window uniformly.
        m = int(rng.integers(1, 7 if rng.random() < 0.5 else L - 1))
        # Same window of radius m, refreshed tails: d(x, y) = theta^m exactly
        # when the refreshed tail differs at |i| = m + 1.
        y = _periodic_extension(sys, word[L - m: L + m + 1], m)
        return x, y
    raise TypeError(f"no pair sampler for base {type(sys).__name__}")


def _random_admissible(sys, length: int, rng) -> tuple:
    while True:
        word = [int(rng.integers(sys.n_symbols))]
        ok = True
        for _ in range(length - 1):
            follow = sys._followers[word[-1]]
            if not follow:
                ok = False
                break
            word.append(int(follow[rng.integers(len(follow))]))
        if ok:
            return tuple(word)


def _periodic_extension(sys, word: tuple, radius: int):
    from ..base_dynamics.shift import SftPoint, _rotate

    cyc_l = sys.cycle_through(word[0])
    cyc_r = sys.cycle_through(word[-1])
    right = _rotate(cyc_r, 1) if len(cyc_r) > 1 else cyc_r
    return SftPoint(cyc_l, word, right, radius)


# ---------------------------------------------------------------------------
# grid tabulation and CSV round-trip
# ---------------------------------------------------------------------------

def tabulate_cocycle(S: SkewSystem, grid, G: int = G_DEFAULT) -> GridTableCocycle:
    """Freeze a circle cocycle onto a grid: one snapshot per cell."""
    if S.fiber != "circle":
        raise TypeError("only circle cocycles can be tabulated")
    sys = S.base
    table = {}
    for code in np.asarray(grid.all_codes()).tolist():
        if hasattr(grid, "representative"):
            x = grid.representative(code)
        else:
            from ..base_dynamics.torus import TorusPoint
            x = TorusPoint.from_array(grid.center(code))
        table[int(code)] = S.cocycle.snapshot(sys, x, G)
    return GridTableCocycle(grid, table, S.cocycle.alpha)


def write_cocycle_table(path, cocycle: GridTableCocycle) -> None:
    """Plain-text table: commented header, then cell,fiber_index,lift,derivative."""
    with open(path, "w") as fh:
        fh.write(f"# grid_size={cocycle.G}\n")
        fh.write(f"# base_resolution={cocycle.grid.describe()}\n")
        fh.write(f"# family_id={cocycle.family_id}\n")
        fh.write(f"# alpha={cocycle.alpha!r}\n")
        fh.write("cell,fiber_index,lift,derivative\n")
        for code in sorted(cocycle.table):
            g = cocycle.table[code]
            for j in range(g.G):
                fh.write(f"{code},{j},{float(g.lift[j])!r},{float(g.deriv[j])!r}\n")


def read_cocycle_table(path, system) -> GridTableCocycle:
    """Inverse of write_cocycle_table; reconstructs the grid from its tag."""
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
                continue
            if line.startswith("cell,"):
                continue
            c, j, lift, deriv = line.split(",")
            rows.append((int(c), int(j), float(lift), float(deriv)))
    G = int(meta["grid_size"])
    res = meta["base_resolution"]
    if "x" in res:
        grid = system.make_grid(int(res.split("x")[0]))
    else:
        from ..base_dynamics.shift import SftGrid
        grid = SftGrid(system, int(res.removeprefix("depth")))
    cells = {}
    for c, j, lift, deriv in rows:
        cells.setdefault(c, (np.empty(G), np.empty(G)))
        cells[c][0][j] = lift
        cells[c][1][j] = deriv
    table = {c: CircleDiffeo(lv, dv) for c, (lv, dv) in cells.items()}
    return GridTableCocycle(grid, table, float(meta["alpha"]),
                            family_id=meta.get("family_id", "grid_table"))
