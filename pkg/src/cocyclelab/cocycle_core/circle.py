"""Sampled circle diffeomorphisms: the fiber group for 1-dimensional fibers.

A group element is a strictly increasing degree-one lift tabulated on a
uniform grid of G points together with positive derivative samples.
Derivatives are carried through every operation by the chain rule; they are
never recovered by differencing the lift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

G_DEFAULT = 1024
MIN_SLOPE = 1e-6


def monotone_repair(lift: np.ndarray, min_slope: float = MIN_SLOPE) -> np.ndarray:
    """Force a strictly increasing lift with room for the degree-one wrap."""
    g = len(lift)
    step = min_slope / g
    ramp = np.arange(g) * step
    out = np.maximum.accumulate(lift - ramp) + ramp
    ceiling = lift[0] + 1.0 - step * (g - np.arange(g))
    return np.minimum(out, ceiling)


@dataclass
class CircleDiffeo:
    """Degree-one circle diffeomorphism sampled on a uniform grid."""

    lift: np.ndarray
    deriv: np.ndarray

    def __post_init__(self):
        self.lift = np.asarray(self.lift, dtype=float)
        self.deriv = np.asarray(self.deriv, dtype=float)
        if self.lift.shape != self.deriv.shape or self.lift.ndim != 1:
            raise ValueError("lift and derivative samples must be equal-length vectors")
        if len(self.lift) & (len(self.lift) - 1):
            raise ValueError("grid size must be a power of two")
        if np.any(self.deriv <= 0):
            raise ValueError("derivative samples must be positive")
        ext = np.append(self.lift, self.lift[0] + 1.0)
        if np.any(np.diff(ext) <= 0):
            raise ValueError("lift samples must be strictly increasing (degree one)")

    @property
    def G(self) -> int:
        return len(self.lift)

    # -- evaluation ---------------------------------------------------------

    def eval_lift(self, y):
        """Lift value at arbitrary reals, using equivariance l(y+1) = l(y)+1."""
        y = np.asarray(y, dtype=float)
        n = np.floor(y)
        frac = y - n
        grid = np.arange(self.G + 1) / self.G
        ext = np.append(self.lift, self.lift[0] + 1.0)
        return np.interp(frac, grid, ext) + n

    def eval_circle(self, y):
        return np.asarray(self.eval_lift(y)) % 1.0

    def eval_deriv(self, y):
        y = np.asarray(y, dtype=float)
        frac = y - np.floor(y)
        grid = np.arange(self.G + 1) / self.G
        ext = np.append(self.deriv, self.deriv[0])
        return np.interp(frac, grid, ext)

    def inverse_lift(self, z):
        """Solve lift(y) = z by monotone piecewise-linear inversion."""
        z = np.asarray(z, dtype=float)
        m = np.floor(z - self.lift[0])
        z0 = z - m
        grid = np.arange(self.G + 1) / self.G
        ext = np.append(self.lift, self.lift[0] + 1.0)
        return np.interp(z0, ext, grid) + m

    # -- normal form ---------------------------------------------------------

    def normalized(self) -> "CircleDiffeo":
        """Translate the lift by an integer so lift[0] lands in [0, 1)."""
        shift = np.floor(self.lift[0])
        if shift == 0.0:
            return self
        return CircleDiffeo(self.lift - shift, self.deriv)


def identity(G: int = G_DEFAULT) -> CircleDiffeo:
    grid = np.arange(G) / G
    return CircleDiffeo(grid.copy(), np.ones(G))


def rotation(tau: float, G: int = G_DEFAULT) -> CircleDiffeo:
    grid = np.arange(G) / G
    return CircleDiffeo(grid + tau, np.ones(G))


def arnold_bump(a: float, G: int = G_DEFAULT, phase: float = 0.0) -> CircleDiffeo:
    """g(y) = y + (a / 2 pi) sin(2 pi (y - phase)); a diffeo for |a| < 1.

    Fixed points at y = phase (multiplier 1 + a) and y = phase + 1/2
    (multiplier 1 - a).
    """
    if abs(a) >= 1.0:
        raise ValueError(f"bump amplitude must satisfy |a| < 1, got {a}")
    grid = np.arange(G) / G
    two_pi = 2.0 * np.pi
    lift = grid + (a / two_pi) * np.sin(two_pi * (grid - phase))
    deriv = 1.0 + a * np.cos(two_pi * (grid - phase))
    return CircleDiffeo(lift, deriv)


def from_callable(fn, dfn, G: int = G_DEFAULT) -> CircleDiffeo:
    grid = np.arange(G) / G
    return CircleDiffeo(np.asarray(fn(grid), dtype=float),
                        np.asarray(dfn(grid), dtype=float))


def diffeo_compose(g: CircleDiffeo, h: CircleDiffeo) -> CircleDiffeo:
    """g after h, resampled on h's grid with monotone repair."""
    lift = g.eval_lift(h.lift)
    deriv = g.eval_deriv(h.lift) * h.deriv
    return CircleDiffeo(monotone_repair(lift), deriv)


def diffeo_invert(g: CircleDiffeo) -> CircleDiffeo:
    grid = np.arange(g.G) / g.G
    inv_lift = g.inverse_lift(grid)
    deriv = 1.0 / g.eval_deriv(inv_lift)
    return CircleDiffeo(monotone_repair(inv_lift), deriv)


def diffeo_eval(g: CircleDiffeo, y):
    """Value on the circle (mod 1)."""
    return g.eval_circle(y)


def diffeo_power(g: CircleDiffeo, n: int) -> CircleDiffeo:
    if n == 0:
        return identity(g.G)
    base = g if n > 0 else diffeo_invert(g)
    out = base
    for _ in range(abs(n) - 1):
        out = diffeo_compose(base, out)
    return out


# -- distances ---------------------------------------------------------------

def c0_distance(g: CircleDiffeo, h: CircleDiffeo) -> float:
    """sup over samples of the circle distance between values."""
    dl = g.lift - h.lift
    return float(np.max(np.abs(dl - np.round(dl))))


def c1_distance(g: CircleDiffeo, h: CircleDiffeo) -> float:
    return float(np.max(np.abs(g.deriv - h.deriv)))


def group_distance(g: CircleDiffeo, h: CircleDiffeo) -> float:
    """C1 metric on the group: sup circle distance + sup derivative gap."""
    return c0_distance(g, h) + c1_distance(g, h)


def identity_defect(g: CircleDiffeo) -> float:
    """C0 distance to the identity."""
    dl = g.lift - np.arange(g.G) / g.G
    return float(np.max(np.abs(dl - np.round(dl))))
