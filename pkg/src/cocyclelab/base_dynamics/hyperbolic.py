"""Shared hyperbolicity data, closing results, grids, and dense-orbit plans.

Both concrete base systems (toral automorphism, subshift of finite type)
carry constant contraction/expansion rates, so the rate envelopes are stored
as plain floats here.  With constant rates the exponential envelopes hold
with K0 = 1 and equality, hence every check below is non-strict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class ClosingError(ValueError):
    """Closing precondition violated: the orbit segment does not nearly return."""


class CoverageError(RuntimeError):
    """A transitive seed failed to visit every cell within the iteration cap."""


@dataclass(frozen=True)
class HyperbolicityData:
    """Frozen constants of a hyperbolic base system.

    ``delta1`` is the closing-input radius, tied to the bracket radius by
    delta1 = delta0 / (2 c) so that the constructed periodic point stays
    inside the product chart.
    """

    eps0: float
    delta0: float
    delta1: float
    K0: float
    lam: float          # exponential rate, e.g. log(lambda_u)
    nu_s: float         # per-step contraction rate on local stable sets
    nu_u: float         # per-step expansion rate on local unstable sets
    c_closing: float    # a-priori closing constant

    def rescaled(self, alpha: float) -> "HyperbolicityData":
        """Constants for the snap metric d_alpha = d**alpha."""
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
        return HyperbolicityData(
            eps0=self.eps0 ** alpha,
            delta0=self.delta0 ** alpha,
            delta1=self.delta1 ** alpha,
            K0=self.K0,
            lam=self.lam * alpha,
            nu_s=self.nu_s ** alpha,
            nu_u=self.nu_u ** alpha,
            c_closing=self.c_closing ** alpha,
        )

    def envelopes_hold(self, n_max: int = 60) -> bool:
        """Check nu_s^n <= K0 e^(-lam n) and nu_u^n >= K0 e^(lam n), non-strict."""
        for n in range(1, n_max + 1):
            if self.nu_s ** n > self.K0 * math.exp(-self.lam * n) * (1 + 1e-12):
                return False
            if self.nu_u ** n < self.K0 * math.exp(self.lam * n) * (1 - 1e-12):
                return False
        return True


@dataclass
class ClosingResult:
    """Periodic point and bracket point produced by the closing construction.

    ``bound_trace`` has one row per iterate i = 0..n with the three distances
    (d(f^i x, f^i p), d(f^i p, f^i y), d(f^i x, f^i y)); ``bounds_ok`` records
    whether every row sits under the exponential envelope with the base's
    a-priori pair (c, lam).
    """

    period: int
    start: object
    periodic_point: object
    bracket_point: object
    return_distance: float
    bound_trace: np.ndarray
    c_used: float
    lam_used: float
    bounds_ok: bool
    periodic_orbit: list = field(default_factory=list, repr=False)


def closing_bounds_ok(trace: np.ndarray, n: int, d0: float, c: float, lam: float,
                      slack: float = 1e-9) -> bool:
    idx = np.arange(n + 1)
    env_min = c * d0 * np.exp(-lam * np.minimum(idx, n - idx)) + slack
    env_fwd = c * d0 * np.exp(-lam * idx) + slack
    env_bwd = c * d0 * np.exp(-lam * (n - idx)) + slack
    return bool(
        np.all(trace[:, 0] <= env_min)
        and np.all(trace[:, 1] <= env_fwd)
        and np.all(trace[:, 2] <= env_bwd)
    )


class TorusGrid:
    """Uniform cells_per_side x cells_per_side partition of the 2-torus."""

    def __init__(self, cells_per_side: int):
        if cells_per_side < 1:
            raise ValueError("cells_per_side must be >= 1")
        self.cells_per_side = int(cells_per_side)
        self.n_cells = self.cells_per_side ** 2

    def code_of_array(self, positions) -> np.ndarray:
        c = self.cells_per_side
        ij = np.minimum((np.asarray(positions) * c).astype(np.int64), c - 1)
        ij = np.maximum(ij, 0)
        if ij.ndim == 1:
            return ij[0] * c + ij[1]
        return ij[..., 0] * c + ij[..., 1]

    def center(self, code: int) -> np.ndarray:
        c = self.cells_per_side
        i, j = divmod(int(code), c)
        return np.array([(i + 0.5) / c, (j + 0.5) / c])

    def all_codes(self) -> np.ndarray:
        return np.arange(self.n_cells)

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0) / self.cells_per_side

    def describe(self) -> str:
        return f"{self.cells_per_side}x{self.cells_per_side}"


class DenseOrbitPlan:
    """Orbit segment of a transitive point with a first-visit cell map.

    ``cell_index`` maps each visited cell code to the signed iterate of its
    first visit, where visit order is by |k| with forward iterates first on
    ties.  Forward-only plans have n_backward = 0.
    """

    def __init__(self, start, grid, codes: np.ndarray, n_forward: int,
                 n_backward: int, point_fn, coverage_target: int,
                 seed_desc: str = ""):
        self.start = start
        self.grid = grid
        self.n_forward = int(n_forward)
        self.n_backward = int(n_backward)
        self._codes = codes              # indexed by k + n_backward
        self._point_fn = point_fn
        self.seed_desc = seed_desc

        ks = _visit_order(self.n_forward, self.n_backward)
        ordered = codes[ks + self.n_backward]
        uniq, first = np.unique(ordered, return_index=True)
        self.cell_index = {int(cc): int(ks[fi]) for cc, fi in zip(uniq, first)}
        self.coverage_target = int(coverage_target)
        self.coverage = len(self.cell_index) / max(coverage_target, 1)

    @property
    def N(self) -> int:
        return self.n_forward + self.n_backward

    def point(self, k: int):
        return self._point_fn(k)

    def code_at(self, k: int) -> int:
        return int(self._codes[k + self.n_backward])

    def iterates(self):
        yield from _visit_order(self.n_forward, self.n_backward)

    @property
    def two_sided(self) -> bool:
        return self.n_backward > 0


def _visit_order(n_forward: int, n_backward: int) -> np.ndarray:
    ks = np.arange(-n_backward, n_forward + 1)
    order = np.lexsort((ks < 0, np.abs(ks)))
    return ks[order]
