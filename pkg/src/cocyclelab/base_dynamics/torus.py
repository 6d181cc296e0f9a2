"""Hyperbolic toral automorphisms with exact lattice machinery.

The base map is x -> A x (mod 1) for an integer matrix A with |det A| = 1 and
|trace A| > 2.  Eigen-splitting constants are computed once at construction.
Periodic points are enumerated with exact integer arithmetic, and closing
constructions are solved in the eigenbasis rather than iterated, because a
float orbit of an unstable map loses a factor lambda_u per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hyperbolic import (ClosingError, ClosingResult, CoverageError,
                         DenseOrbitPlan, HyperbolicityData, TorusGrid,
                         closing_bounds_ok)

TORUS_TOL = 1e-9
ENUMERATION_CAP = 1_000_000


def wrap_unit(arr):
    """Reduce coordinates to [0, 1)."""
    out = np.asarray(arr, dtype=float) % 1.0
    # x % 1.0 can return 1.0 for tiny negative inputs; force it back so cell
    # indexing stays in range.
    return np.where(out >= 1.0, 0.0, out)


def wrap_half(arr):
    """Nearest-representative displacement, coordinates in [-1/2, 1/2)."""
    return (np.asarray(arr, dtype=float) + 0.5) % 1.0 - 0.5


@dataclass(frozen=True)
class TorusPoint:
    x1: float
    x2: float

    def __post_init__(self):
        if not (0.0 <= self.x1 < 1.0 and 0.0 <= self.x2 < 1.0):
            raise ValueError(f"coordinates must lie in [0,1): ({self.x1}, {self.x2})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2])

    @staticmethod
    def from_array(arr) -> "TorusPoint":
        a = wrap_unit(arr)
        return TorusPoint(float(a[0]), float(a[1]))


def _int_mat_power(m: list, n: int) -> list:
    """Exact power of a 2x2 integer matrix (Python ints, no overflow)."""
    if n < 0:
        raise ValueError("negative power not supported here")
    result = [[1, 0], [0, 1]]
    base = [row[:] for row in m]
    k = n
    while k:
        if k & 1:
            result = _int_mat_mul(result, base)
        base = _int_mat_mul(base, base)
        k >>= 1
    return result


def _int_mat_mul(a, b):
    return [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]


def _column_hnf(m):
    """Lower-triangular column Hermite form H of a 2x2 integer matrix.

    H = [[a, 0], [b, c]] with a, c > 0 and H Z^2 = M Z^2, so (i, j) with
    0 <= i < a, 0 <= j < c enumerate the |det M| cosets of Z^2 / M Z^2.
    """
    c1 = [m[0][0], m[1][0]]
    c2 = [m[0][1], m[1][1]]
    # Euclid on the first row across the two columns.
    while c2[0] != 0:
        if c1[0] == 0 or (c1[0] != 0 and abs(c2[0]) < abs(c1[0])):
            c1, c2 = c2, c1
        q = c2[0] // c1[0]
        c2 = [c2[0] - q * c1[0], c2[1] - q * c1[1]]
    if c1[0] < 0:
        c1 = [-c1[0], -c1[1]]
    if c2[1] < 0:
        c2 = [-c2[0], -c2[1]]
    # Reduce the lower-left entry modulo the lower-right one.
    if c2[1] != 0:
        c1[1] %= c2[1]
    return c1[0], c1[1], c2[1]   # a, b, c


class CatMapSystem:
    """Hyperbolic automorphism of the 2-torus."""

    kind = "cat_map"

    def __init__(self, matrix=((2, 1), (1, 1))):
        m = [[int(matrix[0][0]), int(matrix[0][1])],
             [int(matrix[1][0]), int(matrix[1][1])]]
        det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        if abs(det) != 1:
            raise ValueError(f"matrix must have determinant +-1, got {det}")
        tr = m[0][0] + m[1][1]
        if abs(tr) <= 2:
            raise ValueError(
                f"|trace| <= 2: matrix {m} is not hyperbolic on the torus")
        self.int_matrix = m
        self.det = det
        self.matrix = np.array(m, dtype=float)
        # Inverse is adj(M)/det = adj(M)*det since det^2 = 1.
        self.int_inverse = [[m[1][1] * det, -m[0][1] * det],
                            [-m[1][0] * det, m[0][0] * det]]
        self.inverse = np.array(self.int_inverse, dtype=float)

        disc = tr * tr - 4 * det
        root = math.sqrt(disc)
        lam_a = (tr + root) / 2.0
        lam_b = (tr - root) / 2.0
        if abs(lam_a) >= abs(lam_b):
            self.lam_u_signed, self.lam_s_signed = lam_a, lam_b
        else:
            self.lam_u_signed, self.lam_s_signed = lam_b, lam_a
        self.lambda_u = abs(self.lam_u_signed)
        self.lambda_s = abs(self.lam_s_signed)

        self.e_u = self._eigvec(self.lam_u_signed)
        self.e_s = self._eigvec(self.lam_s_signed)
        self.basis = np.column_stack([self.e_u, self.e_s])
        self.basis_inv = np.linalg.inv(self.basis)
        kappa = np.linalg.norm(self.basis, 2) * np.linalg.norm(self.basis_inv, 2)
        self.kappa = float(kappa)

        lam = math.log(self.lambda_u)
        c_closing = 2.0 * self.kappa / (1.0 - self.lambda_s)
        eps0 = 0.25
        delta0 = min(0.125, eps0 / self.kappa)
        self.hyp = HyperbolicityData(
            eps0=eps0,
            delta0=delta0,
            delta1=delta0 / (2.0 * c_closing),
            K0=1.0,
            lam=lam,
            nu_s=self.lambda_s,
            nu_u=self.lambda_u,
            c_closing=c_closing,
        )

    def _eigvec(self, lam: float) -> np.ndarray:
        m = self.int_matrix
        # (A - lam I) v = 0; pick the better-conditioned row formula.
        v1 = np.array([m[0][1], lam - m[0][0]])
        v2 = np.array([lam - m[1][1], m[1][0]])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        return v / np.linalg.norm(v)

    # -- stepping ---------------------------------------------------------

    def step(self, x: TorusPoint, k: int = 1) -> TorusPoint:
        return TorusPoint.from_array(self.step_array(x.as_array(), k))

    def step_array(self, positions, k: int = 1):
        if k == 0:
            return wrap_unit(positions)
        base = self.int_matrix if k > 0 else self.int_inverse
        power = _int_mat_power(base, abs(k))
        flat = max(abs(e) for row in power for e in row)
        if flat > 2 ** 52:
            raise ValueError(f"step power k={k} exceeds exact float range")
        return wrap_unit(np.asarray(positions) @ np.array(power, dtype=float).T)

    def orbit_array(self, x0, n: int, backward: bool = False) -> np.ndarray:
        """Positions of x0, f(x0), ..., f^n(x0) (or the inverse orbit)."""
        a, b = (self.int_inverse if backward else self.int_matrix)[0]
        c, d = (self.int_inverse if backward else self.int_matrix)[1]
        out = np.empty((n + 1, 2))
        x, y = float(x0[0]), float(x0[1])
        out[0, 0], out[0, 1] = x, y
        for i in range(1, n + 1):
            x, y = (a * x + b * y) % 1.0, (c * x + d * y) % 1.0
            out[i, 0], out[i, 1] = x, y
        return out

    # -- metric and bracket -----------------------------------------------

    def distance(self, x: TorusPoint, y: TorusPoint, alpha: float | None = None) -> float:
        d = float(np.linalg.norm(wrap_half(y.as_array() - x.as_array())))
        return d if alpha is None else d ** alpha

    def distance_array(self, xs, ys, alpha=None):
        d = np.linalg.norm(wrap_half(np.asarray(ys) - np.asarray(xs)), axis=-1)
        return d if alpha is None else d ** alpha

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0) / 2.0

    def bracket(self, x: TorusPoint, y: TorusPoint) -> TorusPoint:
        """Unique point of W^u_eps0(x) and W^s_eps0(y); needs d(x,y) <= delta0."""
        d = self.distance(x, y)
        if d > self.hyp.delta0:
            raise ValueError(
                f"bracket undefined: d(x,y)={d:.6g} exceeds delta0={self.hyp.delta0:.6g}")
        v = wrap_half(y.as_array() - x.as_array())
        vu, _ = self.basis_inv @ v
        return TorusPoint.from_array(x.as_array() + vu * self.e_u)

    # -- periodic points ----------------------------------------------------

    def periodic_count(self, n: int) -> int:
        """|det(A^n - I)|, exact."""
        p = _int_mat_power(self.int_matrix, n)
        p[0][0] -= 1
        p[1][1] -= 1
        return abs(p[0][0] * p[1][1] - p[0][1] * p[1][0])

    def periodic_points(self, n: int) -> list:
        """All fixed points of f^n, enumerated exactly.

        Solves (A^n - I) x in Z^2 by enumerating coset representatives of
        Z^2 / (A^n - I) Z^2 from the column Hermite form, so the result is a
        list of exact rationals rounded once to float.
        """
        if n < 1:
            raise ValueError("period must be >= 1")
        m = _int_mat_power(self.int_matrix, n)
        m[0][0] -= 1
        m[1][1] -= 1
        det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        count = abs(det)
        if count > ENUMERATION_CAP:
            raise ValueError(
                f"|Fix(f^{n})| = {count} exceeds enumeration cap {ENUMERATION_CAP}")
        adj = [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
        a, _, c = _column_hnf(m)
        sign = 1 if det > 0 else -1
        pts = []
        q = count
        for i in range(a):
            for j in range(c):
                y1 = adj[0][0] * i + adj[0][1] * j
                y2 = adj[1][0] * i + adj[1][1] * j
                n1 = (y1 * sign) % q
                n2 = (y2 * sign) % q
                pts.append(TorusPoint(n1 / q, n2 / q))
        pts.sort(key=lambda p: (p.x1, p.x2))
        if len(pts) != count:
            raise AssertionError("coset enumeration does not match |det|")
        return pts

    # -- closing ------------------------------------------------------------

    def anosov_closing(self, x: TorusPoint, n: int,
                       positions: np.ndarray | None = None) -> ClosingResult:
        """Periodic point p in Fix(f^n) shadowing the nearly returning segment.

        The correction is solved in the eigenbasis and the per-iterate
        distance trace is evaluated from the same decomposition, which keeps
        every entry accurate independent of n.
        """
        if n < 1:
            raise ValueError("period must be >= 1")
        if positions is None:
            positions = self.orbit_array(x.as_array(), n)
        v = wrap_half(positions[n] - positions[0])
        d0 = float(np.linalg.norm(v))
        if d0 >= self.hyp.delta1:
            raise ClosingError(
                f"d(x, f^n x) = {d0:.6g} is not below delta1 = {self.hyp.delta1:.6g}")
        vu, vs = self.basis_inv @ v
        wu = -vu / (self.lam_u_signed ** n - 1.0)
        ws = -vs / (self.lam_s_signed ** n - 1.0)
        w = self.basis @ np.array([wu, ws])
        p = TorusPoint.from_array(positions[0] + w)
        y = TorusPoint.from_array(positions[0] + wu * self.e_u)

        idx = np.arange(n + 1)
        pu = wu * self.lam_u_signed ** idx
        ps = ws * self.lam_s_signed ** idx
        # Rows: d(f^i x, f^i p), d(f^i p, f^i y), d(f^i x, f^i y).
        trace = np.column_stack([
            np.linalg.norm((self.basis @ np.vstack([pu, ps])).T, axis=1),
            np.abs(ps),
            np.abs(pu),
        ])
        ok = closing_bounds_ok(trace, n, d0, self.hyp.c_closing, self.hyp.lam)
        orbit = [TorusPoint.from_array(
            positions[i] + self.basis @ np.array([pu[i], ps[i]]))
            for i in range(n)]
        return ClosingResult(
            period=n, start=x, periodic_point=p, bracket_point=y,
            return_distance=d0, bound_trace=trace,
            c_used=self.hyp.c_closing, lam_used=self.hyp.lam,
            bounds_ok=ok, periodic_orbit=orbit,
        )

    # -- transitive plans ---------------------------------------------------

    DEFAULT_SEED = (math.sqrt(2.0) - 1.0, math.sqrt(3.0) - 1.0)

    def make_grid(self, cells_per_side: int) -> TorusGrid:
        return TorusGrid(cells_per_side)

    def grid_for_resolution(self, resolution: float) -> TorusGrid:
        if resolution >= self.diameter:
            return TorusGrid(1)
        return TorusGrid(max(1, round(1.0 / resolution)))

    def transitive_plan(self, grid: TorusGrid, two_sided: bool = False,
                        seed_point=None, n_max: int = 600_000) -> DenseOrbitPlan:
        """First-visit plan for a seed whose orbit covers every grid cell.

        Coverage is empirical: iteration stops at full coverage and raises
        if the cap is hit first.
        """
        x0 = np.array(seed_point if seed_point is not None else self.DEFAULT_SEED,
                      dtype=float)
        x0 = wrap_unit(x0)
        target = grid.n_cells
        block = max(4 * target, 4096)
        fwd = [x0[None, :]]
        bwd = []
        seen: set = set()
        n_done = 0
        while True:
            last = fwd[-1][-1]
            chunk = self.orbit_array(last, min(block, n_max - n_done))[1:]
            fwd.append(chunk)
            if two_sided:
                last_b = bwd[-1][-1] if bwd else x0
                bchunk = self.orbit_array(last_b, len(chunk), backward=True)[1:]
                bwd.append(bchunk)
            n_done += len(chunk)
            seen.update(np.unique(grid.code_of_array(np.concatenate(fwd))).tolist())
            if two_sided and bwd:
                seen.update(np.unique(grid.code_of_array(np.concatenate(bwd))).tolist())
            if len(seen) >= target or n_done >= n_max:
                break
        if len(seen) < target:
            raise CoverageError(
                f"seed covered {len(seen)}/{target} cells after {n_done} iterates")
        fwd_arr = np.concatenate(fwd)
        n_forward = len(fwd_arr) - 1
        if two_sided:
            bwd_arr = np.concatenate(bwd)
            positions = np.concatenate([bwd_arr[::-1], fwd_arr])
            n_backward = len(bwd_arr)
        else:
            positions = fwd_arr
            n_backward = 0
        codes = grid.code_of_array(positions)
        plan = DenseOrbitPlan(
            start=TorusPoint.from_array(x0), grid=grid, codes=codes,
            n_forward=n_forward, n_backward=n_backward,
            point_fn=lambda k: TorusPoint.from_array(positions[k + n_backward]),
            coverage_target=target,
            seed_desc=f"seed=({x0[0]:.12f},{x0[1]:.12f})",
        )
        plan.positions = positions
        return plan
