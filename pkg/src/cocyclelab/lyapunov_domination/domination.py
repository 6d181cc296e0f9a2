"""Fiber-vs-base domination: how many steps until the base rates win.

The test looks for the smallest block length l such that every observed
fiber derivative product over l steps is beaten by the snapped base rates
with a safety factor:

    sup D Phi^(l) <= nu_u^(beta l) / factor      (unstable side)
    inf D Phi^(l) >= factor * nu_s^(beta l)      (stable side)

Suprema are taken over the grid cells of the base (one representative per
cell, full fiber grid) together with all periodic orbits up to a period
bound.  Everything here is empirical on those samples; a pass is evidence,
not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..base_dynamics import periodic_orbit_representatives
from ..base_dynamics.torus import CatMapSystem, TorusPoint
from ..cocycle_core import OrbitData


@dataclass
class DominationReport:
    beta: float
    factor: float
    ell_max: int
    ell_u: int | None
    ell_s: int | None
    sup_log: np.ndarray     # sup log D Phi^(l), index l-1
    inf_log: np.ndarray
    n_samples: int
    satisfied: bool

    def summary(self) -> str:
        u = self.ell_u if self.ell_u is not None else f">{self.ell_max}"
        s = self.ell_s if self.ell_s is not None else f">{self.ell_max}"
        state = "dominated" if self.satisfied else "NOT dominated"
        return (f"{state} at beta={self.beta:g}: ell_u={u}, ell_s={s} "
                f"(factor {self.factor:g}, {self.n_samples} base samples)")


def _chain_extremes_torus(S, positions: np.ndarray, ell_max: int, G: int):
    """Per-length extreme log-products over stacked (n_samples, ell_max+1) orbits."""
    n_samples = positions.shape[0]
    data = OrbitData(S.base, positions=positions.reshape(-1, 2))
    ev = S.cocycle.evaluator(S.base, data)
    offsets = np.arange(n_samples) * (ell_max + 1)
    y = np.broadcast_to(np.arange(G) / G, (n_samples, G)).copy()
    logd = np.zeros((n_samples, G))
    sup = np.empty(ell_max)
    inf = np.empty(ell_max)
    for t in range(ell_max):
        idx = (offsets + t)[:, None]
        y, d = ev.lift_and_deriv_at(idx, y)
        y = y - np.floor(y)
        logd = logd + np.log(d)
        sup[t] = float(logd.max())
        inf[t] = float(logd.min())
    return sup, inf


def _chain_extremes_pointwise(S, points, ell_max: int, G: int):
    sup = np.full(ell_max, -np.inf)
    inf = np.full(ell_max, np.inf)
    grid = np.arange(G) / G
    for x in points:
        data = OrbitData.from_orbit(S.base, x, ell_max)
        ev = S.cocycle.evaluator(S.base, data)
        y = grid.copy()
        logd = np.zeros(G)
        for t in range(ell_max):
            y, d = ev.lift_and_deriv_at(t, y)
            y = y - np.floor(y)
            logd = logd + np.log(d)
            sup[t] = max(sup[t], float(logd.max()))
            inf[t] = min(inf[t], float(logd.min()))
    return sup, inf


def _linear_extremes(S, points, ell_max: int):
    sup = np.full(ell_max, -np.inf)
    inf = np.full(ell_max, np.inf)
    for x in points:
        data = OrbitData.from_orbit(S.base, x, ell_max)
        ev = S.cocycle.evaluator(S.base, data)
        prod = np.eye(S.cocycle.dim)
        for t in range(ell_max):
            prod = ev.mat_at(t) @ prod
            svals = np.linalg.svd(prod, compute_uv=False)
            sup[t] = max(sup[t], float(np.log(svals[0])))
            inf[t] = min(inf[t], float(np.log(svals[-1])))
    return sup, inf


def domination_test(S, grid=None, beta: float | None = None,
                    ell_max: int = 20, factor: float = 2.0, G: int = 128,
                    max_period: int = 4) -> DominationReport:
    """Smallest block lengths at which the snapped base rates dominate."""
    sys = S.base
    beta = S.cocycle.alpha if beta is None else float(beta)
    if grid is None:
        grid = sys.make_grid(32) if isinstance(sys, CatMapSystem) else None
    if grid is None:
        from ..base_dynamics.shift import SftGrid
        grid = SftGrid(sys, 3)

    periodic_pts = [p for p, _ in periodic_orbit_representatives(sys, max_period)]
    if S.fiber == "linear":
        cell_pts = [_cell_point(sys, grid, c) for c in np.asarray(grid.all_codes())]
        sup, inf = _linear_extremes(S, cell_pts + periodic_pts, ell_max)
        n_samples = len(cell_pts) + len(periodic_pts)
    elif isinstance(sys, CatMapSystem):
        codes = np.asarray(grid.all_codes())
        centers = np.stack([grid.center(int(c)) for c in codes])
        blocks = [sys.orbit_array(c, ell_max) for c in centers]
        blocks += [sys.orbit_array(p.as_array(), ell_max) for p in periodic_pts]
        positions = np.stack(blocks)
        sup, inf = _chain_extremes_torus(S, positions, ell_max, G)
        n_samples = len(blocks)
    else:
        cell_pts = [grid.representative(int(c)) for c in grid.all_codes()]
        pts = cell_pts + periodic_pts
        sup, inf = _chain_extremes_pointwise(S, pts, ell_max, G)
        n_samples = len(pts)

    hyp = sys.hyp
    ells = np.arange(1, ell_max + 1)
    log_fac = np.log(factor)
    u_ok = sup <= beta * ells * np.log(hyp.nu_u) - log_fac
    s_ok = inf >= beta * ells * np.log(hyp.nu_s) + log_fac
    ell_u = int(ells[u_ok][0]) if u_ok.any() else None
    ell_s = int(ells[s_ok][0]) if s_ok.any() else None
    return DominationReport(
        beta=beta, factor=factor, ell_max=ell_max, ell_u=ell_u, ell_s=ell_s,
        sup_log=sup, inf_log=inf, n_samples=n_samples,
        satisfied=ell_u is not None and ell_s is not None,
    )


def _cell_point(sys, grid, code):
    if isinstance(sys, CatMapSystem):
        return TorusPoint.from_array(grid.center(int(code)))
    return grid.representative(int(code))
