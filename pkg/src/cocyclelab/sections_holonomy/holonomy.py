"""Holonomy maps, the trivializing conjugacy, and derivative cocycles.

A family of orbit-closure sections anchored at the fiber over x0 turns
into a chart at every base cell: the piecewise-linear map sending anchor
coordinates to section values.  Holonomy from x to y is chart-at-y after
inverse-chart-at-x, the trivializing conjugacy H is inverse-chart alone,
and differentiating the parent cocycle along one section produces the
1x1 linear cocycle whose transfer function certifies zero exponents.
"""

import json

import numpy as np
from dataclasses import dataclass, field

from ..cocycle_core import (CircleDiffeo, OrbitData, SkewSystem, c0_distance,
                            c1_distance, from_callable, monotone_repair,
                            poo_check)
from ..livsic_solver import solve_linear
from .sections import _build_sections, _cell_of, _circ_arr


class AtlasTooSparse(RuntimeError):
    """Anchor sections leave a fiber gap wider than one anchor spacing.

    Rebuild the atlas with n_anchors doubled; the harness does this
    automatically up to 128 anchors.
    """


class _AnchorChart:
    """The PL fiber chart of one cell: anchor coordinate -> section value.

    Nodes sit at the uniform anchor grid a_i = i/K; the chart through the
    anchor cell itself is the identity.  Charts refuse to exist when the
    section family crosses itself or spreads wider than one anchor gap.
    """

    __slots__ = ("K", "v0", "gaps", "_vrel")

    def __init__(self, vals, code=None):
        vals = np.asarray(vals, dtype=float) % 1.0
        K = vals.size
        gaps = (np.roll(vals, -1) - vals) % 1.0
        where = f" at cell {code}" if code is not None else ""
        if gaps.min() < 1e-12:
            raise AtlasTooSparse(
                f"two anchor sections collide{where}; the fiber is not "
                "resolved there")
        if abs(gaps.sum() - 1.0) > 1e-8:
            raise RuntimeError(
                f"anchor sections cross{where}: the section loop winds "
                f"{gaps.sum():.6f} times instead of once")
        if gaps.max() > 2.0 / K:
            raise AtlasTooSparse(
                f"anchor spacing {gaps.max():.4f}{where} exceeds 2/K = "
                f"{2.0 / K:.4f}; rebuild with more anchors")
        self.K = K
        self.v0 = float(vals[0])
        self.gaps = gaps
        vrel = np.concatenate(([0.0], np.cumsum(gaps)))
        vrel[-1] = 1.0
        self._vrel = vrel

    def seg(self, a):
        return np.floor(np.asarray(a, dtype=float) * self.K).astype(np.int64) % self.K

    def lift(self, a):
        a = np.asarray(a, dtype=float)
        t = a * self.K
        j = np.floor(t)
        jm = j.astype(np.int64) % self.K
        return self.v0 + self._vrel[jm] + (t - j) * self.gaps[jm] + (j - jm) / self.K

    def inv_with_seg(self, v):
        v = np.asarray(v, dtype=float)
        t = v - self.v0
        u = t % 1.0
        j = np.clip(np.searchsorted(self._vrel, u, side="right") - 1, 0, self.K - 1)
        a = (j + (u - self._vrel[j]) / self.gaps[j]) / self.K + (t - u)
        return a, j

    def inv(self, v):
        return self.inv_with_seg(v)[0]

    def deriv(self, a):
        return self.K * self.gaps[self.seg(a)]

    def to_diffeo(self, G: int = 256) -> CircleDiffeo:
        return from_callable(self.lift, self.deriv, G)

    def inv_diffeo(self, G: int = 256) -> CircleDiffeo:
        def dfn(v):
            return 1.0 / (self.K * self.gaps[self.inv_with_seg(v)[1]])
        return from_callable(self.inv, dfn, G)


class SectionAtlas:
    """Orbit-closure sections through every anchor of the fiber over x0."""

    def __init__(self, skew, plan, anchors, sections):
        self.skew = skew
        self.plan = plan
        self.anchors = np.asarray(anchors, dtype=float)
        self.sections = tuple(sections)
        self.interpolated = sections[0].interpolated
        self._vals = {c: np.array([s.grid_values[c] for s in sections])
                      for c in sections[0].grid_values}
        self._charts = {}

    @property
    def n_anchors(self) -> int:
        return self.anchors.size

    @property
    def anchor_base(self):
        return self.plan.point(0)

    def values(self, code):
        return self._vals[int(code)]

    def chart(self, code) -> _AnchorChart:
        c = int(code)
        ch = self._charts.get(c)
        if ch is None:
            ch = _AnchorChart(self._vals[c], code=c)
            self._charts[c] = ch
        return ch

    def chart_at(self, x) -> _AnchorChart:
        return self.chart(_cell_of(self.plan.grid, x))


def build_atlas(S, plan, n_anchors: int = 32, **kwargs) -> SectionAtlas:
    """K sections through the anchors i/K over the plan's start point.

    One fiber sweep builds all K sections at once; the near-return scan
    runs on the whole family, so a return-claim violation aborts the
    atlas exactly as it aborts a single section.
    """
    anchors = np.arange(n_anchors) / n_anchors
    sections = _build_sections(S, plan, anchors, **kwargs)
    return SectionAtlas(S, plan, anchors, sections)


@dataclass(frozen=True)
class HolonomyMap:
    from_x: object
    to_y: object
    map: CircleDiffeo
    derivative_bound: float


def holonomy(S, x, y, atlas: SectionAtlas, G: int = 256) -> HolonomyMap:
    """Transport along the section family: fiber over x to fiber over y.

    A fiber point over x determines the unique anchor section through it;
    the holonomy sends it to that section's value over y.
    """
    chx = atlas.chart_at(x)
    chy = atlas.chart_at(y)

    def fn(v):
        return chy.lift(chx.inv(v))

    def dfn(v):
        j = chx.inv_with_seg(v)[1]
        return chy.gaps[j] / chx.gaps[j]

    bound = float((chy.gaps / chx.gaps).max())
    return HolonomyMap(from_x=x, to_y=y, map=from_callable(fn, dfn, G),
                       derivative_bound=bound)


@dataclass(frozen=True)
class Trivialization:
    """The fiber part of the conjugacy H onto the product system.

    H_values[cell] is the holonomy to the anchor fiber, i.e. the inverse
    chart; conjugacy_residual is the sup over sampled states of how far
    H fails to intertwine F with f x id.
    """

    anchor_base: object
    n_anchors: int
    H_values: dict
    conjugacy_residual: float
    details: dict = field(repr=False)

    def fiber_map(self, code) -> CircleDiffeo:
        return self.H_values[int(code)]

    def to_json(self) -> str:
        doc = {"kind": "trivialization",
               "conjugacy_residual": self.conjugacy_residual,
               "n_anchors": self.n_anchors}
        doc.update(self.details)
        return json.dumps(doc, indent=2, sort_keys=True)


def trivialize(S, atlas: SectionAtlas, G: int = 256,
               fiber_samples: int = 8) -> Trivialization:
    """Assemble H from inverse charts and audit the conjugacy relation.

    The residual compares H(F(state)) with (f x id)(H(state)) at every
    visited cell's first-visit point and a fixed comb of fiber values.
    """
    plan = atlas.plan
    codes_by_row = plan._codes
    nb = plan.n_backward
    ev = S.cocycle.evaluator(S.base, OrbitData.from_plan(S.base, plan))
    ws = (np.arange(fiber_samples) + 0.5) / fiber_samples

    gaps = []
    for c, k in plan.cell_index.items():
        r = nb + k
        if r >= plan.N:
            continue
        c_next = int(codes_by_row[r + 1])
        if c in atlas.interpolated or c_next in atlas.interpolated:
            continue
        phi_w = np.asarray(ev.lift_at(r, ws), dtype=float) % 1.0
        a_next = atlas.chart(c_next).inv(phi_w) % 1.0
        a_here = atlas.chart(c).inv(ws) % 1.0
        gaps.append(_circ_arr(a_next, a_here).max())
    gaps = np.array(gaps)

    H_values = {c: atlas.chart(c).inv_diffeo(G) for c in atlas._vals}
    grid = plan.grid
    details = {
        "base_resolution": grid.describe() if hasattr(grid, "describe") else "",
        "family_id": S.cocycle.family_id,
        "cells_checked": int(gaps.size),
        "fiber_samples": int(fiber_samples),
        "residual_median": float(np.median(gaps)),
        "residual_p99": float(np.quantile(gaps, 0.99)),
        "plan_N": plan.N,
    }
    return Trivialization(anchor_base=atlas.anchor_base,
                          n_anchors=atlas.n_anchors, H_values=H_values,
                          conjugacy_residual=float(gaps.max()),
                          details=details)


def conjugated_exponent(S, atlas: SectionAtlas, n_steps: int = 4000,
                        w0: float = 0.37) -> float:
    """Fiber exponent of H o F o H^(-1) along the plan's forward orbit.

    The log-derivatives telescope through the charts, so this decays like
    1/n for a true trivialization; it is the numerical face of the
    zero-exponent property of the conjugated system.
    """
    plan = atlas.plan
    nb = plan.n_backward
    n = min(int(n_steps), plan.n_forward)
    ev = S.cocycle.evaluator(S.base, OrbitData.from_plan(S.base, plan))
    codes = plan._codes
    w = float(w0)
    total = 0.0
    for r in range(nb, nb + n):
        ch0 = atlas.chart(int(codes[r]))
        ch1 = atlas.chart(int(codes[r + 1]))
        j0 = ch0.inv_with_seg(w)[1]
        w_next, d = ev.lift_and_deriv_at(r, w)
        w_next = float(w_next) % 1.0
        j1 = ch1.inv_with_seg(w_next)[1]
        total += np.log(float(d)) + np.log(ch0.K * ch0.gaps[j0]) \
            - np.log(ch1.K * ch1.gaps[j1])
        w = w_next
    return float(total / n)


@dataclass(frozen=True)
class SmoothnessReport:
    deviation_C0: float
    deviation_C1: float
    n_anchors: int
    orbit_steps: int
    from_cell: int
    to_cell: int

    def summary(self) -> str:
        return (f"holonomy vs {self.orbit_steps}-step orbit product: "
                f"C0 {self.deviation_C0:.3e}, C1 {self.deviation_C1:.3e} "
                f"({self.n_anchors} anchors)")


def _orbit_product(S, plan, k_from: int, k_to: int, G: int) -> CircleDiffeo:
    # plan-row chaining reaches separations far beyond what a single
    # exact-integer base step can express
    ev = S.cocycle.evaluator(S.base, OrbitData.from_plan(S.base, plan))
    nb = plan.n_backward
    y = np.arange(G) / G
    d = np.ones(G)
    if k_to >= k_from:
        for r in range(nb + k_from, nb + k_to):
            y, di = ev.lift_and_deriv_at(r, y)
            d = d * di
    else:
        for r in range(nb + k_from - 1, nb + k_to - 1, -1):
            y = ev.inv_at(r, y)
            d = d / ev.deriv_at(r, y)
    return CircleDiffeo(monotone_repair(np.asarray(y, dtype=float)),
                        np.asarray(d, dtype=float))


def holonomy_smoothness_check(S, x, y, atlas: SectionAtlas,
                              G: int = 256) -> SmoothnessReport:
    """Check the holonomy's derivative against a same-orbit product.

    The reference is the cocycle product between the first visits of the
    two cells, which the holonomy approaches as the anchor family
    refines; the derivative gap shrinking under refinement is the
    numerical C1 statement.
    """
    plan = atlas.plan
    trace = atlas.sections[0].visit_trace
    cx = _cell_of(plan.grid, x)
    cy = _cell_of(plan.grid, y)
    if cx not in trace or cy not in trace:
        raise ValueError("both endpoints must lie in cells the plan visited")
    kx, ky = trace[cx], trace[cy]
    x_rep, y_rep = plan.point(kx), plan.point(ky)
    h = holonomy(S, x_rep, y_rep, atlas, G=G)
    ref = _orbit_product(S, plan, kx, ky, G)
    return SmoothnessReport(
        deviation_C0=c0_distance(h.map, ref),
        deviation_C1=c1_distance(h.map, ref),
        n_anchors=atlas.n_anchors, orbit_steps=ky - kx,
        from_cell=cx, to_cell=cy)


class _MatsEval:
    def __init__(self, mats):
        self.mats = mats
        self.n_steps = len(mats)
        self._inv = None

    def mat_at(self, i):
        return self.mats[i]

    def inv_at(self, i):
        if self._inv is None:
            self._inv = np.linalg.inv(self.mats)
        return self._inv[i]


class _SectionDerivative:
    """The 1x1 cocycle x -> d_fiber Phi(x) at the section's fiber point.

    Evaluation along an orbit starts at the section value of the first
    row's cell and rides the parent fiber dynamics, so the cocycle law
    holds exactly along every evaluated orbit.
    """

    fiber = "linear"
    dim = 1

    def __init__(self, skew, section):
        self._skew = skew
        self._section = section
        self.alpha = skew.cocycle.alpha
        self.family_id = f"{skew.cocycle.family_id}_fiber_derivative"
        grid = section.plan.grid
        self._grid = grid
        size = (int(max(section.grid_values)) + 1) if section.grid_values else 1
        table = np.zeros(size)
        for c, v in section.grid_values.items():
            table[c] = v
        self._table = table

    def _row_codes(self, orbit: OrbitData):
        g = self._grid
        if orbit.positions is not None:
            return np.asarray(g.code_of_array(orbit.positions), dtype=np.int64)
        win = orbit.symbol_rows(-g.depth, g.depth)
        return win @ g._powers

    def evaluator(self, system, orbit: OrbitData):
        codes = self._row_codes(orbit)
        par = self._skew.cocycle.evaluator(system, orbit)
        n = orbit.n_rows - 1
        y = float(self._table[int(codes[0])])
        mats = np.empty((n, 1, 1))
        for i in range(n):
            y, d = par.lift_and_deriv_at(i, y)
            y = float(y)
            mats[i, 0, 0] = float(d)
        return _MatsEval(mats)


@dataclass(frozen=True)
class LinearAlongSection:
    """The fiber-derivative cocycle along a section, solved and bounded."""

    section: object
    cocycle: _SectionDerivative
    values: dict
    poo: object
    transfer: object
    solve_report: object
    law_defect: float
    sup_bound: float
    condition_spread: float

    def summary(self) -> str:
        solved = "none"
        if self.solve_report is not None:
            solved = f"residual {self.solve_report.residual_C0:.2e}"
        return (f"fiber derivative along section: poo defect "
                f"{self.poo.worst_defect:.2e}, solve {solved}, "
                f"sup |dF^n| = {self.sup_bound:.3f} <= C = "
                f"{self.condition_spread:.3f}")


def derivative_cocycle_along_section(S, section, max_period: int = 4,
                                     poo_tol: float = 1e-4, run_solve=True,
                                     sup_steps: int = 1000,
                                     sup_samples: int = 12,
                                     law_samples: int = 20,
                                     rng=0) -> LinearAlongSection:
    """Differentiate the parent cocycle along the section and solve it.

    Tabulates d_fiber Phi at the section's points, wraps it as a 1x1
    linear cocycle, runs the periodic-obstruction scan and the linear
    transfer solve, and estimates sup_n |d_fiber F^n| against the
    condition spread of the solved transfer.
    """
    rng = np.random.default_rng(rng)
    plan = section.plan
    sys = S.base
    der = _SectionDerivative(S, section)
    S_der = SkewSystem(sys, der)

    ev = S.cocycle.evaluator(sys, OrbitData.from_plan(sys, plan))
    nb = plan.n_backward
    rows = section._rows
    values = {}
    for c, k in plan.cell_index.items():
        r = nb + k
        if r < plan.N:
            values[int(c)] = float(ev.deriv_at(r, float(rows[r])))
        else:
            od = OrbitData.from_orbit(sys, plan.point(k), 1)
            ev1 = S.cocycle.evaluator(sys, od)
            values[int(c)] = float(ev1.deriv_at(0, float(rows[r])))

    poo = poo_check(S_der, max_period, tol=poo_tol)
    transfer = solve_report = None
    cond = float("inf")
    if run_solve:
        transfer, solve_report = solve_linear(sys, der, plan,
                                              max_period=max_period,
                                              poo_tol=poo_tol)
        u = np.array([abs(float(transfer.value(int(c))[0, 0]))
                      for c in transfer.codes])
        cond = float(u.max() * (1.0 / u).max())

    cells = list(section.grid_values)
    law = 0.0
    for _ in range(law_samples):
        c = cells[int(rng.integers(len(cells)))]
        if c in section.interpolated:
            continue
        m = int(rng.integers(2, 7))
        x = plan.point(section.visit_trace[c])
        od = OrbitData.from_orbit(sys, x, m)
        ev_m = S.cocycle.evaluator(sys, od)
        der_ev = der.evaluator(sys, od)
        y = section.grid_values[c]
        tabulated = 1.0
        codes_m = der._row_codes(od)
        for i in range(m):
            tabulated *= values.get(int(codes_m[i]), 1.0)
        direct = 1.0
        for i in range(m):
            y, d = ev_m.lift_and_deriv_at(i, y)
            direct *= float(d)
        law = max(law, abs(tabulated - direct))

    sup = 0.0
    for _ in range(sup_samples):
        c = cells[int(rng.integers(len(cells)))]
        x = plan.point(section.visit_trace[c])
        od = OrbitData.from_orbit(sys, x, sup_steps)
        ev_s = S.cocycle.evaluator(sys, od)
        y = section.grid_values[c]
        d = 1.0
        for i in range(sup_steps):
            y, di = ev_s.lift_and_deriv_at(i, y)
            d *= float(di)
            a = abs(d)
            if a > sup:
                sup = a
    return LinearAlongSection(section=section, cocycle=der, values=values,
                              poo=poo, transfer=transfer,
                              solve_report=solve_report, law_defect=law,
                              sup_bound=sup, condition_spread=cond)


def write_trivialization_table(triv: Trivialization, path) -> None:
    codes = sorted(triv.H_values)
    G = triv.H_values[codes[0]].G if codes else 0
    lines = [
        "# kind=trivialization",
        f"# grid_size={G}",
        f"# base_resolution={triv.details.get('base_resolution', '')}",
        f"# family_id={triv.details.get('family_id', '')}",
        f"# anchors={triv.n_anchors}",
        f"# conjugacy_residual={triv.conjugacy_residual!r}",
        "cell,fiber_index,lift,derivative",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        for c in codes:
            g = triv.H_values[c]
            for i in range(g.G):
                fh.write(f"{c},{i},{g.lift[i]!r},{g.deriv[i]!r}\n")
