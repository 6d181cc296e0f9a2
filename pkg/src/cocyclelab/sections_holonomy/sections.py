"""Orbit-closure sections over a dense two-sided base orbit.

The closure of the skew orbit of zeta0 = (x0, y0) is the graph of a
section when the cocycle is cohomologically trivial.  This module builds
that graph cell by cell along a dense orbit plan, watches base
near-returns for the fiber-return property that characterizes the
trivial case, and refuses loudly when a near-return tears the fiber.
"""

import numpy as np
from dataclasses import dataclass, field

from ..base_dynamics import CatMapSystem, TorusPoint, wrap_half
from ..cocycle_core import OrbitData
from .leaves import leaf_neighbor, stable_lift, _circ

# A base return closer than the gate with fiber displacement above the
# violation tolerance is incompatible with a continuous invariant
# section; the pair is deliberately loose against discretization noise.
RETURN_GATE = 1e-2
VIOLATION_TOL = 0.05


class ReturnClaimViolation(RuntimeError):
    """A tight base near-return moved the fiber by a macroscopic amount."""

    def __init__(self, iterate, base_distance, fiber_displacement):
        self.iterate = int(iterate)
        self.base_distance = float(base_distance)
        self.fiber_displacement = float(fiber_displacement)
        super().__init__(
            f"base near-return at iterate {self.iterate} "
            f"(distance {self.base_distance:.3e}) displaced the fiber by "
            f"{self.fiber_displacement:.3f}; no continuous invariant "
            "section is compatible with this orbit")


def _cell_of(grid, x) -> int:
    if hasattr(grid, "code_of_array"):
        return int(grid.code_of_array(x.as_array()))
    return int(grid.cell_of(x))


def _circ_arr(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b)) % 1.0
    return np.minimum(d, 1.0 - d)


def _fiber_rows(S, plan, y0s: np.ndarray) -> np.ndarray:
    """Fiber iterates over every plan row, one column per start value."""
    od = OrbitData.from_plan(S.base, plan)
    ev = S.cocycle.evaluator(S.base, od)
    nb = plan.n_backward
    fib = np.empty((plan.N + 1, y0s.size))
    fib[nb] = y0s % 1.0
    y = fib[nb].copy()
    for r in range(nb, plan.N):
        y = np.asarray(ev.lift_at(r, y), dtype=float) % 1.0
        fib[r + 1] = y
    y = fib[nb].copy()
    for r in range(nb - 1, -1, -1):
        y = np.asarray(ev.inv_at(r, y), dtype=float) % 1.0
        fib[r] = y
    return fib


def _base_return_distances(plan) -> np.ndarray:
    nb = plan.n_backward
    sys_positions = getattr(plan, "positions", None)
    if sys_positions is not None:
        return np.linalg.norm(
            wrap_half(np.asarray(sys_positions) - np.asarray(sys_positions)[nb]),
            axis=1)
    x0 = plan.point(0)
    sys = plan.grid.sys
    return np.array([sys.distance(x0, plan.point(k))
                     for k in range(-nb, plan.n_forward + 1)])


def _scan_returns(S, plan, dists, fib, gate, violation_tol):
    """Dyadic near-return profile plus the violation trap.

    Returns rows (delta, sup fiber displacement, count) down the dyadic
    ladder while returns exist; raises when a sub-gate return displaces
    the fiber beyond the tolerance.
    """
    nb = plan.n_backward
    disp = _circ_arr(fib, fib[nb]).max(axis=1)
    ks = np.arange(-nb, plan.n_forward + 1)
    off = ks != 0
    delta = S.base.hyp.delta0
    pairs = []
    while True:
        mask = off & (dists < delta)
        n = int(mask.sum())
        if n == 0:
            break
        pairs.append((float(delta), float(disp[mask].max()), n))
        delta /= 2.0
    bad = off & (dists < gate) & (disp > violation_tol)
    if bad.any():
        i = np.flatnonzero(bad)[np.argmax(disp[bad])]
        raise ReturnClaimViolation(ks[i], dists[i], disp[i])
    return tuple(pairs)


@dataclass
class OrbitClosureSection:
    """The orbit closure of (x0, y0) presented as a grid section.

    grid_values holds one fiber value per base cell, taken at the cell's
    first visit; visit_trace records those signed visit iterates.  Cells
    in ``interpolated`` were filled from a neighbor for reporting only
    and are excluded from every invariant check.
    """

    skew: object
    plan: object
    anchor_base: object
    anchor_fiber: float
    grid_values: dict
    visit_trace: dict
    interpolated: frozenset
    invariance_defect: float
    return_pairs: tuple
    _rows: np.ndarray = field(repr=False, default=None)

    def value(self, code: int) -> float:
        return self.grid_values[int(code)]

    def value_at(self, x) -> float:
        return self.grid_values[_cell_of(self.plan.grid, x)]

    @property
    def coverage(self) -> float:
        visited = len(self.grid_values) - len(self.interpolated)
        return visited / self.plan.grid.n_cells

    def lipschitz_estimate(self, n_pairs: int = 300, rng=0) -> float:
        """Worst sampled ratio of fiber gap to base gap between cells."""
        rng = np.random.default_rng(rng)
        codes = [c for c in self.grid_values if c not in self.interpolated]
        worst = 0.0
        delta0 = self.skew.base.hyp.delta0
        for _ in range(n_pairs):
            a, b = rng.choice(len(codes), size=2, replace=False)
            ca, cb = codes[a], codes[b]
            d = self.skew.base.distance(self.plan.point(self.visit_trace[ca]),
                                        self.plan.point(self.visit_trace[cb]))
            if 1e-6 < d <= delta0:
                worst = max(worst,
                            _circ(self.grid_values[ca], self.grid_values[cb]) / d)
        return worst


def _fill_unvisited(grid, values):
    """Nearest-visited fill, reporting only."""
    have = set(values)
    missing = [int(c) for c in np.asarray(grid.all_codes()) if int(c) not in have]
    if not missing:
        return frozenset()
    visited = list(have)
    if hasattr(grid, "center"):
        centers = np.array([grid.center(c) for c in visited])
        for c in missing:
            gap = wrap_half(centers - grid.center(c))
            values[c] = values[visited[int(np.argmin(np.linalg.norm(gap, axis=1)))]]
    else:
        for c in missing:
            rep = grid.representative(c)
            best = min(visited,
                       key=lambda v: grid.sys.distance(rep, grid.representative(v)))
            values[c] = values[best]
    return frozenset(missing)


def _build_sections(S, plan, y0s, gate=RETURN_GATE, violation_tol=VIOLATION_TOL):
    """Shared builder: one fiber sweep, one return scan, K sections."""
    if S.fiber != "circle":
        raise TypeError("orbit-closure sections handle circle-fiber cocycles")
    if not plan.two_sided:
        raise ValueError("orbit-closure sections need a two-sided plan; "
                         "build one with make_plan(..., two_sided=True)")
    y0s = np.atleast_1d(np.asarray(y0s, dtype=float))
    fib = _fiber_rows(S, plan, y0s)
    dists = _base_return_distances(plan)
    pairs = _scan_returns(S, plan, dists, fib, gate, violation_tol)

    nb = plan.n_backward
    codes = plan._codes
    val_size = int(codes.max()) + 1
    fv_rows = {c: nb + k for c, k in plan.cell_index.items()}
    fv_row_arr = np.fromiter((fv_rows[c] for c in codes), dtype=np.int64,
                             count=len(codes))
    # invariance audit rows: each cell's first visit, stepping forward once
    audit = np.array([r for r in fv_rows.values() if r < plan.N], dtype=np.int64)

    x0 = plan.point(0)
    out = []
    for j in range(y0s.size):
        col = fib[:, j]
        defect = float(_circ_arr(col[audit + 1], col[fv_row_arr[audit + 1]]).max())
        values = {int(c): float(col[r]) for c, r in fv_rows.items()}
        interp = _fill_unvisited(plan.grid, values)
        out.append(OrbitClosureSection(
            skew=S, plan=plan, anchor_base=x0, anchor_fiber=float(y0s[j]),
            grid_values=values, visit_trace=dict(plan.cell_index),
            interpolated=interp, invariance_defect=defect,
            return_pairs=pairs, _rows=fib[:, j].copy()))
    return out


def orbit_closure_section(S, zeta0, plan, gate=RETURN_GATE,
                          violation_tol=VIOLATION_TOL) -> OrbitClosureSection:
    """Close the skew orbit of zeta0 over the plan into a grid section.

    zeta0 is (x0, y0) with x0 the plan's start, or a bare fiber value y0.
    Raises ReturnClaimViolation when a base near-return tears the fiber,
    which is the decisive sign that the cocycle is not a coboundary.
    """
    if isinstance(zeta0, (tuple, list)):
        x0, y0 = zeta0
        if S.base.distance(x0, plan.point(0)) > 1e-9:
            raise ValueError("zeta0 must sit over the plan's start point")
    else:
        y0 = float(zeta0)
    return _build_sections(S, plan, np.array([float(y0)]),
                           gate=gate, violation_tol=violation_tol)[0]


@dataclass(frozen=True)
class SaturationReport:
    worst_deviation: float
    n_checked: int
    n_skipped: int
    per_side: dict
    section_lipschitz: float
    leaf_lipschitz: float
    product_constant: float

    def summary(self) -> str:
        sides = ", ".join(f"{s}: {v:.3e}" for s, v in self.per_side.items())
        return (f"saturation: worst {self.worst_deviation:.3e} over "
                f"{self.n_checked} lifts ({sides}); section Lip "
                f"{self.section_lipschitz:.3g} vs leaf bound "
                f"{self.leaf_lipschitz * self.product_constant:.3g}")


def saturation_check(section, S=None, samples: int = 24, rng=0,
                     sides="su") -> SaturationReport:
    """Lift leaf neighbors from sampled section points, compare to the grid.

    A section that is genuinely the orbit closure is saturated by the
    lifted leaves: the stable or unstable lift of a section point lands
    back on the section over the neighbor's cell, up to cell transport.
    """
    S = S if S is not None else section.skew
    rng = np.random.default_rng(rng)
    plan = section.plan
    sys = S.base
    codes = [c for c in section.grid_values if c not in section.interpolated]
    order = rng.permutation(len(codes))
    worst = {s: 0.0 for s in sides}
    leaf_lip = 0.0
    checked = skipped = 0
    for idx in order[:samples]:
        code = codes[idx]
        x = plan.point(section.visit_trace[code])
        y = section.grid_values[code]
        for s in sides:
            z = leaf_neighbor(sys, x, s, rng)
            eta = stable_lift(S, (x, y), z, side=s)
            nb_code = _cell_of(plan.grid, z)
            if nb_code in section.interpolated or nb_code not in section.grid_values:
                skipped += 1
                continue
            dz = sys.distance(x, z)
            if dz > 1e-9:
                leaf_lip = max(leaf_lip, _circ(eta, y) / dz)
            worst[s] = max(worst[s], _circ(eta, section.grid_values[nb_code]))
            checked += 1
    kappa = getattr(sys, "kappa", 1.0)
    return SaturationReport(
        worst_deviation=max(worst.values()),
        n_checked=checked, n_skipped=skipped, per_side=worst,
        section_lipschitz=section.lipschitz_estimate(rng=rng),
        leaf_lipschitz=leaf_lip, product_constant=float(kappa))


def phase_verdict(S, plan, y0: float = 0.3) -> str:
    """One-line verdict for the harness: does the orbit closure graph?"""
    try:
        orbit_closure_section(S, float(y0), plan)
    except ReturnClaimViolation:
        return "return-claim-violated"
    return "coboundary-consistent"


def write_section_table(section, path) -> None:
    grid = section.plan.grid
    res = grid.describe() if hasattr(grid, "describe") else str(grid)
    lines = [
        "# kind=section",
        f"# base_resolution={res}",
        f"# family_id={section.skew.cocycle.family_id}",
        f"# anchor_fiber={section.anchor_fiber!r}",
        f"# plan_seed={section.plan.seed_desc}",
        f"# plan_N={section.plan.N}",
        f"# invariance_defect={section.invariance_defect!r}",
        "cell,value,first_visit,interpolated",
    ]
    for code in sorted(section.grid_values):
        interp = 1 if code in section.interpolated else 0
        k = section.visit_trace.get(code, "")
        lines.append(f"{code},{section.grid_values[code]!r},{k},{interp}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
