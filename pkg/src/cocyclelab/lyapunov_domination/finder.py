"""Search for a periodic base orbit carrying a contracting fiber point.

Scans one long orbit for near returns, closes each candidate into a true
periodic point, and inspects the fiber multipliers of the cocycle product
over it.  Candidates are processed by increasing period so the answer is
the simplest witness, not the first one the scan stumbled on.  For a
coboundary the search must come back empty: every product is conjugate to
the identity, so the report then records what was scanned instead of a
witness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..base_dynamics import ClosingError
from ..base_dynamics.shift import SftPoint, SftSystem, _rotate
from ..base_dynamics.torus import CatMapSystem, TorusPoint, wrap_half
from .exponents import lyapunov_periodic

PERIOD_CAP = 64
CANDIDATE_CAP = 512


@dataclass
class ContractingPoint:
    found: bool
    base_point: object = None
    period: int = 0
    fiber_point: float = 0.0
    multiplier: float = 0.0
    exponent: float = 0.0
    n_scanned: int = 0
    n_candidates: int = 0
    best_multiplier_seen: float = float("inf")

    def summary(self) -> str:
        if self.found:
            return (f"contracting point: period {self.period}, fiber point "
                    f"{self.fiber_point:.6f}, multiplier {self.multiplier:.6f} "
                    f"({self.n_candidates} candidates from {self.n_scanned} steps)")
        return (f"no contracting periodic point: {self.n_candidates} candidates "
                f"from {self.n_scanned} steps, best multiplier "
                f"{self.best_multiplier_seen:.6f}")


def _torus_candidates(sys: CatMapSystem, positions: np.ndarray,
                      period_cap: int) -> list:
    """(period, index) near-return pairs from 4 half-shifted cell hashes."""
    delta1 = sys.hyp.delta1
    h = delta1 / 2.0
    m = int(np.ceil(1.0 / h)) + 1
    found = set()
    for sx in (0.0, 0.5):
        for sy in (0.0, 0.5):
            cells = np.floor((positions + np.array([sx, sy]) * h) / h).astype(np.int64)
            codes = cells[:, 0] * m + cells[:, 1]
            order = np.argsort(codes, kind="stable")
            sc = codes[order]
            same = sc[:-1] == sc[1:]
            gaps = order[1:] - order[:-1]
            ok = same & (gaps >= 1) & (gaps <= period_cap)
            for j in np.nonzero(ok)[0]:
                found.add((int(gaps[j]), int(order[j])))
    out = []
    for n, i in found:
        d = float(np.linalg.norm(wrap_half(positions[i + n] - positions[i])))
        if d < delta1:
            out.append((n, i, d))
    out.sort()
    return out


def _sft_candidates(sys: SftSystem, stream: np.ndarray, pad: int,
                    period_cap: int, radius: int = 3) -> list:
    """Near returns from exact window matching at the given radius."""
    width = 2 * radius + 1
    windows = np.lib.stride_tricks.sliding_window_view(stream, width)
    powers = sys.n_symbols ** np.arange(width - 1, -1, -1, dtype=np.int64)
    codes = windows @ powers          # code j <-> stream position j + radius
    order = np.argsort(codes, kind="stable")
    sc = codes[order]
    same = sc[:-1] == sc[1:]
    gaps = order[1:] - order[:-1]
    ok = same & (gaps >= 1) & (gaps <= period_cap)
    out = []
    n_rows = len(stream) - 2 * pad
    for j in np.nonzero(ok)[0]:
        i = int(order[j]) + radius - pad   # back to iterate index
        n = int(gaps[j])
        if 0 <= i and i + n < n_rows:
            out.append((n, i, float(sys.theta ** radius)))
    out.sort()
    return out


def _sft_point_at(sys: SftSystem, stream: np.ndarray, pad: int, i: int,
                  n: int, margin: int = 12) -> SftPoint:
    lo = max(0, pad + i - margin)
    hi = min(len(stream), pad + i + n + margin + 1)
    center = tuple(int(s) for s in stream[lo:hi])
    cyc_l = sys.cycle_through(center[0])
    cyc_r = sys.cycle_through(center[-1])
    right = _rotate(cyc_r, 1) if len(cyc_r) > 1 else cyc_r
    return SftPoint(cyc_l, center, right, (pad + i) - lo)


def find_contracting_periodic(S, n_steps: int = 1_000_000,
                              period_cap: int = PERIOD_CAP,
                              candidate_cap: int = CANDIDATE_CAP,
                              margin: float = 0.05, G: int = 512,
                              seed_point=None, rng=None) -> ContractingPoint:
    """First periodic orbit (by period) with a fiber multiplier <= 1 - margin."""
    if S.fiber != "circle":
        raise TypeError("the contracting-point search runs on circle fibers")
    sys = S.base
    pad = 8
    if isinstance(sys, CatMapSystem):
        x0 = np.array(seed_point if seed_point is not None else sys.DEFAULT_SEED)
        positions = sys.orbit_array(x0, n_steps)
        candidates = _torus_candidates(sys, positions, period_cap)
    else:
        rng = np.random.default_rng(rng)
        from .exponents import _random_stream
        stream = _random_stream(sys, n_steps + 2 * pad, rng)
        candidates = _sft_candidates(sys, stream, pad, period_cap)

    candidates = candidates[:candidate_cap]
    best_mult = float("inf")
    checked = 0
    for n, i, _ in candidates:
        try:
            if isinstance(sys, CatMapSystem):
                x = TorusPoint.from_array(positions[i])
                res = sys.anosov_closing(x, n, positions=positions[i:i + n + 1])
            else:
                x = _sft_point_at(sys, stream, pad, i, n)
                res = sys.anosov_closing(x, n)
        except ClosingError:
            continue
        checked += 1
        pe = lyapunov_periodic(S, res.periodic_point, n, G=G)
        if pe.degenerate and best_mult == float("inf"):
            best_mult = 1.0
        for y, mult in pe.fiber_points:
            if mult < best_mult:
                best_mult = mult
            if mult <= 1.0 - margin:
                return ContractingPoint(
                    found=True, base_point=res.periodic_point, period=n,
                    fiber_point=y, multiplier=mult,
                    exponent=float(np.log(mult) / n),
                    n_scanned=n_steps, n_candidates=checked,
                    best_multiplier_seen=mult)
    return ContractingPoint(found=False, n_scanned=n_steps,
                            n_candidates=checked,
                            best_multiplier_seen=best_mult)
