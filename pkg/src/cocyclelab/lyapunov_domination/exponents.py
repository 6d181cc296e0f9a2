"""Fibered Lyapunov exponents: Birkhoff runs and periodic-orbit data.

Exponents are computed two ways and reported side by side: time averages of
log-derivatives along long skew orbits, and exact multiplier data over
periodic base orbits.  For a circle fiber, the multipliers of the product
diffeo at its fixed points carry the extreme exponents; products without
fixed points are rotation-like and contribute exponent zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..base_dynamics import periodic_orbit_representatives
from ..base_dynamics.shift import SftSystem
from ..base_dynamics.torus import CatMapSystem
from ..cocycle_core import CircleDiffeo, OrbitData, cocycle_product
from ..cocycle_core.circle import G_DEFAULT

_RENORM = 256


@dataclass
class LyapunovEstimate:
    value: float
    n_steps: int
    method: str
    start: object = None


@dataclass
class PeriodicExponents:
    """Fiber exponents of the cocycle product over one periodic base orbit.

    ``fiber_points`` lists (y, multiplier) at the product's fixed points on
    the fiber; exponents are log(multiplier)/period.  ``degenerate`` marks a
    product indistinguishable from the identity at sample resolution, and
    ``rotation_number`` is set when the product has no fixed point at all.
    """

    period: int
    exponents: list
    fiber_points: list = field(default_factory=list)
    rotation_number: float | None = None
    degenerate: bool = False

    @property
    def min_exponent(self) -> float:
        return min(self.exponents) if self.exponents else 0.0

    @property
    def max_exponent(self) -> float:
        return max(self.exponents) if self.exponents else 0.0


@dataclass
class SweepResult:
    periodic: list
    birkhoff: np.ndarray
    envelope: tuple
    max_period: int
    n_runs: int
    n_steps: int

    def summary(self) -> str:
        lo, hi = self.envelope
        return (f"exponent envelope [{lo:+.4f}, {hi:+.4f}] from "
                f"{len(self.periodic)} periodic orbits and "
                f"{self.n_runs} runs of {self.n_steps} steps")


# ---------------------------------------------------------------------------
# periodic products
# ---------------------------------------------------------------------------

def _circle_periodic_exponents(g: CircleDiffeo, n: int,
                               flat_tol: float = 1e-9) -> PeriodicExponents:
    grid = np.arange(g.G) / g.G
    disp = g.lift - grid
    lo, hi = float(disp.min()), float(disp.max())
    if hi - lo < flat_tol:
        # constant displacement: identity-conjugate (integer level) or a
        # rigid rotation; either way no hyperbolic fiber data
        level = round(lo)
        if abs(lo - level) < flat_tol:
            return PeriodicExponents(period=n, exponents=[0.0], degenerate=True)
        return PeriodicExponents(period=n, exponents=[],
                                 rotation_number=float(lo % 1.0))
    levels = range(int(np.ceil(lo - 1e-12)), int(np.floor(hi + 1e-12)) + 1)
    pts = []
    ext_disp = np.append(disp, disp[0])       # displacement is periodic
    ext_deriv = np.append(g.deriv, g.deriv[0])
    for k in levels:
        dd = ext_disp - k
        sign_change = dd[:-1] * dd[1:] <= 0.0
        for j in np.nonzero(sign_change)[0]:
            a, b = dd[j], dd[j + 1]
            t = 0.5 if a == b else a / (a - b)
            y = (j + t) / g.G
            mult = float((1 - t) * ext_deriv[j] + t * ext_deriv[j + 1])
            pts.append((float(y % 1.0), mult))
    if not pts:
        # displacement never crosses an integer: rotation-like product
        rho = _rotation_number(g)
        return PeriodicExponents(period=n, exponents=[], rotation_number=rho)
    exps = [float(np.log(m) / n) for _, m in pts if m > 0.0]
    return PeriodicExponents(period=n, exponents=exps, fiber_points=pts)


def _rotation_number(g: CircleDiffeo, q: int = 64) -> float:
    y = 0.0
    for _ in range(q):
        y = float(g.eval_lift(y))
    return (y / q) % 1.0


def lyapunov_periodic(S, p, n: int, G: int = G_DEFAULT) -> PeriodicExponents:
    """Exponent data of Phi^(n) over the periodic orbit through p."""
    prod = cocycle_product(S, p, n, G=G)
    if S.fiber == "circle":
        return _circle_periodic_exponents(prod, n)
    eigs = np.linalg.eigvals(prod)
    exps = sorted(float(np.log(abs(m)) / n) for m in eigs)
    return PeriodicExponents(period=n, exponents=exps)


# ---------------------------------------------------------------------------
# Birkhoff runs
# ---------------------------------------------------------------------------

def _random_stream(sys: SftSystem, length: int, rng) -> np.ndarray:
    if sys.full_shift():
        return rng.integers(0, sys.n_symbols, size=length).astype(np.int64)
    followers = sys._followers
    out = np.empty(length, dtype=np.int64)
    s = int(rng.integers(sys.n_symbols))
    picks = rng.random(length)
    for i in range(length):
        opts = followers[s]
        s = opts[int(picks[i] * len(opts))]
        out[i] = s
    return out


def _stacked_runs(system, n_runs: int, n_steps: int, rng, pad: int = 8):
    """One OrbitData holding n_runs blocks of n_steps+1 rows each."""
    rows_per = n_steps + 1
    if isinstance(system, CatMapSystem):
        starts = rng.random((n_runs, 2))
        blocks = [system.orbit_array(s, n_steps) for s in starts]
        data = OrbitData(system, positions=np.concatenate(blocks, axis=0))
    else:
        stream = _random_stream(system, n_runs * rows_per + 2 * pad, rng)
        data = OrbitData(system, symbols=stream, symbols_origin=pad,
                         n_rows=n_runs * rows_per)
    offsets = np.arange(n_runs) * rows_per
    return data, offsets


def _circle_run_exponents(ev, offsets: np.ndarray, n_steps: int,
                          y0: np.ndarray) -> np.ndarray:
    y = np.asarray(y0, dtype=float).copy()
    acc = np.zeros(len(offsets))
    prod = np.ones(len(offsets))
    for t in range(n_steps):
        y, d = ev.lift_and_deriv_at(offsets + t, y)
        y = y - np.floor(y)
        prod = prod * d
        if (t + 1) % _RENORM == 0:
            acc += np.log(prod)
            prod[:] = 1.0
    acc += np.log(prod)
    return acc / n_steps


def _linear_run_exponents(ev, offsets: np.ndarray, n_steps: int,
                          v0: np.ndarray) -> np.ndarray:
    v = np.asarray(v0, dtype=float).copy()
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    acc = np.zeros(len(offsets))
    for t in range(n_steps):
        v = np.einsum("rij,rj->ri", ev.mats[offsets + t], v)
        norms = np.linalg.norm(v, axis=1)
        acc += np.log(norms)
        v /= norms[:, None]
    return acc / n_steps


def lyapunov_forward(S, state, n_steps: int, rng=None) -> LyapunovEstimate:
    """Forward exponent of one run started at state = (x, y) (or (x, v))."""
    x, y = state
    sys = S.base
    data = OrbitData.from_orbit(sys, x, n_steps)
    ev = S.cocycle.evaluator(sys, data)
    if S.fiber == "circle":
        vals = _circle_run_exponents(ev, np.zeros(1, dtype=int), n_steps,
                                     np.array([float(y)]))
    else:
        vals = _linear_run_exponents(ev, np.zeros(1, dtype=int), n_steps,
                                     np.asarray(y, dtype=float)[None, :])
    return LyapunovEstimate(value=float(vals[0]), n_steps=n_steps,
                            method="birkhoff", start=state)


def exponent_sweep(S, max_period: int = 6, n_runs: int = 20,
                   n_steps: int = 100_000, G: int = 512,
                   rng=None) -> SweepResult:
    """Envelope of fibered exponents: periodic data plus random runs.

    Periodic multipliers bound the envelope from the hyperbolic side; Birkhoff
    runs add the generic (attracting-graph) side.  The envelope is the min/max
    over everything observed.
    """
    rng = np.random.default_rng(rng)
    sys = S.base
    periodic = []
    values = []
    for p, n in periodic_orbit_representatives(sys, max_period):
        pe = lyapunov_periodic(S, p, n, G=G)
        periodic.append((p, n, pe))
        values.extend(pe.exponents)

    data, offsets = _stacked_runs(sys, n_runs, n_steps, rng)
    ev = S.cocycle.evaluator(sys, data)
    if S.fiber == "circle":
        runs = _circle_run_exponents(ev, offsets, n_steps, rng.random(n_runs))
    else:
        dim = S.cocycle.dim
        runs = _linear_run_exponents(ev, offsets, n_steps,
                                     rng.standard_normal((n_runs, dim)))
    values.extend(float(v) for v in runs)
    envelope = (min(values), max(values))
    return SweepResult(periodic=periodic, birkhoff=np.asarray(runs),
                       envelope=envelope, max_period=max_period,
                       n_runs=n_runs, n_steps=n_steps)
