"""Lifted stable and unstable leaves via graph-transform limits.

Over a dominated skew product, the leaf of the lamination through
zeta = (x, y) is the graph of a Lipschitz section over the local base
leaf: push y forward along the orbit of x, pull back along the orbit
of the nearby base point z.  The limit exists because base contraction
beats fiber distortion; the depth is chosen adaptively by watching
successive-depth disagreement.
"""

import numpy as np
from dataclasses import dataclass, field

from ..base_dynamics import CatMapSystem, SftPoint, TorusPoint, wrap_half, wrap_unit
from ..cocycle_core import OrbitData

DEPTH_CAP = 200
LIFT_TOL = 1e-8

# Components transverse to the requested leaf larger than this mean the
# input point is not actually on the leaf line.
_OFF_LEAF_TOL = 1e-7


class NoConvergence(RuntimeError):
    """Successive graph-transform depths refuse to settle.

    Raised when the adaptive depth loop exhausts DEPTH_CAP without the
    disagreement dropping below tolerance; the usual cause is a cocycle
    whose fiber distortion is not dominated by the base contraction.
    """


def _circ(a, b):
    d = abs(float(a) - float(b)) % 1.0
    return min(d, 1.0 - d)


def _torus_pair(sys, x, z, depth, side):
    """Orbit data for x and z with coherent rounding.

    Iterating the two orbits independently lets the expanding direction
    amplify independent rounding, which poisons deep graph transforms.
    Instead z's orbit is laid down as x's orbit plus the exactly
    contracted leaf offset, so the float noise of the shared orbit
    cancels between the forward and backward fiber chains.
    """
    v = wrap_half(z.as_array() - x.as_array())
    vu, vs = sys.basis_inv @ v
    on, off = (vs, vu) if side == "s" else (vu, vs)
    if abs(off) > _OFF_LEAF_TOL:
        w = "stable" if side == "s" else "unstable"
        raise ValueError(
            f"z is not on the local {w} leaf of x: transverse component "
            f"{abs(off):.3g} exceeds {_OFF_LEAF_TOL:g}")
    if abs(on) > sys.hyp.eps0:
        raise ValueError(
            f"z escapes the local leaf: offset {abs(on):.4g} > eps0 = "
            f"{sys.hyp.eps0:.4g}")
    if side == "s":
        X = sys.orbit_array(x.as_array(), depth)
        scales = sys.lam_s_signed ** np.arange(depth + 1)
        offsets = np.outer(scales, vs * sys.e_s)
    else:
        X = sys.orbit_array(x.as_array(), depth, backward=True)[::-1]
        scales = (1.0 / sys.lam_u_signed) ** np.arange(depth, -1, -1)
        offsets = np.outer(scales, vu * sys.e_u)
    Z = wrap_unit(X + offsets)
    return OrbitData(sys, positions=X.copy()), OrbitData(sys, positions=Z)


def _sft_pair(sys, x, z, depth, side):
    sgn = 1 if side == "s" else -1
    for j in range(depth + 1):
        d = sys.distance(sys.step(x, sgn * j), sys.step(z, sgn * j))
        if d > sys.hyp.eps0:
            w = "stable" if side == "s" else "unstable"
            raise ValueError(
                f"z escapes the local {w} set: d = {d:.4g} > eps0 = "
                f"{sys.hyp.eps0:.4g} after {j} iterates")
    pad = max(8, depth // 4)
    if side == "s":
        return (OrbitData.from_orbit(sys, x, depth, pad=pad),
                OrbitData.from_orbit(sys, z, depth, pad=pad))
    return (OrbitData.from_orbit(sys, sys.step(x, -depth), depth, pad=pad),
            OrbitData.from_orbit(sys, sys.step(z, -depth), depth, pad=pad))


def stable_lift(S, zeta, z, depth=None, side="s", tol=LIFT_TOL):
    """Fiber value over z on the lamination leaf through zeta = (x, y).

    side "s": z must lie on the local stable leaf of x; the value is the
    depth limit of (Phi^(d)(z))^-1(Phi^(d)(x)(y)).  side "u" is the same
    computation through the inverse dynamics.  With depth=None the depth
    grows until two successive answers agree within tol; a fixed depth
    skips the adaptive loop.
    """
    if S.fiber != "circle":
        raise TypeError("stable_lift handles circle-fiber cocycles")
    if side not in ("s", "u"):
        raise ValueError(f"side must be 's' or 'u', got {side!r}")
    x, y = zeta
    cap = depth if depth is not None else DEPTH_CAP
    if isinstance(S.base, CatMapSystem):
        od_x, od_z = _torus_pair(S.base, x, z, cap, side)
    else:
        od_x, od_z = _sft_pair(S.base, x, z, cap, side)
    ev_x = S.cocycle.evaluator(S.base, od_x)
    ev_z = S.cocycle.evaluator(S.base, od_z)

    if side == "s":
        def eta_at(d, carry):
            # carry: y pushed forward d-1 steps along x's chain
            carry = ev_x.lift_at(d - 1, carry)
            w = carry
            for i in range(d - 1, -1, -1):
                w = ev_z.inv_at(i, w)
            return w % 1.0, carry
        carry0 = float(y)
    else:
        # rows run from f^-cap(x) forward to x at row cap
        def eta_at(d, carry):
            carry = ev_x.inv_at(cap - d, carry)
            w = carry
            for i in range(cap - d, cap):
                w = ev_z.lift_at(i, w)
            return w % 1.0, carry
        carry0 = float(y)

    if depth is not None:
        eta, _ = eta_at(depth, _push_to(ev_x, side, cap, depth, float(y)))
        return eta

    carry = carry0
    prev = None
    history = []
    for d in range(1, cap + 1):
        eta, carry = eta_at(d, carry)
        if prev is not None:
            gap = _circ(eta, prev)
            history.append(gap)
            if gap < tol:
                return eta
        prev = eta
    tail = ", ".join(f"{g:.2e}" for g in history[-4:])
    raise NoConvergence(
        f"graph transform did not settle below {tol:g} by depth {cap} "
        f"(last disagreements: {tail})")


def _push_to(ev_x, side, cap, depth, y):
    # fixed-depth entry: redo the carry up to depth-1 so eta_at's final
    # step lands exactly at the requested depth
    if side == "s":
        for i in range(depth - 1):
            y = ev_x.lift_at(i, y)
    else:
        for i in range(cap - 1, cap - depth, -1):
            y = ev_x.inv_at(i, y)
    return y


def leaf_neighbor(sys, x, side, rng, radius=None):
    """A random point on the local stable or unstable leaf of x.

    Torus: a point of the eigenline through x inside the bracket radius.
    Shift: the bracket of a tail-refreshed companion word with x, which
    splices a random admissible past (side s) or future (side u) onto x.
    """
    if isinstance(sys, CatMapSystem):
        r = radius if radius is not None else sys.hyp.delta0
        t = float(rng.uniform(0.1 * r, r)) * (1 if rng.random() < 0.5 else -1)
        vec = sys.e_s if side == "s" else sys.e_u
        return TorusPoint.from_array(x.as_array() + t * vec)
    m = int(rng.integers(2, 7))
    word = list(x.window(-m, m))
    adj = sys.transition
    if side == "s":
        for j in range(m - 2, -1, -1):
            allowed = np.flatnonzero(adj[:, word[j + 1]])
            word[j] = int(rng.choice(allowed))
    else:
        for j in range(m + 2, 2 * m + 1):
            allowed = np.flatnonzero(adj[word[j - 1]])
            word[j] = int(rng.choice(allowed))
    w = _companion_point(sys, tuple(word), m)
    return sys.bracket(w, x) if side == "s" else sys.bracket(x, w)


def _companion_point(sys, word, radius):
    cyc_l = sys.cycle_through(word[0])
    cyc_r = sys.cycle_through(word[-1])
    right = cyc_r[1:] + cyc_r[:1] if len(cyc_r) > 1 else cyc_r
    return SftPoint(cyc_l, word, right, radius)


@dataclass(frozen=True)
class LiftedLeaf:
    """A sampled leaf of the lifted lamination through ``anchor``."""

    anchor: tuple
    side: str
    samples: dict
    lipschitz_estimate: float
    depth_used: int


def lift_leaf(S, zeta, side="s", n_samples=12, radius=None, rng=0,
              depth=None, tol=LIFT_TOL):
    """Sample the lamination leaf through zeta over random leaf points."""
    rng = np.random.default_rng(rng)
    x, y = zeta
    sys = S.base
    samples = {x: float(y) % 1.0}
    for _ in range(n_samples):
        z = leaf_neighbor(sys, x, side, rng, radius=radius)
        samples[z] = stable_lift(S, zeta, z, depth=depth, side=side, tol=tol)
    pts = list(samples)
    lip = 0.0
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            d = sys.distance(pts[i], pts[j])
            if d > 1e-12:
                lip = max(lip, _circ(samples[pts[i]], samples[pts[j]]) / d)
    return LiftedLeaf(anchor=(x, float(y) % 1.0), side=side, samples=samples,
                      lipschitz_estimate=lip,
                      depth_used=depth if depth is not None else DEPTH_CAP)


def leaf_invariance_defect(S, leaf: LiftedLeaf, tol=LIFT_TOL) -> float:
    """sup over samples of the gap between F(leaf) and the leaf at F(anchor).

    Each sample (z, eta) is pushed one step through the skew product and
    compared against a fresh lift computed from the pushed anchor.  Stable
    leaves are pushed forward; unstable leaves backward, so the leaf
    offsets contract instead of leaving the local set.
    """
    x, y = leaf.anchor
    fx, fy = _one_step(S, x, y, leaf.side)
    worst = 0.0
    for z, eta in leaf.samples.items():
        fz, feta = _one_step(S, z, eta, leaf.side)
        fresh = stable_lift(S, (fx, fy), fz, side=leaf.side, tol=tol)
        worst = max(worst, _circ(feta, fresh))
    return worst


def _one_step(S, x, y, side):
    sys = S.base
    if side == "s":
        od = OrbitData.from_orbit(sys, x, 1)
        fy = S.cocycle.evaluator(sys, od).lift_at(0, float(y))
        return sys.step(x), float(fy) % 1.0
    xb = sys.step(x, -1)
    od = OrbitData.from_orbit(sys, xb, 1)
    fy = S.cocycle.evaluator(sys, od).inv_at(0, float(y))
    return xb, float(fy) % 1.0
