"""Two-sided subshifts of finite type with exact symbolic arithmetic.

Points are eventually periodic in both directions and stored as
(left period, center word, right period, offset); every operation below is
decidable and exact on that representation.  The metric is d(x, y) =
theta^(m-1) where m is the smallest |i| with x_i != y_i (and d = 1 when the
disagreement is at the origin), which makes the closing construction exact
with constants (c, lam) = (1, log(1/theta)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .hyperbolic import (ClosingError, ClosingResult, DenseOrbitPlan,
                         HyperbolicityData, closing_bounds_ok)

ENUMERATION_CAP = 1_000_000


@dataclass(frozen=True)
class SftPoint:
    """Bi-infinite sequence, periodic to the left and right of a center word.

    ``offset`` is the index of coordinate 0 inside ``center``; the center
    occupies coordinates [-offset, -offset + len(center)).  Tiling convention:
    the symbol just left of the center is left[-1], and the symbol just right
    is right[0].
    """

    left: tuple
    center: tuple
    right: tuple
    offset: int

    def symbol(self, i: int) -> int:
        j = i + self.offset
        if 0 <= j < len(self.center):
            return self.center[j]
        if j < 0:
            return self.left[j % len(self.left)]
        return self.right[(j - len(self.center)) % len(self.right)]

    def window(self, lo: int, hi: int) -> tuple:
        return tuple(self.symbol(i) for i in range(lo, hi + 1))

    def shift(self, k: int) -> "SftPoint":
        return SftPoint(self.left, self.center, self.right, self.offset + k)

    @property
    def center_start(self) -> int:
        return -self.offset

    @property
    def center_end(self) -> int:
        return -self.offset + len(self.center) - 1

    @staticmethod
    def periodic(word) -> "SftPoint":
        w = tuple(word)
        return SftPoint(w, w, w, 0)


def _rotate(t: tuple, r: int) -> tuple:
    r %= len(t)
    return t[r:] + t[:r]


def _primitive_root(word: tuple) -> tuple:
    n = len(word)
    for d in range(1, n + 1):
        if n % d == 0 and word == word[:d] * (n // d):
            return word[:d]
    return word


class SftSystem:
    """Two-sided shift on the sequences allowed by a primitive 0/1 matrix."""

    kind = "sft"

    def __init__(self, transition=((1, 1), (1, 1)), theta: float = 0.5):
        t = np.asarray(transition, dtype=np.int64)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError("transition matrix must be square")
        if not np.all((t == 0) | (t == 1)):
            raise ValueError("transition matrix entries must be 0 or 1")
        if not 0.0 < theta < 1.0:
            raise ValueError(f"theta must lie in (0,1), got {theta}")
        self.transition = t
        self.n_symbols = t.shape[0]
        self.theta = float(theta)
        self._check_primitive()
        self._followers = [tuple(np.nonzero(t[a])[0].tolist())
                           for a in range(self.n_symbols)]

        lam = math.log(1.0 / theta)
        self.hyp = HyperbolicityData(
            eps0=theta,
            delta0=theta,
            delta1=theta / 2.0,
            K0=1.0,
            lam=lam,
            nu_s=theta,
            nu_u=1.0 / theta,
            c_closing=1.0,
        )

    def _check_primitive(self):
        t = self.transition
        k = self.n_symbols
        if np.any(t.sum(axis=1) == 0) or np.any(t.sum(axis=0) == 0):
            raise ValueError("reducible transition matrix: a symbol has no continuation")
        power = np.eye(k, dtype=np.int64)
        bound = (k - 1) ** 2 + 1
        for _ in range(bound):
            power = np.minimum(power @ t, 1)
            if np.all(power > 0):
                return
        raise ValueError(
            "transition matrix is not primitive (irreducible and aperiodic)")

    def is_admissible_word(self, word) -> bool:
        t = self.transition
        return all(t[word[i], word[i + 1]] for i in range(len(word) - 1))

    def assert_admissible_point(self, x: SftPoint, pad: int = 2):
        lo = x.center_start - len(x.left) - pad
        hi = x.center_end + len(x.right) + pad
        w = x.window(lo, hi)
        if not self.is_admissible_word(w):
            raise ValueError("point carries a forbidden transition")

    # -- stepping and metric ------------------------------------------------

    def step(self, x: SftPoint, k: int = 1) -> SftPoint:
        return x.shift(k)

    def distance(self, x: SftPoint, y: SftPoint, alpha: float | None = None) -> float:
        m = self._disagreement_radius(x, y)
        if m is None:
            return 0.0
        d = self.theta ** max(m - 1, 0)
        return d if alpha is None else d ** alpha

    def _disagreement_radius(self, x: SftPoint, y: SftPoint):
        """Smallest |i| with x_i != y_i, or None if the points are equal.

        Beyond both centers the sequences are purely periodic, so agreement
        over one joint period there settles the tails.
        """
        left_l = math.lcm(len(x.left), len(y.left))
        right_l = math.lcm(len(x.right), len(y.right))
        lo = min(x.center_start, y.center_start, 0) - left_l
        hi = max(x.center_end, y.center_end, 0) + right_l
        bound = max(abs(lo), abs(hi))
        for m in range(bound + 1):
            if x.symbol(m) != y.symbol(m) or x.symbol(-m) != y.symbol(-m):
                return m
        return None

    def points_equal(self, x: SftPoint, y: SftPoint) -> bool:
        return self._disagreement_radius(x, y) is None

    @property
    def diameter(self) -> float:
        return 1.0

    # -- bracket --------------------------------------------------------------

    def bracket(self, x: SftPoint, y: SftPoint) -> SftPoint:
        """Splice: past of x, future of y.  Needs d(x,y) <= delta0 = theta."""
        d = self.distance(x, y)
        if d > self.hyp.delta0:
            raise ValueError(
                f"bracket undefined: d(x,y)={d:.6g} exceeds delta0={self.hyp.delta0:.6g}")
        a = min(x.center_start, 0)
        b = max(y.center_end, 1)
        center = x.window(a, 0) + y.window(1, b)
        left = _rotate(x.left, (a + x.offset) % len(x.left))
        right = _rotate(y.right, (b + 1 + y.offset - len(y.center)) % len(y.right))
        return SftPoint(left, center, right, -a)

    # -- periodic points ------------------------------------------------------

    def periodic_count(self, n: int) -> int:
        power = np.linalg.matrix_power(self.transition.astype(object), n)
        return int(np.trace(power))

    def periodic_points(self, n: int) -> list:
        """All fixed points of sigma^n: cyclically admissible words, lex order."""
        if n < 1:
            raise ValueError("period must be >= 1")
        if self.n_symbols ** n > ENUMERATION_CAP:
            raise ValueError(f"alphabet^{n} exceeds enumeration cap {ENUMERATION_CAP}")
        out = []
        t = self.transition
        word = []

        def grow():
            if len(word) == n:
                if t[word[-1], word[0]]:
                    out.append(SftPoint.periodic(tuple(word)))
                return
            for s in range(self.n_symbols):
                if not word or t[word[-1], s]:
                    word.append(s)
                    grow()
                    word.pop()

        grow()
        return out

    # -- closing ----------------------------------------------------------------

    def anosov_closing(self, x: SftPoint, n: int, positions=None) -> ClosingResult:
        """Close a nearly returning segment by repeating its first n symbols.

        Exact: the periodic word inherits x's agreement window, so the trace
        bounds hold with c = 1 and lam = log(1/theta).
        """
        if n < 1:
            raise ValueError("period must be >= 1")
        d0 = self.distance(x, x.shift(n))
        if d0 >= self.hyp.delta1:
            raise ClosingError(
                f"d(x, sigma^n x) = {d0:.6g} is not below delta1 = {self.hyp.delta1:.6g}")
        word = x.window(0, n - 1)
        p = SftPoint.periodic(word)
        y = self.bracket(x, p)
        trace = np.empty((n + 1, 3))
        for i in range(n + 1):
            xi, pi, yi = x.shift(i), p.shift(i), y.shift(i)
            trace[i] = (self.distance(xi, pi), self.distance(pi, yi),
                        self.distance(xi, yi))
        ok = closing_bounds_ok(trace, n, d0, self.hyp.c_closing, self.hyp.lam)
        orbit = [p.shift(i) for i in range(n)]
        return ClosingResult(
            period=n, start=x, periodic_point=p, bracket_point=y,
            return_distance=d0, bound_trace=trace,
            c_used=self.hyp.c_closing, lam_used=self.hyp.lam,
            bounds_ok=ok, periodic_orbit=orbit,
        )

    # -- word machinery ---------------------------------------------------------

    def admissible_words(self, length: int) -> list:
        """All admissible words of the given length, lexicographic."""
        if self.n_symbols ** length > ENUMERATION_CAP:
            raise ValueError("word enumeration exceeds cap")
        out = []
        word = []

        def grow():
            if len(word) == length:
                out.append(tuple(word))
                return
            for s in range(self.n_symbols):
                if not word or self.transition[word[-1], s]:
                    word.append(s)
                    grow()
                    word.pop()

        grow()
        return out

    @lru_cache(maxsize=None)
    def connector(self, a: int, b: int) -> tuple:
        """Shortest strictly-between symbol string making a -> ... -> b admissible."""
        if self.transition[a, b]:
            return ()
        frontier = [(a, ())]
        seen = {a}
        while frontier:
            nxt = []
            for sym, path in frontier:
                for s in self._followers[sym]:
                    cand = path + (s,)
                    if self.transition[s, b]:
                        return cand
                    if s not in seen:
                        seen.add(s)
                        nxt.append((s, cand))
            frontier = nxt
        raise ValueError(f"no admissible path from {a} to {b}")

    @lru_cache(maxsize=None)
    def cycle_through(self, s: int) -> tuple:
        """A shortest admissible cycle s -> ... -> s, returned starting at s."""
        return (s,) + self.connector(s, s)

    def full_shift(self) -> bool:
        return bool(np.all(self.transition == 1))


class SftGrid:
    """Cells are centered cylinders: the word on coordinates [-depth, depth]."""

    def __init__(self, sys: SftSystem, depth: int):
        if depth < 0:
            raise ValueError("depth must be >= 0")
        self.sys = sys
        self.depth = int(depth)
        self.width = 2 * self.depth + 1
        self._powers = sys.n_symbols ** np.arange(self.width - 1, -1, -1,
                                                  dtype=np.int64)
        self._words = sys.admissible_words(self.width)
        self._code_set = {self.encode(w) for w in self._words}
        self.n_cells = len(self._words)

    def encode(self, word) -> int:
        return int(np.dot(np.asarray(word, dtype=np.int64), self._powers))

    def decode(self, code: int) -> tuple:
        k = self.sys.n_symbols
        out = []
        for _ in range(self.width):
            code, r = divmod(code, k)
            out.append(r)
        return tuple(reversed(out))

    def codes_of_orbit(self, symbols: np.ndarray, k_lo: int, origin: int) -> np.ndarray:
        """Cell codes of sigma^k(x) for k = k_lo.., from a flat symbol array.

        ``symbols[origin + i]`` is coordinate i of the unshifted point; the
        window of iterate k spans coordinates [k - depth, k + depth].
        """
        n = len(symbols) - self.width + 1
        windows = np.lib.stride_tricks.sliding_window_view(
            symbols.astype(np.int64), self.width)
        codes = windows @ self._powers
        start = origin + k_lo - self.depth
        if start < 0 or start >= len(codes):
            raise ValueError("symbol array does not cover the requested range")
        return codes[start:]

    def cell_of(self, x: SftPoint) -> int:
        return self.encode(x.window(-self.depth, self.depth))

    def representative(self, code: int) -> SftPoint:
        """A canonical admissible point in the cylinder: periodic extensions."""
        w = self.decode(code)
        if code not in self._code_set:
            raise ValueError(f"code {code} is not an admissible cylinder")
        sys = self.sys
        cyc_l = sys.cycle_through(w[0])         # ends adjacent to w[0]
        cyc_r = sys.cycle_through(w[-1])        # (w[-1], path...) -> rotate
        right = _rotate(cyc_r, 1) if len(cyc_r) > 1 else cyc_r
        return SftPoint(cyc_l, w, right, self.depth)

    def all_codes(self) -> np.ndarray:
        return np.fromiter((self.encode(w) for w in self._words), dtype=np.int64)

    @property
    def diameter(self) -> float:
        return self.sys.theta ** self.depth

    def describe(self) -> str:
        return f"depth{self.depth}"


def _de_bruijn(k: int, n: int) -> list:
    """Classic de Bruijn sequence B(k, n) via Lyndon words."""
    seq = []
    a = [0] * k * n

    def db(t, p):
        if t > n:
            if n % p == 0:
                seq.extend(a[1:p + 1])
        else:
            a[t] = a[t - p]
            db(t + 1, p)
            for j in range(a[t - p] + 1, k):
                a[t] = j
                db(t + 1, t)

    db(1, 1)
    return seq


def _covering_sequence(sys: SftSystem, width: int) -> list:
    """A symbol string containing every admissible word of the given width."""
    if sys.full_shift():
        seq = _de_bruijn(sys.n_symbols, width)
        return seq + seq[:width - 1]
    words = sys.admissible_words(width)
    seq = list(words[0])
    for w in words[1:]:
        seq.extend(sys.connector(seq[-1], w[0]))
        seq.extend(w)
    return seq


def sft_transitive_plan(sys: SftSystem, grid: SftGrid,
                        two_sided: bool = False) -> DenseOrbitPlan:
    """Plan through a point whose center concatenates all admissible words.

    The forward half of the center is a covering sequence for the grid width;
    two-sided plans place a second copy to the left of the origin so the
    backward orbit is covering too.
    """
    cover = _covering_sequence(sys, grid.width)
    right_tail = sys.cycle_through(cover[-1])
    right = _rotate(right_tail, 1) if len(right_tail) > 1 else right_tail
    if two_sided:
        conn = sys.connector(cover[-1], cover[0])
        center = tuple(cover) + conn + tuple(cover)
        offset = len(cover) + len(conn)
        left = sys.cycle_through(cover[0])
    else:
        center = tuple(cover)
        offset = 0
        left = sys.cycle_through(cover[0])
    x0 = SftPoint(left, center, right, offset)

    n_forward = len(cover) - 1
    n_backward = len(cover) + (len(conn) if two_sided else 0) if two_sided else 0
    lo = -n_backward - grid.depth
    hi = n_forward + grid.depth
    symbols = np.array(x0.window(lo, hi), dtype=np.int64)
    codes = grid.codes_of_orbit(symbols, -n_backward, origin=-lo)
    codes = codes[:n_forward + n_backward + 1]
    plan = DenseOrbitPlan(
        start=x0, grid=grid, codes=codes,
        n_forward=n_forward, n_backward=n_backward,
        point_fn=lambda k: x0.shift(k),
        coverage_target=grid.n_cells,
        seed_desc=f"covering-sequence len={len(cover)}",
    )
    plan.symbols = symbols
    plan.symbols_origin = -lo
    if plan.coverage < 1.0:
        raise ValueError("covering sequence failed to visit every cylinder")
    return plan
