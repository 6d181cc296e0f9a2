import math

import numpy as np
import pytest

from cocyclelab.base_dynamics import (CatMapSystem, ClosingError, SftGrid,
                                      SftPoint, SftSystem, TorusPoint,
                                      anosov_closing, bracket, distance,
                                      make_grid, make_plan, periodic_count,
                                      periodic_orbit_representatives,
                                      periodic_points, transitive_point,
                                      write_periodic_points_csv)
from cocyclelab.base_dynamics.torus import _int_mat_power, wrap_half

GOLDEN = ((1, 1), (1, 0))

# Known counts.  Cat map: |det(A^n - I)| = lam_u^n + lam_u^-n - 2 (Lefschetz
# for an orientation-preserving Anosov automorphism); golden-mean shift:
# trace(T^n) gives the Lucas numbers.
CAT_COUNTS = [1, 5, 16, 45, 121, 320, 841, 2205]
LUCAS = [1, 3, 4, 7, 11, 18, 29, 47]


@pytest.fixture(scope="module")
def cat():
    return CatMapSystem()


@pytest.fixture(scope="module")
def two_shift():
    return SftSystem()


@pytest.fixture(scope="module")
def golden(request):
    return SftSystem(transition=GOLDEN)


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------

def test_cat_constants(cat):
    assert cat.lambda_u == pytest.approx((3 + math.sqrt(5)) / 2, abs=1e-14)
    assert cat.lambda_u * cat.lambda_s == pytest.approx(1.0, abs=1e-14)
    # orthogonal eigenbasis for a symmetric matrix
    assert cat.kappa == pytest.approx(1.0, abs=1e-12)
    assert cat.hyp.c_closing == pytest.approx(2.0 / (1.0 - cat.lambda_s), abs=1e-12)
    assert cat.hyp.delta1 == pytest.approx(cat.hyp.delta0 / (2 * cat.hyp.c_closing))
    assert cat.hyp.lam == pytest.approx(math.log(cat.lambda_u))
    assert cat.hyp.envelopes_hold()


def test_sft_constants(two_shift):
    hyp = two_shift.hyp
    assert hyp.eps0 == hyp.delta0 == 0.5
    assert hyp.delta1 == 0.25
    assert hyp.c_closing == 1.0
    assert hyp.lam == pytest.approx(math.log(2.0))
    assert hyp.envelopes_hold()


def test_snap_metric_rescale(cat):
    hyp = cat.hyp.rescaled(0.6)
    assert hyp.lam == pytest.approx(0.6 * cat.hyp.lam)
    assert hyp.nu_s == pytest.approx(cat.lambda_s ** 0.6)
    assert hyp.envelopes_hold()
    x, y = TorusPoint(0.1, 0.2), TorusPoint(0.13, 0.18)
    assert cat.distance(x, y, alpha=0.6) == pytest.approx(cat.distance(x, y) ** 0.6)


def test_rejects_non_hyperbolic():
    with pytest.raises(ValueError, match=r"\|trace\| <= 2"):
        CatMapSystem(matrix=((1, 1), (0, 1)))
    with pytest.raises(ValueError, match="determinant"):
        CatMapSystem(matrix=((2, 0), (0, 1)))


def test_rejects_bad_sft():
    with pytest.raises(ValueError, match="reducible"):
        SftSystem(transition=((1, 1), (0, 0)))
    with pytest.raises(ValueError, match="primitive"):
        SftSystem(transition=((0, 1), (1, 0)))   # period-2, irreducible


# ---------------------------------------------------------------------------
# metric and stepping
# ---------------------------------------------------------------------------

def test_torus_step_example(cat):
    x = TorusPoint(0.25, 0.25)
    assert cat.step(x) == TorusPoint(0.75, 0.5)
    assert cat.step(cat.step(x), -1) == x


def test_torus_metric_quotient(cat):
    assert cat.distance(TorusPoint(0.95, 0.0), TorusPoint(0.05, 0.0)) == pytest.approx(0.1)
    assert cat.diameter == pytest.approx(math.sqrt(2) / 2)


def test_sft_metric_examples(two_shift):
    d = two_shift.distance
    x = SftPoint.periodic((0, 1, 1))
    # same left tail and window [-3, 3]; right tail first differs at i = 4
    y = SftPoint((0, 1, 1), x.window(-3, 3), (0, 1, 1), 3)
    assert x.symbol(4) == 1 and y.symbol(4) == 0
    assert d(x, y) == 0.5 ** 3
    zeros, ones = SftPoint.periodic((0,)), SftPoint.periodic((1,))
    assert d(zeros, ones) == 1.0
    assert d(zeros, zeros) == 0.0
    agree7 = SftPoint((0,), (1,) + (0,) * 15 + (1,), (0,), 8)
    assert d(zeros, agree7) == 0.5 ** 7


def test_sft_shift_is_isometry_of_windows(two_shift):
    x = SftPoint((0, 1), (1, 1, 0, 1), (1, 0, 0), 2)
    for k in (-3, -1, 1, 5):
        shifted = two_shift.step(x, k)
        assert shifted.window(-2, 2) == x.window(k - 2, k + 2)


# ---------------------------------------------------------------------------
# periodic points
# ---------------------------------------------------------------------------

def test_cat_periodic_counts(cat):
    for n, expect in enumerate(CAT_COUNTS, start=1):
        assert periodic_count(cat, n) == expect
        lefschetz = cat.lambda_u ** n + cat.lambda_u ** (-n) - 2
        assert expect == pytest.approx(lefschetz, abs=1e-6)


def test_cat_periodic_points_are_exact_fixed_points(cat):
    for n in (1, 2, 3, 5):
        pts = periodic_points(cat, n)
        assert len(pts) == CAT_COUNTS[n - 1]
        assert len({(p.x1, p.x2) for p in pts}) == len(pts)
        q = CAT_COUNTS[n - 1]
        power = _int_mat_power(cat.int_matrix, n)
        for p in pts:
            # exact integer check: (A^n - I) (a/q, b/q) must lie in Z^2
            a, b = round(p.x1 * q), round(p.x2 * q)
            assert abs(p.x1 * q - a) < 1e-9 and abs(p.x2 * q - b) < 1e-9
            r1 = (power[0][0] - 1) * a + power[0][1] * b
            r2 = power[1][0] * a + (power[1][1] - 1) * b
            assert r1 % q == 0 and r2 % q == 0


def test_sft_periodic_counts(two_shift, golden):
    for n in range(1, 9):
        assert periodic_count(two_shift, n) == 2 ** n
        assert periodic_count(golden, n) == LUCAS[n - 1]
        assert len(periodic_points(golden, n)) == LUCAS[n - 1]


def test_sft_periodic_points_admissible(golden):
    for p in periodic_points(golden, 5):
        assert golden.is_admissible_word(p.window(-6, 6))
        assert golden.points_equal(golden.step(p, 5), p)


def test_orbit_representatives(cat, golden):
    reps = periodic_orbit_representatives(cat, 3)
    assert [n for _, n in reps].count(1) == 1
    assert [n for _, n in reps].count(2) == 2
    assert [n for _, n in reps].count(3) == 5
    reps_g = periodic_orbit_representatives(golden, 4)
    assert [n for _, n in reps_g] == [1, 2, 3, 4]


def test_periodic_csv_round_trip(tmp_path, cat, golden):
    path = write_periodic_points_csv(cat, 2, tmp_path / "cat.csv")
    rows = open(path).read().strip().splitlines()
    assert rows[0] == "n,index,x1,x2"
    assert len(rows) == 1 + CAT_COUNTS[0] + CAT_COUNTS[1]
    # repr round-trips bit for bit
    n, i, x1, x2 = rows[2].split(",")
    p = periodic_points(cat, 2)[int(i)]
    assert float(x1) == p.x1 and float(x2) == p.x2
    path_g = write_periodic_points_csv(golden, 3, tmp_path / "golden.csv")
    rows_g = open(path_g).read().strip().splitlines()
    assert rows_g[0] == "n,index,word"
    assert len(rows_g) == 1 + 1 + 3 + 4


# ---------------------------------------------------------------------------
# bracket
# ---------------------------------------------------------------------------

def test_torus_bracket_product_structure(cat):
    x, y = TorusPoint(0.3, 0.4), TorusPoint(0.33, 0.38)
    z = bracket(cat, x, y)
    # z - x is purely unstable, z - y purely stable
    vu, vs = cat.basis_inv @ wrap_half(z.as_array() - x.as_array())
    assert abs(vs) < 1e-12
    wu, ws = cat.basis_inv @ wrap_half(z.as_array() - y.as_array())
    assert abs(wu) < 1e-12
    assert bracket(cat, x, x) == x


def test_torus_bracket_dynamical_characterization(cat):
    # backward orbits amplify float noise at rate lam_u, so keep the horizon
    # short and the tolerance above 0.036 * lam_s^10 ~ 2.4e-6
    x, y = TorusPoint(0.3, 0.4), TorusPoint(0.33, 0.38)
    z = bracket(cat, x, y)
    dz, dx = z.as_array().copy(), x.as_array().copy()
    for _ in range(10):
        dz = cat.step_array(dz, -1)
        dx = cat.step_array(dx, -1)
    assert np.linalg.norm(wrap_half(dz - dx)) < 1e-5
    fz, fy = z.as_array().copy(), y.as_array().copy()
    for _ in range(10):
        fz = cat.step_array(fz, 1)
        fy = cat.step_array(fy, 1)
    assert np.linalg.norm(wrap_half(fz - fy)) < 1e-5


def test_torus_bracket_refuses_far_points(cat):
    with pytest.raises(ValueError, match="bracket undefined"):
        bracket(cat, TorusPoint(0.0, 0.0), TorusPoint(0.5, 0.5))


def test_sft_bracket_splice(two_shift):
    x = SftPoint((0,), (0, 1, 1, 0), (1,), 2)
    y = SftPoint((1, 0), (1, 1, 0, 0), (0, 1), 1)
    assert x.window(-1, 1) == y.window(-1, 1)   # d(x, y) <= theta
    assert two_shift.distance(x, y) <= two_shift.hyp.delta0
    z = two_shift.bracket(x, y)
    assert z.window(-6, 0) == x.window(-6, 0)
    assert z.window(1, 8) == y.window(1, 8)


def test_sft_bracket_admissible_on_golden(golden):
    x = SftPoint.periodic((0, 0, 1))
    y = SftPoint.periodic((0, 1))
    if golden.distance(x, y) <= golden.hyp.delta0:
        z = golden.bracket(x, y)
        golden.assert_admissible_point(z)


# ---------------------------------------------------------------------------
# closing
# ---------------------------------------------------------------------------

def _near_return(cat, n_scan=4000):
    x0 = np.array(cat.DEFAULT_SEED)
    pos = cat.orbit_array(x0, n_scan)
    best = None
    for n in range(1, 9):
        d = np.linalg.norm(wrap_half(pos[n:] - pos[:-n]), axis=1)
        k = int(np.argmin(d))
        if d[k] < cat.hyp.delta1:
            cand = (float(d[k]), k, n)
            if best is None or cand[0] < best[0]:
                best = cand
    assert best is not None, "no near return in scan range"
    return pos, best


def test_cat_closing(cat):
    pos, (d0, k, n) = _near_return(cat)
    x = TorusPoint.from_array(pos[k])
    res = anosov_closing(cat, x, n, positions=pos[k:k + n + 1])
    assert res.bounds_ok
    assert res.return_distance == pytest.approx(d0)
    p = res.periodic_point
    # the closed point is a true period-n point to closing accuracy
    pn = cat.step_array(p.as_array(), n)
    assert np.linalg.norm(wrap_half(pn - p.as_array())) < 1e-10
    assert cat.distance(x, p) <= res.c_used * d0 * (1 + 1e-9)
    # bracket point: [x, p] with the periodic orbit
    z = bracket(cat, x, p)
    assert cat.distance(z, res.bracket_point) < 1e-12
    assert len(res.periodic_orbit) == n
    for i, q in enumerate(res.periodic_orbit):
        assert cat.distance(q, TorusPoint.from_array(
            cat.step_array(p.as_array(), i))) < 1e-9


def test_cat_closing_trace_shape(cat):
    pos, (d0, k, n) = _near_return(cat)
    res = anosov_closing(cat, TorusPoint.from_array(pos[k]), n,
                         positions=pos[k:k + n + 1])
    assert res.bound_trace.shape == (n + 1, 3)
    trace = res.bound_trace
    assert np.all(trace >= 0)
    # triangle inequality ties the three columns together
    assert np.all(trace[:, 0] <= trace[:, 1] + trace[:, 2] + 1e-12)
    # stable gap d(f^i p, f^i y) decays, unstable gap d(f^i x, f^i y) grows
    if trace[0, 1] > 0:
        assert np.all(np.diff(trace[:, 1]) < 0)
    if trace[0, 2] > 0:
        assert np.all(np.diff(trace[:, 2]) > 0)


def test_cat_closing_refuses_far_return(cat):
    with pytest.raises(ClosingError, match="delta1"):
        anosov_closing(cat, TorusPoint(0.3, 0.6), 1)


def test_sft_closing_exact(two_shift):
    # center repeats w five times; the right tail first breaks the period-3
    # pattern at coordinate 10, so x and sigma^3 x agree out to |i| = 6
    w = (0, 1, 1)
    x = SftPoint((0, 1, 1), w * 5, (0, 0, 1), 6)
    d0 = two_shift.distance(x, two_shift.step(x, 3))
    assert d0 == 0.5 ** 6
    assert 0.0 < d0 < two_shift.hyp.delta1
    res = anosov_closing(two_shift, x, 3)
    assert res.bounds_ok
    p = res.periodic_point
    assert two_shift.points_equal(two_shift.step(p, 3), p)
    assert p.window(0, 2) == x.window(0, 2)
    y = res.bracket_point
    assert y.window(-8, 0) == x.window(-8, 0)
    assert y.window(1, 8) == p.window(1, 8)


def test_sft_closing_refuses(two_shift):
    x = SftPoint((0,), (0, 1), (1,), 0)   # d(x, sigma x) = 1
    with pytest.raises(ClosingError):
        anosov_closing(two_shift, x, 1)


# ---------------------------------------------------------------------------
# grids and plans
# ---------------------------------------------------------------------------

def test_torus_grid_codes(cat):
    grid = cat.make_grid(16)
    assert grid.n_cells == 256
    for code in (0, 17, 255):
        assert grid.code_of_array(grid.center(code)) == code
    assert grid.diameter == pytest.approx(math.sqrt(2) / 16)


def test_sft_grid_codes(golden):
    grid = SftGrid(golden, 2)
    # admissible words of length 5 on the golden-mean shift: L(5) count
    assert grid.n_cells == 13
    for code in grid.all_codes():
        rep = grid.representative(int(code))
        golden.assert_admissible_point(rep)
        assert grid.cell_of(rep) == code


def test_make_grid_resolution(cat, golden):
    g = make_grid(cat, 1.0 / 32)
    assert g.cells_per_side == 32
    gs = make_grid(golden, 0.06)
    # theta^depth <= 0.06 needs depth 5 at theta = 1/2
    assert gs.depth == 5
    assert make_grid(golden, 2.0).depth == 0


@pytest.mark.parametrize("two_sided", [False, True])
def test_torus_plan_first_visits(cat, two_sided):
    plan = cat.transitive_plan(cat.make_grid(12), two_sided=two_sided)
    assert plan.coverage == 1.0
    assert plan.two_sided == two_sided
    pos = plan.positions
    for code, k in list(plan.cell_index.items())[::37]:
        assert plan.grid.code_of_array(pos[k + plan.n_backward]) == code
        assert plan.code_at(k) == code
    # first-visit property on a sample cell
    code, k = next(iter(plan.cell_index.items()))
    codes = plan._codes
    for j in range(abs(k)):
        assert codes[j + plan.n_backward] != code or j == k


@pytest.mark.parametrize("two_sided", [False, True])
def test_sft_plan_coverage(two_shift, golden, two_sided):
    for sys in (two_shift, golden):
        plan = make_plan(sys, SftGrid(sys, 2), two_sided=two_sided)
        assert plan.coverage == 1.0
        for code, k in plan.cell_index.items():
            assert plan.grid.cell_of(plan.point(k)) == code


def test_transitive_point_end_to_end(cat):
    plan = transitive_point(cat, 1.0 / 8, two_sided=True)
    assert plan.coverage == 1.0
    assert plan.grid.cells_per_side == 8
    assert plan.n_backward > 0
