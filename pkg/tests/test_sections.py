"""Leaf lifts, orbit-closure sections, holonomy atlases, trivialization."""

import json

import numpy as np
import pytest

from cocyclelab.base_dynamics import (CatMapSystem, SftSystem, TorusPoint,
                                      make_grid, make_plan)
from cocyclelab.cocycle_core import (BumpFactor, Const, Cylinder, DiffeoField,
                                     FamilyCocycle, RotationFactor, SkewSystem,
                                     Trig, cocycle_product, diffeo_compose,
                                     diffeo_eval, diffeo_invert,
                                     make_coboundary)
from cocyclelab.livsic_solver import solve_diffeo
from cocyclelab.sections_holonomy import (AtlasTooSparse, ReturnClaimViolation,
                                          build_atlas, conjugated_exponent,
                                          derivative_cocycle_along_section,
                                          holonomy, holonomy_smoothness_check,
                                          leaf_invariance_defect,
                                          leaf_neighbor, lift_leaf,
                                          orbit_closure_section, phase_verdict,
                                          saturation_check, stable_lift,
                                          trivialize, write_section_table,
                                          write_trivialization_table)
from cocyclelab.sections_holonomy.holonomy import _AnchorChart


def _circ(a, b):
    d = abs(float(a) - float(b)) % 1.0
    return min(d, 1.0 - d)


def _wrapped_gap(lift_a, lift_b):
    dl = np.asarray(lift_a) - np.asarray(lift_b)
    return float(np.max(np.abs(dl - np.round(dl))))


X = TorusPoint(0.3141592653589793, 0.5772156649015329)


@pytest.fixture(scope="module")
def cat():
    return CatMapSystem()


@pytest.fixture(scope="module")
def sft():
    return SftSystem()


@pytest.fixture(scope="module")
def gen():
    return DiffeoField([RotationFactor(Trig([(0.02, (1, 0), 0.0)])),
                        BumpFactor(Trig([(0.03, (0, 1), 1.0)]))])


@pytest.fixture(scope="module")
def cob(cat, gen):
    return SkewSystem(cat, make_coboundary(gen, 1.0))


@pytest.fixture(scope="module")
def idc(cat):
    return SkewSystem(cat, FamilyCocycle(DiffeoField([]), 1.0, "identity"))


@pytest.fixture(scope="module")
def bad(cat):
    field = DiffeoField([BumpFactor(Const(0.5))])
    return SkewSystem(cat, FamilyCocycle(field, 1.0, "bump05"))


@pytest.fixture(scope="module")
def gen_s():
    return DiffeoField([RotationFactor(Cylinder(1, {(0, 1, 0): 0.12}, default=0.03)),
                        BumpFactor(Cylinder(0, {(1,): 0.2}, default=-0.1))])


@pytest.fixture(scope="module")
def cob_s(sft, gen_s):
    return SkewSystem(sft, make_coboundary(gen_s, 1.0))


@pytest.fixture(scope="module")
def plan64(cat):
    return make_plan(cat, cat.make_grid(64), two_sided=True)


@pytest.fixture(scope="module")
def plan_s(sft):
    return make_plan(sft, make_grid(sft, 0.5 ** 4), two_sided=True)


@pytest.fixture(scope="module")
def sec(cob, plan64):
    return orbit_closure_section(cob, 0.3, plan64)


@pytest.fixture(scope="module")
def sec_id(idc, plan64):
    return orbit_closure_section(idc, 0.3, plan64)


@pytest.fixture(scope="module")
def sec_s(cob_s, plan_s):
    return orbit_closure_section(cob_s, 0.3, plan_s)


@pytest.fixture(scope="module")
def atlas32(cob, plan64):
    return build_atlas(cob, plan64, 32)


class TestStableLift:
    def test_same_point_returns_fiber(self, cob):
        assert _circ(stable_lift(cob, (X, 0.37), X), 0.37) < 1e-12

    def test_identity_cocycle_is_constant(self, cat, idc):
        rng = np.random.default_rng(7)
        for side in "su":
            z = leaf_neighbor(cat, X, side, rng)
            assert _circ(stable_lift(idc, (X, 0.37), z, side=side), 0.37) < 1e-14

    def test_coboundary_oracle_torus(self, cat, cob, gen):
        # eta(z) must equal v(z)(v(x)^{-1}(y)) along both leaves
        rng = np.random.default_rng(7)
        vx_inv = diffeo_invert(gen.snapshot(cat, X, 1024))
        w = diffeo_eval(vx_inv, 0.37)
        for side in "su":
            for _ in range(4):
                z = leaf_neighbor(cat, X, side, rng)
                got = stable_lift(cob, (X, 0.37), z, side=side)
                want = diffeo_eval(gen.snapshot(cat, z, 1024), w)
                assert _circ(got, want) < 1e-6

    def test_coboundary_oracle_sft(self, sft, cob_s, gen_s):
        rng = np.random.default_rng(7)
        xs = sft.periodic_points(5)[2]
        w = diffeo_eval(diffeo_invert(gen_s.snapshot(sft, xs, 1024)), 0.37)
        for side in "su":
            for _ in range(4):
                z = leaf_neighbor(sft, xs, side, rng)
                got = stable_lift(cob_s, (xs, 0.37), z, side=side)
                want = diffeo_eval(gen_s.snapshot(sft, z, 1024), w)
                assert _circ(got, want) < 1e-6

    def test_depth_ladder_contracts(self, cat, cob):
        z = leaf_neighbor(cat, X, "s", np.random.default_rng(11))
        etas = [stable_lift(cob, (X, 0.37), z, depth=d)
                for d in (4, 8, 16, 32, 64)]
        gaps = [_circ(a, b) for a, b in zip(etas, etas[1:])]
        assert all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-12

    def test_adaptive_matches_deep_fixed(self, cat, cob):
        z = leaf_neighbor(cat, X, "s", np.random.default_rng(12))
        assert _circ(stable_lift(cob, (X, 0.37), z),
                     stable_lift(cob, (X, 0.37), z, depth=48)) < 1e-6

    def test_off_leaf_point_rejected(self, cob):
        with pytest.raises(ValueError, match="not on the local stable leaf"):
            stable_lift(cob, (X, 0.37), TorusPoint(0.9, 0.1))

    def test_bad_side_rejected(self, cob):
        with pytest.raises(ValueError):
            stable_lift(cob, (X, 0.37), X, side="x")

    def test_contracting_cocycle_still_converges(self, cat, bad):
        # bump(0.5) kills no lift along one leaf; wildness shows up in
        # sections, not in single-leaf graph transforms
        z = leaf_neighbor(cat, X, "s", np.random.default_rng(13))
        v = stable_lift(bad, (X, 0.3), z)
        assert 0.0 <= v < 1.0


class TestLiftedLeaves:
    def test_invariance_both_sides(self, cob):
        for side, seed in (("s", 3), ("u", 4)):
            leaf = lift_leaf(cob, (X, 0.37), side=side, n_samples=8, rng=seed)
            assert leaf_invariance_defect(cob, leaf) < 1e-10

    def test_anchor_is_a_sample(self, cob):
        leaf = lift_leaf(cob, (X, 0.37), side="s", n_samples=6, rng=3)
        assert X in leaf.samples
        assert _circ(leaf.samples[X], 0.37) < 1e-12

    def test_lipschitz_estimate_moderate(self, cob):
        leaf = lift_leaf(cob, (X, 0.37), side="s", n_samples=8, rng=3)
        assert 0.0 < leaf.lipschitz_estimate < 0.5

    def test_sft_leaf_invariance(self, sft, cob_s):
        xs = sft.periodic_points(5)[2]
        leaf = lift_leaf(cob_s, (xs, 0.37), side="s", n_samples=6, rng=9)
        assert leaf_invariance_defect(cob_s, leaf) < 1e-10


class TestOrbitClosureSection:
    def test_identity_section_is_constant(self, sec_id):
        vals = np.array(list(sec_id.grid_values.values()))
        assert np.abs(vals - 0.3).max() == 0.0
        assert sec_id.invariance_defect == 0.0

    def test_full_coverage_no_interpolation(self, sec):
        assert sec.coverage == 1.0
        assert len(sec.interpolated) == 0

    def test_invariance_defect_small(self, sec):
        # bounded by Lip(v) * cell diameter at 64x64
        assert sec.invariance_defect < 5e-3

    def test_conjugation_transport_oracle(self, cat, gen, sec, plan64):
        # the section must be x -> v(x)(v(x0)^{-1}(0.3)) at visited points
        rng = np.random.default_rng(7)
        x0 = plan64.point(0)
        w0 = diffeo_eval(diffeo_invert(gen.snapshot(cat, x0, 1024)), 0.3)
        codes = list(sec.grid_values)
        for i in rng.choice(len(codes), 40, replace=False):
            c = codes[i]
            p = plan64.point(sec.visit_trace[c])
            want = diffeo_eval(gen.snapshot(cat, p, 1024), w0)
            assert _circ(sec.grid_values[c], want) < 1e-6

    def test_return_pairs_scale_linearly(self, sec):
        assert len(sec.return_pairs) >= 3
        for delta, eps_obs, count in sec.return_pairs:
            assert count > 0
            assert eps_obs < 0.25 * delta

    def test_requires_two_sided_plan(self, cat, cob):
        oneway = make_plan(cat, cat.make_grid(32))
        with pytest.raises(ValueError, match="two-sided"):
            orbit_closure_section(cob, 0.3, oneway)

    def test_anchor_tuple_must_sit_on_start(self, cob, plan64):
        with pytest.raises(ValueError, match="start point"):
            orbit_closure_section(cob, (TorusPoint(0.9, 0.9), 0.3), plan64)

    def test_anchor_tuple_accepted(self, cob, plan64, sec):
        two = orbit_closure_section(cob, (plan64.point(0), 0.3), plan64)
        assert two.grid_values == sec.grid_values

    def test_negative_control_raises(self, bad, plan64):
        with pytest.raises(ReturnClaimViolation) as exc:
            orbit_closure_section(bad, 0.3, plan64)
        err = exc.value
        assert err.base_distance < 1e-2
        assert err.fiber_displacement > 0.05
        assert "no continuous invariant section" in str(err)

    def test_phase_verdicts(self, cob, bad, plan64):
        assert phase_verdict(cob, plan64) == "coboundary-consistent"
        assert phase_verdict(bad, plan64) == "return-claim-violated"

    def test_sft_section_exact(self, sft, gen_s, sec_s, plan_s):
        # integer symbolic orbits: transport is float-exact
        assert sec_s.invariance_defect < 1e-12
        x0 = plan_s.point(0)
        w0 = diffeo_eval(diffeo_invert(gen_s.snapshot(sft, x0, 1024)), 0.3)
        for c in list(sec_s.grid_values)[:40]:
            p = plan_s.point(sec_s.visit_trace[c])
            want = diffeo_eval(gen_s.snapshot(sft, p, 1024), w0)
            assert _circ(sec_s.grid_values[c], want) < 1e-5

    def test_section_table_round_trip(self, sec, tmp_path):
        path = tmp_path / "section.csv"
        write_section_table(sec, path)
        lines = path.read_text().splitlines()
        heads = [ln for ln in lines if ln.startswith("#")]
        assert "# kind=section" in heads
        assert any(ln.startswith("# invariance_defect=") for ln in heads)
        rows = [ln for ln in lines if ln and not ln.startswith("#")]
        assert rows[0] == "cell,value,first_visit,interpolated"
        assert len(rows) - 1 == len(sec.grid_values)
        code, value, visit, interp = rows[1].split(",")
        assert _circ(float(value), sec.grid_values[int(code)]) == 0.0
        assert interp == "0"


class TestSaturation:
    def test_torus_saturation(self, sec):
        rep = saturation_check(sec, samples=16, rng=5)
        assert rep.worst_deviation < 5e-3
        assert rep.n_checked > 0
        assert set(rep.per_side) <= {"s", "u"}
        assert rep.section_lipschitz < 1.5 * rep.leaf_lipschitz * rep.product_constant
        assert "saturation" in rep.summary()

    def test_sft_saturation_exact(self, sec_s):
        rep = saturation_check(sec_s, samples=12, rng=5)
        assert rep.worst_deviation < 1e-10


class TestHolonomy:
    def test_identity_holonomy(self, cob, atlas32, plan64):
        x0 = plan64.point(0)
        h = holonomy(cob, x0, x0, atlas32)
        grid = np.arange(h.map.lift.size) / h.map.lift.size
        assert _wrapped_gap(h.map.lift, grid) < 1e-12

    def test_one_step_holonomy_is_the_cocycle(self, cat, cob, atlas32, plan64):
        x0 = plan64.point(0)
        h = holonomy(cob, x0, cat.step(x0), atlas32)
        phi = cocycle_product(cob, x0, 1, G=h.map.lift.size)
        assert _wrapped_gap(h.map.lift, phi.lift) < 5e-3

    def test_holonomy_matches_conjugation(self, cat, cob, gen, atlas32, sec,
                                          plan64):
        rng = np.random.default_rng(7)
        x0 = plan64.point(0)
        v0_inv = diffeo_invert(gen.snapshot(cat, x0, 256))
        codes = list(sec.grid_values)
        for _ in range(6):
            p = plan64.point(sec.visit_trace[codes[int(rng.integers(len(codes)))]])
            h = holonomy(cob, x0, p, atlas32)
            ref = diffeo_compose(gen.snapshot(cat, p, 256), v0_inv)
            assert _wrapped_gap(h.map.lift, ref.lift) < 1e-2

    def test_groupoid_composition(self, cob, atlas32, sec, plan64):
        rng = np.random.default_rng(8)
        x0 = plan64.point(0)
        codes = list(sec.grid_values)
        for _ in range(5):
            pa = plan64.point(sec.visit_trace[codes[int(rng.integers(len(codes)))]])
            pb = plan64.point(sec.visit_trace[codes[int(rng.integers(len(codes)))]])
            hab = holonomy(cob, x0, pa, atlas32)
            hbc = holonomy(cob, pa, pb, atlas32)
            hac = holonomy(cob, x0, pb, atlas32)
            comp = diffeo_compose(hbc.map, hab.map)
            assert _wrapped_gap(comp.lift, hac.map.lift) < 1e-2

    def test_derivative_bound_is_finite(self, cob, atlas32, sec, plan64):
        codes = list(sec.grid_values)
        p = plan64.point(sec.visit_trace[codes[500]])
        h = holonomy(cob, plan64.point(0), p, atlas32)
        assert 0.0 < h.derivative_bound < 5.0

    def test_anchor_cell_chart_is_identity(self, atlas32, plan64):
        x0 = plan64.point(0)
        code = plan64.grid.code_of_array(x0.as_array())
        a = np.arange(64) / 64
        assert np.abs(atlas32.chart(int(code)).lift(a) - a).max() < 1e-12


class TestAnchorChartGuards:
    def test_collision(self):
        with pytest.raises(AtlasTooSparse, match="collide"):
            _AnchorChart([0.0, 0.25, 0.25, 0.75])

    def test_crossing(self):
        with pytest.raises(RuntimeError, match="winds"):
            _AnchorChart([0.0, 0.5, 0.25, 0.75])

    def test_sparse_spacing(self):
        with pytest.raises(AtlasTooSparse, match="rebuild with more anchors"):
            _AnchorChart(np.linspace(0.0, 0.1, 8))

    def test_valid_chart_round_trips(self):
        chart = _AnchorChart((np.arange(16) / 16 + 0.03) % 1.0)
        a = np.linspace(0.0, 0.999, 57)
        assert np.abs(chart.inv(chart.lift(a)) - a).max() < 1e-12


class TestTrivialization:
    def test_conjugacy_residual(self, cob, atlas32):
        triv = trivialize(cob, atlas32)
        assert triv.conjugacy_residual < 1e-2
        assert triv.details["cells_checked"] == 64 * 64
        doc = json.loads(triv.to_json())
        assert doc["kind"] == "trivialization"
        assert doc["conjugacy_residual"] == triv.conjugacy_residual

    def test_identity_trivializes_exactly(self, idc, plan64):
        triv = trivialize(idc, build_atlas(idc, plan64, 32))
        assert triv.conjugacy_residual == 0.0

    def test_conjugated_exponent_vanishes(self, cob, atlas32):
        assert abs(conjugated_exponent(cob, atlas32, n_steps=4000)) < 1e-4

    def test_fiber_maps_match_transfer_inverse(self, cob, atlas32, sec,
                                               plan64):
        # trivializing holonomy is the inverse of the solved transfer
        triv = trivialize(cob, atlas32)
        u, _ = solve_diffeo(cob, plan64, G=512, max_period=4)
        rng = np.random.default_rng(7)
        codes = list(sec.grid_values)
        samp = np.arange(256) / 256
        for _ in range(5):
            c = codes[int(rng.integers(len(codes)))]
            ref = diffeo_invert(u.value(int(c)))
            assert _wrapped_gap(triv.fiber_map(c).lift,
                                ref.eval_lift(samp)) < 5e-3

    def test_trivialization_table(self, idc, cat, tmp_path):
        plan16 = make_plan(cat, cat.make_grid(16), two_sided=True)
        triv = trivialize(idc, build_atlas(idc, plan16, 8), G=16)
        path = tmp_path / "triv.csv"
        write_trivialization_table(triv, path)
        lines = path.read_text().splitlines()
        assert "# kind=trivialization" in lines
        rows = [ln for ln in lines if ln and not ln.startswith("#")]
        assert rows[0] == "cell,fiber_index,lift,derivative"
        assert len(rows) - 1 == 16 * 16 * 16


class TestHolonomySmoothness:
    def test_deviation_halves_with_anchor_count(self, cat, plan64, sec):
        gen_big = DiffeoField([RotationFactor(Trig([(0.05, (1, 0), 0.25)])),
                               BumpFactor(Trig([(0.25, (0, 1), 0.0)]))])
        cob_big = SkewSystem(cat, make_coboundary(gen_big, 1.0))
        codes = list(sec.grid_values)
        pa = plan64.point(sec.visit_trace[codes[123]])
        pb = plan64.point(sec.visit_trace[codes[4000 % len(codes)]])
        c1 = []
        for K in (8, 16, 32):
            atl = build_atlas(cob_big, plan64, K)
            rep = holonomy_smoothness_check(cob_big, pa, pb, atl)
            assert rep.deviation_C0 < rep.deviation_C1
            c1.append(rep.deviation_C1)
        for coarse, fine in zip(c1, c1[1:]):
            assert 1.5 < coarse / fine < 2.7

    def test_mild_generator_within_derivative_tolerance(self, cob, atlas32,
                                                        sec, plan64):
        codes = list(sec.grid_values)
        pa = plan64.point(sec.visit_trace[codes[123]])
        pb = plan64.point(sec.visit_trace[codes[4000 % len(codes)]])
        rep = holonomy_smoothness_check(cob, pa, pb, atlas32)
        assert rep.deviation_C0 < 5e-3
        assert rep.deviation_C1 < 2e-2
        assert "anchors" in rep.summary()

class TestDerivativeCocycle:
    def test_mild_generator_full_chain(self, cat, plan64):
        gen_mild = DiffeoField([RotationFactor(Trig([(0.02, (1, 0), 0.0)])),
                                BumpFactor(Trig([(0.0015, (0, 1), 1.0)]))])
        cob_mild = SkewSystem(cat, make_coboundary(gen_mild, 1.0))
        sec_mild = orbit_closure_section(cob_mild, 0.3, plan64)
        las = derivative_cocycle_along_section(cob_mild, sec_mild)
        assert las.poo.verdict
        assert las.poo.worst_defect < 1e-12
        assert las.solve_report.residual_C0 < 1e-3
        assert las.law_defect < 1e-3
        assert las.sup_bound <= las.condition_spread * (1.0 + 1e-9)
        vals = np.array(list(las.values.values()))
        assert np.all(vals > 0.99) and np.all(vals < 1.01)
        assert "fiber derivative" in las.summary()

    def test_identity_derivative_is_one(self, idc, sec_id):
        las = derivative_cocycle_along_section(idc, sec_id, run_solve=False)
        vals = np.array(list(las.values.values()))
        assert np.abs(vals - 1.0).max() == 0.0
        assert las.poo.worst_defect == 0.0
        assert las.sup_bound == 1.0
