"""Scenario configs, the experiment runners, and the command-line surface.

The heavy scenario runs are shared module fixtures; everything else is
cheap parsing and artifact inspection.
"""

import json
from copy import deepcopy

import numpy as np
import pytest

from cocyclelab.cli_harness import (EXPERIMENTS, TOLERANCE_DEFAULTS,
                                    ConfigError, build_base, build_skew,
                                    config_to_json, emit_config, main,
                                    parse_config, run_scenario, scenario_hash,
                                    with_overrides)

GENERATOR = [
    {"kind": "rotation", "angle": {"kind": "trig", "terms": [[0.02, [1, 0], 0.0]]}},
    {"kind": "bump", "amplitude": {"kind": "trig", "terms": [[0.03, [0, 1], 1.0]]}},
]


def cob_doc(experiment="poo", **extra):
    doc = {
        "base": {"kind": "cat_map"},
        "cocycle": {"family_id": "coboundary", "alpha": 1.0,
                    "parameters": {"generator": deepcopy(GENERATOR)}},
        "experiment": experiment,
        "seed": 7,
        "output_dir": "out",
    }
    doc.update(extra)
    return doc


def identity_doc(experiment="poo", **extra):
    doc = {"base": {"kind": "cat_map"},
           "cocycle": {"family_id": "identity"},
           "experiment": experiment, "seed": 3, "output_dir": "out"}
    doc.update(extra)
    return doc


def bump_doc(experiment="poo", a=0.5, alpha=1.0 / 3.0, **extra):
    doc = {"base": {"kind": "cat_map"},
           "cocycle": {"family_id": "arnold_bump", "alpha": alpha,
                       "parameters": {"a": a}},
           "experiment": experiment, "seed": 7, "output_dir": "out"}
    doc.update(extra)
    return doc


def errors_of(doc):
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    return info.value.errors


class TestParseConfig:
    def test_defaults_filled(self):
        cfg = parse_config({"base": {"kind": "cat_map"},
                            "cocycle": {"family_id": "identity"},
                            "experiment": "poo"})
        assert cfg.base == {"kind": "cat_map", "matrix": [[2, 1], [1, 1]]}
        assert cfg.cocycle["alpha"] == 1.0
        assert cfg.cocycle["parameters"] == {}
        assert cfg.tolerances == TOLERANCE_DEFAULTS
        assert cfg.seed == 0
        assert cfg.output_dir == "out"

    def test_sft_defaults(self):
        cfg = parse_config({"base": {"kind": "sft"},
                            "cocycle": {"family_id": "identity"},
                            "experiment": "poo"})
        assert cfg.base == {"kind": "sft", "transition": [[1, 1], [1, 1]],
                            "theta": 0.5}

    def test_parse_emit_parse_is_identity(self):
        cfg = parse_config(cob_doc())
        assert parse_config(emit_config(cfg)) == cfg

    def test_json_round_trip(self):
        cfg = parse_config(cob_doc("lyapunov"))
        assert parse_config(config_to_json(cfg)) == cfg

    def test_accepts_json_text(self):
        cfg = parse_config(json.dumps(identity_doc()))
        assert cfg.experiment == "poo"

    def test_tolerance_overrides_merge(self):
        cfg = parse_config(cob_doc(tolerances={"poo": 1e-6}))
        assert cfg.tolerances["poo"] == 1e-6
        assert cfg.tolerances["residual"] == TOLERANCE_DEFAULTS["residual"]

    def test_hash_ignores_output_dir(self):
        a = parse_config(cob_doc(output_dir="here"))
        b = parse_config(cob_doc(output_dir="there"))
        assert scenario_hash(a) == scenario_hash(b)

    def test_hash_tracks_seed(self):
        a = parse_config(cob_doc(seed=1))
        b = parse_config(cob_doc(seed=2))
        assert scenario_hash(a) != scenario_hash(b)

    def test_hash_stable_across_emit(self):
        cfg = parse_config(cob_doc())
        again = parse_config(emit_config(cfg))
        assert scenario_hash(cfg) == scenario_hash(again)

    def test_with_overrides(self):
        cfg = parse_config(cob_doc())
        cfg2 = with_overrides(cfg, seed=99, output_dir="elsewhere")
        assert (cfg2.seed, cfg2.output_dir) == (99, "elsewhere")
        assert cfg.seed == 7

    def test_experiment_catalog(self):
        assert set(EXPERIMENTS) == {
            "poo", "lyapunov", "domination", "solve", "closing_demo",
            "sections", "contracting_search", "equivalence_suite"}


class TestValidationErrors:
    def test_parabolic_matrix_message(self):
        errs = errors_of(cob_doc(base={"kind": "cat_map",
                                       "matrix": [[1, 1], [0, 1]]}))
        assert any("not hyperbolic: |trace| <= 2" in r for _, r in errs)

    def test_determinant_message(self):
        errs = errors_of(cob_doc(base={"kind": "cat_map",
                                       "matrix": [[2, 0], [0, 2]]}))
        assert any("|det| must be 1" in r for _, r in errs)

    def test_reducible_sft_rejected(self):
        errs = errors_of(identity_doc(base={"kind": "sft",
                                            "transition": [[1, 0], [0, 1]],
                                            "theta": 0.5}))
        assert any(p == "base.transition" for p, _ in errs)

    def test_all_errors_collected_at_once(self):
        doc = cob_doc(base={"kind": "cat_map", "matrix": [[1, 1], [0, 1]]},
                      tolerances={"nope": 1.0}, zzz=1)
        paths = {p for p, _ in errors_of(doc)}
        assert {"base.matrix", "tolerances.nope", "config"} <= paths

    def test_unknown_experiment(self):
        errs = errors_of(cob_doc("warp_drive"))
        assert any(p == "experiment" for p, _ in errs)

    def test_unknown_family(self):
        doc = identity_doc()
        doc["cocycle"]["family_id"] = "moebius"
        assert any("unknown family" in r for _, r in errors_of(doc))

    def test_unknown_tolerance_name(self):
        errs = errors_of(cob_doc(tolerances={"fudge": 0.1}))
        assert any("unknown tolerance" in r for _, r in errs)

    def test_nonpositive_tolerance(self):
        errs = errors_of(cob_doc(tolerances={"poo": 0.0}))
        assert any("positive" in r for _, r in errs)

    def test_bump_amplitude_bound(self):
        errs = errors_of(bump_doc(a=1.5))
        assert any("needs |a| < 1" in r for _, r in errs)

    def test_cylinder_needs_sft_base(self):
        doc = cob_doc()
        doc["cocycle"]["parameters"]["generator"] = [
            {"kind": "rotation",
             "angle": {"kind": "cylinder", "radius": 0, "default": 0.1,
                       "table": {}}}]
        assert any("cylinder functions need an sft base" in r
                   for _, r in errors_of(doc))

    def test_circle_only_experiment(self):
        doc = cob_doc("sections")
        doc["cocycle"] = {"family_id": "linear_coboundary",
                          "parameters": {"generator": [
                              {"kind": "fixed_matrix",
                               "matrix": [[1.0, 0.0], [0.0, 1.0]]}]}}
        assert any("circle-fiber" in r for _, r in errors_of(doc))

    def test_negative_seed(self):
        assert any(p == "seed" for p, _ in errors_of(cob_doc(seed=-1)))

    def test_invalid_json_text(self):
        assert any("invalid JSON" in r for _, r in errors_of("{nope"))


class TestBuilders:
    def test_build_base_kinds(self):
        assert build_base(parse_config(cob_doc())).kind == "cat_map"
        sft = build_base(parse_config(identity_doc(
            base={"kind": "sft", "theta": 0.5})))
        assert sft.kind == "sft"

    def test_build_skew_families(self):
        S = build_skew(parse_config(bump_doc()))
        assert S.fiber == "circle"
        assert S.cocycle.family_id == "arnold_bump(a=0.5)"
        lin = parse_config(cob_doc("solve", cocycle={
            "family_id": "linear_coboundary",
            "parameters": {"generator": [
                {"kind": "rotation_matrix",
                 "angle": {"kind": "trig", "terms": [[0.02, [1, 0], 0.0]]}}]}}))
        assert build_skew(lin).fiber == "linear"


# ---------------------------------------------------------------------------
# scenario runs (shared; each fixture runs its experiment once)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def outroot(tmp_path_factory):
    return tmp_path_factory.mktemp("runs")


@pytest.fixture(scope="module")
def poo_run(outroot):
    cfg = parse_config(cob_doc(output_dir=str(outroot / "poo")))
    return run_scenario(cfg)


@pytest.fixture(scope="module")
def dom_run(outroot):
    cfg = parse_config(identity_doc("domination",
                                    output_dir=str(outroot / "dom")))
    return run_scenario(cfg)


@pytest.fixture(scope="module")
def closing_run(outroot):
    cfg = parse_config(identity_doc("closing_demo",
                                    output_dir=str(outroot / "closing")))
    return run_scenario(cfg)


@pytest.fixture(scope="module")
def finder_run(outroot):
    cfg = parse_config(bump_doc("contracting_search",
                                output_dir=str(outroot / "finder")))
    return run_scenario(cfg)


@pytest.fixture(scope="module")
def id_suite(outroot):
    cfg = parse_config(identity_doc("equivalence_suite",
                                    output_dir=str(outroot / "suite_id")))
    return run_scenario(cfg, jobs=1)


@pytest.fixture(scope="module")
def id_suite_j8(outroot):
    cfg = parse_config(identity_doc("equivalence_suite",
                                    output_dir=str(outroot / "suite_id_j8")))
    return run_scenario(cfg, jobs=8)


@pytest.fixture(scope="module")
def bad_suite(outroot):
    cfg = parse_config(bump_doc("equivalence_suite",
                                output_dir=str(outroot / "suite_bad")))
    return run_scenario(cfg)


def _doc_without_run_noise(path):
    doc = json.loads(path.read_text())
    doc.pop("wall_clock_s")
    doc["config"].pop("output_dir")
    return doc


class TestArtifacts:
    def test_poo_passes(self, poo_run):
        assert poo_run.passed is True
        assert poo_run.verdicts == {"poo": "pass"}
        assert poo_run.metrics["worst_defect"] < 1e-4

    def test_summary_manifest(self, poo_run, outroot):
        doc = json.loads((outroot / "poo" / "summary.json").read_text())
        assert doc["schema"] == "cocyclelab.run.v1"
        assert doc["scenario_hash"] == poo_run.scenario_hash
        for name in doc["files"]:
            assert (outroot / "poo" / name).exists()
        assert "long.csv" in doc["files"]

    def test_long_csv_header(self, poo_run, outroot):
        lines = (outroot / "poo" / "long.csv").read_text().splitlines()
        assert lines[0] == "x,series,value"
        assert len(lines) > 1

    def test_identity_domination_at_ell_one(self, dom_run):
        assert dom_run.passed is True
        assert dom_run.metrics["ell_u"] == 1
        assert dom_run.metrics["ell_s"] == 1
        # constant derivative 1 against nu_u/2 on both sides
        want = np.log((3 + np.sqrt(5)) / 4)
        assert dom_run.metrics["margin"] == pytest.approx(want, abs=1e-12)

    def test_domination_csv_shape(self, dom_run, outroot):
        lines = (outroot / "dom" / "domination.csv").read_text().splitlines()
        assert lines[0] == "beta,ell,margin,side"
        assert len(lines) == 2
        assert lines[1].startswith("1.0,1,")

    def test_closing_demo(self, closing_run, outroot):
        assert closing_run.passed is True
        assert closing_run.metrics["n_returns"] == 100
        assert closing_run.metrics["worst_ratio"] <= 1.0
        lines = (outroot / "closing" / "closing.csv").read_text().splitlines()
        assert lines[0] == ("index,period,return_distance,c_used,lam_used,"
                            "worst_ratio,bounds_ok")
        assert len(lines) == 101
        assert all(row.endswith(",1") for row in lines[1:])

    def test_finder_finds_the_bump_sink(self, finder_run, outroot):
        assert finder_run.passed is None
        assert finder_run.verdicts == {"contracting-point": "found"}
        assert finder_run.metrics["period"] == 1
        assert finder_run.metrics["multiplier"] == pytest.approx(0.5, abs=1e-9)
        lines = (outroot / "finder" / "finder.csv").read_text().splitlines()
        assert lines[0] == ("found,period,fiber_point,multiplier,exponent,"
                            "n_scanned,n_candidates,best_multiplier_seen")

    def test_finder_long_csv_is_header_only(self, finder_run, outroot):
        text = (outroot / "finder" / "long.csv").read_text()
        assert text == "x,series,value\n"


class TestSuiteVerdicts:
    def test_identity_battery_all_pass(self, id_suite):
        assert id_suite.passed is True
        assert id_suite.verdicts == {"exponents-zero": "pass",
                                     "dominated": "pass",
                                     "coboundary": "pass"}
        assert id_suite.metrics["envelope_lo"] == 0.0
        assert id_suite.metrics["envelope_hi"] == 0.0

    def test_identity_battery_artifacts(self, id_suite, outroot):
        d = outroot / "suite_id"
        header = (d / "exponents.csv").read_text().splitlines()[0]
        assert header == "orbit_id,type,lambda_plus,lambda_minus,length,multiplier"
        assert (d / "transfer.csv").exists()
        assert (d / "domination.csv").exists()

    def test_negative_control_chain(self, bad_suite):
        assert bad_suite.passed is False
        assert bad_suite.verdicts == {"exponents-zero": "fail",
                                      "dominated": "fail at beta=0.333333",
                                      "coboundary": "return-claim-violated"}
        assert bad_suite.metrics["envelope_lo"] == pytest.approx(
            np.log(0.5), abs=5e-2)
        assert bad_suite.metrics["envelope_hi"] == pytest.approx(
            np.log(1.5), abs=5e-2)
        assert bad_suite.metrics["violation_fiber_displacement"] > 0.05

    def test_jobs_do_not_change_scalars(self, id_suite, id_suite_j8, outroot):
        a = _doc_without_run_noise(outroot / "suite_id" / "summary.json")
        b = _doc_without_run_noise(outroot / "suite_id_j8" / "summary.json")
        assert a == b
        long_a = (outroot / "suite_id" / "long.csv").read_bytes()
        long_b = (outroot / "suite_id_j8" / "long.csv").read_bytes()
        assert long_a == long_b

    def test_rerun_reproduces_bit_for_bit(self, poo_run, outroot):
        cfg = parse_config(cob_doc(output_dir=str(outroot / "poo_again")))
        run_scenario(cfg)
        a = _doc_without_run_noise(outroot / "poo" / "summary.json")
        b = _doc_without_run_noise(outroot / "poo_again" / "summary.json")
        assert a == b


class TestCliExitCodes:
    @pytest.fixture(scope="class")
    def cfg_dir(self, tmp_path_factory):
        d = tmp_path_factory.mktemp("cli")
        (d / "good.json").write_text(json.dumps(
            cob_doc(output_dir=str(d / "out_good"))))
        (d / "fails.json").write_text(json.dumps(
            bump_doc("poo", output_dir=str(d / "out_fails"))))
        (d / "invalid.json").write_text(json.dumps(
            cob_doc(base={"kind": "cat_map", "matrix": [[1, 1], [0, 1]]})))
        (d / "garbled.json").write_text("{")
        return d

    def test_run_pass_exits_zero(self, cfg_dir, capsys):
        rc = main(["run", str(cfg_dir / "good.json")])
        out = capsys.readouterr().out
        assert rc == 0
        assert "poo: pass" in out
        assert "summary.json" in out

    def test_run_scientific_failure_exits_two(self, cfg_dir, capsys):
        rc = main(["run", str(cfg_dir / "fails.json")])
        assert rc == 2
        assert "poo: fail" in capsys.readouterr().out

    def test_run_invalid_config_exits_one(self, cfg_dir, capsys):
        rc = main(["run", str(cfg_dir / "invalid.json")])
        assert rc == 1
        err = capsys.readouterr().err
        assert "invalid configuration" in err
        assert "not hyperbolic" in err

    def test_run_missing_file_exits_one(self, cfg_dir, capsys):
        rc = main(["run", str(cfg_dir / "nowhere.json")])
        assert rc == 1
        assert "cannot read" in capsys.readouterr().err

    def test_garbled_json_exits_one(self, cfg_dir, capsys):
        rc = main(["validate", str(cfg_dir / "garbled.json")])
        assert rc == 1
        assert "invalid JSON" in capsys.readouterr().err

    def test_seed_override_lands_in_manifest(self, cfg_dir, capsys):
        rc = main(["run", str(cfg_dir / "good.json"), "--seed", "21",
                   "--out", str(cfg_dir / "out_seeded")])
        assert rc == 0
        capsys.readouterr()
        doc = json.loads((cfg_dir / "out_seeded" / "summary.json").read_text())
        assert doc["seed"] == 21
        assert doc["config"]["seed"] == 21

    def test_validate_prints_canonical_form(self, cfg_dir, capsys):
        rc = main(["validate", str(cfg_dir / "good.json")])
        out = capsys.readouterr().out
        assert rc == 0
        assert out.startswith("ok: poo scenario")
        doc = json.loads(out.split("\n", 1)[1])
        assert doc["base"]["matrix"] == [[2, 1], [1, 1]]

    def test_list_experiments(self, capsys):
        rc = main(["list-experiments"])
        out = capsys.readouterr().out
        assert rc == 0
        for name in EXPERIMENTS:
            assert name in out
