"""One runner per experiment; each returns a uniform outcome record.

Runners take (cfg, seeds, outdir, jobs) where seeds is a SeedSequence.
Anything random draws from a generator spawned off that sequence in a
fixed order, so worker count never changes a result.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..base_dynamics import make_grid, make_plan
from ..base_dynamics.torus import TorusPoint, wrap_half
from ..cocycle_core import poo_check
from ..livsic_solver import (IllConditionedTransfer, PooFailure, solve_diffeo,
                             solve_linear, write_transfer_table)
from ..lyapunov_domination import (domination_test, exponent_sweep,
                                   find_contracting_periodic)
from ..sections_holonomy import (AtlasTooSparse, ReturnClaimViolation,
                                 build_atlas, conjugated_exponent,
                                 orbit_closure_section, saturation_check,
                                 trivialize, write_section_table)
from .config import EXPERIMENTS as EXPERIMENT_DESCRIPTIONS
from .config import build_base, build_skew
from .tables import (poo_to_doc, solve_report_to_doc, write_closing_csv,
                     write_domination_csv, write_exponents_csv,
                     write_finder_csv, write_summary_json)

POO_MAX_PERIOD = 6
SWEEP_MAX_PERIOD = 6
SWEEP_RUNS = 20
SWEEP_STEPS = 100_000
ELL_MAX = 20
SOLVE_G = 1024
TORUS_RESOLUTION = 64
CLOSING_RETURNS = 100
CLOSING_SCAN = 200_000
FINDER_STEPS = 1_000_000
ANCHORS_START = 32
ANCHORS_CAP = 128
ANCHOR_FIBER = 0.3


@dataclass
class ExperimentOutcome:
    verdicts: dict
    passed: object
    metrics: dict
    files: list
    long_rows: list = field(default_factory=list)


def _plan(S, two_sided: bool):
    base = S.base
    if base.kind == "cat_map":
        grid = base.make_grid(TORUS_RESOLUTION)
    else:
        grid = make_grid(base, base.theta ** 4)
    return make_plan(base, grid, two_sided=two_sided)


# ---------------------------------------------------------------------------
# single experiments
# ---------------------------------------------------------------------------

def _run_poo(cfg, seeds, outdir, jobs) -> ExperimentOutcome:
    S = build_skew(cfg)
    rep = poo_check(S, POO_MAX_PERIOD, tol=cfg.tolerances["poo"])
    path = outdir / "poo_report.json"
    write_summary_json(path, poo_to_doc(rep))
    rows = [(n, "worst_defect", worst) for n, _, worst in rep.per_period]
    return ExperimentOutcome(
        verdicts={"poo": "pass" if rep.verdict else "fail"},
        passed=bool(rep.verdict),
        metrics={"worst_defect": rep.worst_defect,
                 "worst_period": rep.worst_period,
                 "max_period_checked": rep.max_period_checked},
        files=[path.name], long_rows=rows)


def _lyapunov_core(cfg, rng, outdir):
    S = build_skew(cfg)
    sweep = exponent_sweep(S, max_period=SWEEP_MAX_PERIOD, n_runs=SWEEP_RUNS,
                           n_steps=SWEEP_STEPS, rng=rng)
    path = outdir / "exponents.csv"
    write_exponents_csv(path, sweep)
    lo, hi = sweep.envelope
    tol = cfg.tolerances["envelope"]
    ok = -tol < lo and hi < tol
    rows = []
    for _, period, pe in sweep.periodic:
        if pe.exponents:
            rows.append((period, "periodic_plus", max(pe.exponents)))
            rows.append((period, "periodic_minus", min(pe.exponents)))
    rows.extend((j, "birkhoff", float(v))
                for j, v in enumerate(np.asarray(sweep.birkhoff)))
    metrics = {"envelope_lo": float(lo), "envelope_hi": float(hi),
               "n_periodic_orbits": len(sweep.periodic),
               "n_runs": sweep.n_runs}
    return ok, metrics, [path.name], rows


def _run_lyapunov(cfg, seeds, outdir, jobs) -> ExperimentOutcome:
    ok, metrics, files, rows = _lyapunov_core(
        cfg, np.random.default_rng(seeds), outdir)
    return ExperimentOutcome(
        verdicts={"exponents-zero": "pass" if ok else "fail"},
        passed=ok, metrics=metrics, files=files, long_rows=rows)


def _domination_core(cfg, outdir):
    S = build_skew(cfg)
    rep = domination_test(S, ell_max=ELL_MAX)
    hyp = S.base.hyp
    margins = []
    if rep.ell_u is not None:
        margins.append(rep.beta * rep.ell_u * np.log(hyp.nu_u)
                       - np.log(rep.factor) - rep.sup_log[rep.ell_u - 1])
    if rep.ell_s is not None:
        margins.append(rep.inf_log[rep.ell_s - 1]
                       - rep.beta * rep.ell_s * np.log(hyp.nu_s)
                       - np.log(rep.factor))
    if rep.satisfied:
        ell = max(rep.ell_u, rep.ell_s)
        side = ("both" if rep.ell_u == rep.ell_s
                else ("u" if rep.ell_u > rep.ell_s else "s"))
    else:
        ell, side = None, "none"
    margin = float(min(margins)) if margins else None
    path = outdir / "domination.csv"
    write_domination_csv(path, {"beta": rep.beta, "ell": ell,
                                "margin": margin, "side": side})
    rows = [(1 + i, "sup_log", float(v)) for i, v in enumerate(rep.sup_log)]
    rows += [(1 + i, "inf_log", float(v)) for i, v in enumerate(rep.inf_log)]
    metrics = {"beta": rep.beta, "ell_u": rep.ell_u, "ell_s": rep.ell_s,
               "margin": margin, "n_samples": rep.n_samples}
    verdict = "pass" if rep.satisfied else f"fail at beta={rep.beta:g}"
    return rep.satisfied, verdict, metrics, [path.name], rows


def _run_domination(cfg, seeds, outdir, jobs) -> ExperimentOutcome:
    ok, verdict, metrics, files, rows = _domination_core(cfg, outdir)
    return ExperimentOutcome(verdicts={"dominated": verdict}, passed=ok,
                             metrics=metrics, files=files, long_rows=rows)


def _solve_core(cfg, outdir):
    S = build_skew(cfg)
    plan = _plan(S, two_sided=False)
    files, metrics = [], {}
    try:
        if S.fiber == "circle":
            u, rep = solve_diffeo(S, plan, G=SOLVE_G,
                                  max_period=POO_MAX_PERIOD,
                                  poo_tol=cfg.tolerances["poo"],
                                  tol=cfg.tolerances["residual"])
        else:
            u, rep = solve_linear(S.base, S.cocycle, plan,
                                  max_period=POO_MAX_PERIOD,
                                  poo_tol=cfg.tolerances["poo"],
                                  tol=cfg.tolerances["residual"])
    except PooFailure as e:
        metrics = {"poo_defect": e.defect, "poo_period": e.period}
        return False, "poo-failed", metrics, files, []
    except IllConditionedTransfer as e:
        return False, "ill-conditioned", {"detail": str(e)}, files, []
    tpath = outdir / "transfer.csv"
    write_transfer_table(tpath, u, rep)
    rpath = outdir / "solve_report.json"
    write_summary_json(rpath, solve_report_to_doc(rep))
    files = [tpath.name, rpath.name]
    metrics = {"residual_C0": rep.residual_C0, "residual_C1": rep.residual_C1,
               "holder_ratio": rep.holder_ratio, "n_cells": rep.n_cells,
               "orbit_length_used": rep.orbit_length_used}
    rows = [(k, f"iterated_{series}", float(v))
            for series, curve in rep.iterated.items()
            if isinstance(curve, (list, tuple, np.ndarray))
            for k, v in enumerate(np.asarray(curve).ravel())]
    verdict = "pass" if rep.passed else "residual-too-large"
    return bool(rep.passed), verdict, metrics, files, rows


def _run_solve(cfg, seeds, outdir, jobs) -> ExperimentOutcome:
    ok, verdict, metrics, files, rows = _solve_core(cfg, outdir)
    return ExperimentOutcome(verdicts={"solve": verdict}, passed=ok,
                             metrics=metrics, files=files, long_rows=rows)


def _near_returns_torus(base):
    pos = base.orbit_array(np.array(base.DEFAULT_SEED), CLOSING_SCAN)
    delta1 = base.hyp.delta1
    found = []
    for n in range(1, 13):
        d = np.linalg.norm(wrap_half(pos[n:] - pos[:-n]), axis=1)
        for k in np.nonzero(d < delta1)[0]:
            found.append((float(d[k]), int(k), n))
    found.sort()
    return pos, found[:CLOSING_RETURNS]


def _near_returns_sft(base):
    plan = make_plan(base, make_grid(base, base.theta ** 6))
    delta1 = base.hyp.delta1
    found = []
    for n in range(1, 9):
        for k in range(plan.N - n):
            d = base.distance(plan.point(k), plan.point(k + n))
            if d < delta1:
                found.append((float(d), int(k), n))
    found.sort()
    return plan, found[:CLOSING_RETURNS]


def _run_closing(cfg, seeds, outdir, jobs) -> ExperimentOutcome:
    base = build_base(cfg)
    if base.kind == "cat_map":
        pos, cands = _near_returns_torus(base)
        def close(k, n):
            return base.anosov_closing(TorusPoint.from_array(pos[k]), n,
                                       positions=pos[k:k + n + 1])
    else:
        plan, cands = _near_returns_sft(base)
        def close(k, n):
            return base.anosov_closing(plan.point(k), n)
    rows, long_rows = [], []
    worst_ratio, all_ok = 0.0, True
    for i, (d0, k, n) in enumerate(cands):
        res = close(k, n)
        idx = np.arange(n + 1)
        scale = res.c_used * res.return_distance
        envs = np.stack([
            scale * np.exp(-res.lam_used * np.minimum(idx, n - idx)),
            scale * np.exp(-res.lam_used * idx),
            scale * np.exp(-res.lam_used * (n - idx)),
        ], axis=1)
        ratio = float((res.bound_trace / envs).max())
        worst_ratio = max(worst_ratio, ratio)
        all_ok = all_ok and res.bounds_ok
        rows.append({"index": i, "period": n,
                     "return_distance": res.return_distance,
                     "c_used": res.c_used, "lam_used": res.lam_used,
                     "worst_ratio": ratio, "bounds_ok": res.bounds_ok})
        long_rows.append((res.return_distance, "worst_ratio", ratio))
    path = outdir / "closing.csv"
    write_closing_csv(path, rows)
    ok = all_ok and len(rows) > 0
    return ExperimentOutcome(
        verdicts={"closing": "pass" if ok else "fail"},
        passed=ok,
        metrics={"n_returns": len(rows), "worst_ratio": worst_ratio,
                 "c_used": rows[0]["c_used"] if rows else None,
                 "lam_used": rows[0]["lam_used"] if rows else None},
        files=[path.name], long_rows=long_rows)


def _build_trivialization(S, plan):
    anchors = ANCHORS_START
    while True:
        try:
            atlas = build_atlas(S, plan, anchors)
            return atlas, trivialize(S, atlas), anchors
        except AtlasTooSparse:
            # steep sections need a denser anchor family; retry bounded
            if anchors >= ANCHORS_CAP:
                raise
            anchors *= 2


def _sections_core(cfg, rng, outdir):
    S = build_skew(cfg)
    plan = _plan(S, two_sided=True)
    try:
        sec = orbit_closure_section(S, ANCHOR_FIBER, plan,
                                    violation_tol=cfg.tolerances["violation"])
    except ReturnClaimViolation as e:
        metrics = {"violation_iterate": e.iterate,
                   "violation_base_distance": e.base_distance,
                   "violation_fiber_displacement": e.fiber_displacement}
        return False, {"section": "return-claim-violated"}, metrics, [], []
    sat = saturation_check(sec, samples=16, rng=rng)
    spath = outdir / "section.csv"
    write_section_table(sec, spath)
    atlas, triv, anchors = _build_trivialization(S, plan)
    ce = conjugated_exponent(S, atlas)
    tpath = outdir / "trivialization.json"
    with open(tpath, "w") as fh:
        fh.write(triv.to_json() + "\n")
    ok = triv.conjugacy_residual <= cfg.tolerances["conjugacy"]
    verdicts = {"section": "coboundary-consistent",
                "trivialization": "pass" if ok else "fail"}
    metrics = {"invariance_defect": sec.invariance_defect,
               "saturation_worst": sat.worst_deviation,
               "section_lipschitz": sat.section_lipschitz,
               "conjugacy_residual": triv.conjugacy_residual,
               "conjugated_exponent": float(ce),
               "anchors_used": anchors}
    rows = [(delta, "eps_obs", eps) for delta, eps, _ in sec.return_pairs]
    rows += [(delta, "return_count", c) for delta, _, c in sec.return_pairs]
    return ok, verdicts, metrics, [spath.name, tpath.name], rows


def _run_sections(cfg, seeds, outdir, jobs) -> ExperimentOutcome:
    ok, verdicts, metrics, files, rows = _sections_core(
        cfg, np.random.default_rng(seeds), outdir)
    return ExperimentOutcome(verdicts=verdicts, passed=ok, metrics=metrics,
                             files=files, long_rows=rows)


def _run_finder(cfg, seeds, outdir, jobs) -> ExperimentOutcome:
    S = build_skew(cfg)
    cp = find_contracting_periodic(S, n_steps=FINDER_STEPS,
                                   rng=np.random.default_rng(seeds))
    path = outdir / "finder.csv"
    write_finder_csv(path, cp)
    verdict = "found" if cp.found else "not-found"
    metrics = {"found": cp.found, "period": cp.period,
               "multiplier": cp.multiplier, "exponent": cp.exponent,
               "n_scanned": cp.n_scanned, "n_candidates": cp.n_candidates}
    return ExperimentOutcome(verdicts={"contracting-point": verdict},
                             passed=None, metrics=metrics,
                             files=[path.name], long_rows=[])


# ---------------------------------------------------------------------------
# the three-verdict equivalence battery
# ---------------------------------------------------------------------------

def _branch_coboundary(cfg, rng, outdir):
    """Return-claim scan first; when consistent, solve for the residuals."""
    S = build_skew(cfg)
    if S.fiber == "linear":
        ok, verdict, metrics, files, rows = _solve_core(cfg, outdir)
        label = "pass" if ok else verdict
        return ok, label, metrics, files, rows
    plan = _plan(S, two_sided=True)
    try:
        orbit_closure_section(S, ANCHOR_FIBER, plan,
                              violation_tol=cfg.tolerances["violation"])
    except ReturnClaimViolation as e:
        metrics = {"violation_iterate": e.iterate,
                   "violation_base_distance": e.base_distance,
                   "violation_fiber_displacement": e.fiber_displacement}
        return False, "return-claim-violated", metrics, [], []
    try:
        u, rep = solve_diffeo(S, plan, G=SOLVE_G, max_period=POO_MAX_PERIOD,
                              poo_tol=cfg.tolerances["poo"],
                              tol=cfg.tolerances["residual"])
    except PooFailure as e:
        return False, "poo-failed", {"poo_defect": e.defect}, [], []
    tpath = outdir / "transfer.csv"
    write_transfer_table(tpath, u, rep)
    metrics = {"residual_C0": rep.residual_C0,
               "residual_C1": rep.residual_C1,
               "holder_ratio": rep.holder_ratio}
    label = "pass" if rep.passed else "residual-too-large"
    return bool(rep.passed), label, metrics, [tpath.name], []


def _run_equivalence(cfg, seeds, outdir, jobs) -> ExperimentOutcome:
    children = seeds.spawn(3)

    def exponents_task():
        ok, metrics, files, rows = _lyapunov_core(
            cfg, np.random.default_rng(children[0]), outdir)
        return ok, ("pass" if ok else "fail"), metrics, files, rows

    def domination_task():
        ok, verdict, metrics, files, rows = _domination_core(cfg, outdir)
        return ok, verdict, metrics, files, rows

    def coboundary_task():
        return _branch_coboundary(cfg, np.random.default_rng(children[2]),
                                  outdir)

    tasks = [("exponents-zero", exponents_task),
             ("dominated", domination_task),
             ("coboundary", coboundary_task)]
    with ThreadPoolExecutor(max_workers=max(1, min(jobs, len(tasks)))) as pool:
        futures = [(name, pool.submit(fn)) for name, fn in tasks]
        results = [(name, f.result()) for name, f in futures]

    verdicts, metrics, files, rows = {}, {}, [], []
    all_ok = True
    for name, (ok, label, m, fs, rs) in results:
        verdicts[name] = label
        all_ok = all_ok and ok
        metrics.update(m)
        files.extend(fs)
        rows.extend(rs)
    return ExperimentOutcome(verdicts=verdicts, passed=all_ok,
                             metrics=metrics, files=files, long_rows=rows)


RUNNERS = {
    "poo": _run_poo,
    "lyapunov": _run_lyapunov,
    "domination": _run_domination,
    "solve": _run_solve,
    "closing_demo": _run_closing,
    "sections": _run_sections,
    "contracting_search": _run_finder,
    "equivalence_suite": _run_equivalence,
}

assert set(RUNNERS) == set(EXPERIMENT_DESCRIPTIONS)
