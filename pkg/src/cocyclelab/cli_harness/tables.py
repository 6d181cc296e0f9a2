"""CSV and JSON emitters with fixed, documented headers."""

import json

import numpy as np


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_long_csv(path, rows) -> None:
    """Plot-ready long format: one (x, series, value) triple per row."""
    with open(path, "w") as fh:
        fh.write("x,series,value\n")
        for x, series, value in rows:
            fh.write(f"{_fmt(x)},{series},{_fmt(value)}\n")


def write_summary_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def json_safe(value):
    """Recursively coerce numpy scalars/arrays into plain JSON scalars."""
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, np.ndarray):
        return [json_safe(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return repr(value)


def write_exponents_csv(path, sweep) -> None:
    """Sweep rows: periodic orbits first, then the Birkhoff runs."""
    with open(path, "w") as fh:
        fh.write("orbit_id,type,lambda_plus,lambda_minus,length,multiplier\n")
        for i, (_, period, pe) in enumerate(sweep.periodic):
            if pe.exponents:
                lp, lm = max(pe.exponents), min(pe.exponents)
            else:
                lp = lm = 0.0
            mult = None
            if pe.fiber_points:
                mult = max((m for _, m in pe.fiber_points),
                           key=lambda m: abs(np.log(abs(m))))
            fh.write(f"p{period}.{i},periodic,{_fmt(float(lp))},"
                     f"{_fmt(float(lm))},{period},{_fmt(mult)}\n")
        for j, v in enumerate(np.asarray(sweep.birkhoff)):
            fh.write(f"run{j},generic,{_fmt(float(v))},{_fmt(float(v))},"
                     f"{sweep.n_steps},\n")


def write_domination_csv(path, row: dict) -> None:
    with open(path, "w") as fh:
        fh.write("beta,ell,margin,side\n")
        fh.write(f"{_fmt(row['beta'])},{_fmt(row['ell'])},"
                 f"{_fmt(row['margin'])},{row['side']}\n")


def write_closing_csv(path, rows) -> None:
    with open(path, "w") as fh:
        fh.write("index,period,return_distance,c_used,lam_used,"
                 "worst_ratio,bounds_ok\n")
        for r in rows:
            fh.write(",".join(_fmt(r[k]) for k in
                              ("index", "period", "return_distance", "c_used",
                               "lam_used", "worst_ratio", "bounds_ok")) + "\n")


def write_finder_csv(path, cp) -> None:
    with open(path, "w") as fh:
        fh.write("found,period,fiber_point,multiplier,exponent,"
                 "n_scanned,n_candidates,best_multiplier_seen\n")
        fh.write(",".join(_fmt(v) for v in (
            cp.found, cp.period, cp.fiber_point, cp.multiplier, cp.exponent,
            cp.n_scanned, cp.n_candidates, cp.best_multiplier_seen)) + "\n")


def poo_to_doc(report) -> dict:
    return {
        "kind": "poo_report",
        "family_id": report.family_id,
        "fiber": report.fiber,
        "max_period_checked": report.max_period_checked,
        "tol": report.tol,
        "worst_defect": report.worst_defect,
        "worst_period": report.worst_period,
        "worst_witness": repr(report.worst_witness),
        "per_period": [[n, count, worst]
                       for n, count, worst in report.per_period],
        "verdict": bool(report.verdict),
    }


def solve_report_to_doc(report) -> dict:
    return {
        "kind": "solve_report",
        "solve_kind": report.kind,
        "residual_C0": report.residual_C0,
        "residual_C1": report.residual_C1,
        "orbit_length_used": report.orbit_length_used,
        "n_cells": report.n_cells,
        "tolerance": report.tolerance,
        "holder_ratio": report.holder_ratio,
        "worst_cell": report.worst_cell,
        "iterated": json_safe(report.iterated),
        "passed": bool(report.passed),
    }
