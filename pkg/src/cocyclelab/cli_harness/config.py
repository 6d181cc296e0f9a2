"""Scenario configuration: schema validation, canonicalization, builders.

A scenario document is JSON-shaped: nested maps, lists, and scalars.  The
parser is strict in both directions: unknown keys are rejected at every
level, and a parsed config re-emits to a canonical document that parses
back to an equal config (defaults filled in, nothing lost).
"""

import hashlib
import json
from dataclasses import dataclass, replace

from ..base_dynamics import CatMapSystem, SftSystem
from ..cocycle_core import (BumpFactor, Const, DiffeoField, FamilyCocycle,
                            LinearCocycle, LinearCoboundary, MatrixField,
                            SkewSystem, make_coboundary)

EXPERIMENTS = {
    "poo": "periodic-orbit obstruction scan up to the default period bound",
    "lyapunov": "fibered exponent envelope from periodic data and Birkhoff runs",
    "domination": "block-length domination certificate at beta = alpha",
    "solve": "transfer-function solve with residual audit (circle or linear)",
    "closing_demo": "near-returns closed into periodic orbits, trace bounds checked",
    "sections": "orbit-closure section, saturation, holonomy trivialization",
    "contracting_search": "scan a long orbit for a contracting periodic fiber point",
    "equivalence_suite": "three-verdict battery: exponents-zero, dominated, coboundary",
}

FAMILIES = ("identity", "arnold_bump", "coboundary", "direct",
            "linear_direct", "linear_coboundary")

CIRCLE_FAMILIES = ("identity", "arnold_bump", "coboundary", "direct")

# Documented defaults; always echoed into the output manifest.
TOLERANCE_DEFAULTS = {
    "poo": 1e-4,
    "residual": 5e-3,
    "envelope": 1e-2,
    "violation": 0.05,
    "conjugacy": 1e-2,
}

_CIRCLE_ONLY_EXPERIMENTS = ("sections", "contracting_search")


class ConfigError(ValueError):
    """Validation failure; `errors` lists (path, reason) pairs."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(f"{p}: {r}" for p, r in self.errors))


@dataclass(frozen=True)
class ScenarioConfig:
    base: dict
    cocycle: dict
    experiment: str
    tolerances: dict
    seed: int
    output_dir: str


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_keys(doc, allowed, path, errors, required=()):
    for k in doc:
        if k not in allowed:
            errors.append((path, f"unknown key {k!r}"))
    for k in required:
        if k not in doc:
            errors.append((path, f"missing required key {k!r}"))


def _validate_base(doc, errors):
    if not isinstance(doc, dict):
        errors.append(("base", "must be a map"))
        return
    kind = doc.get("kind")
    if kind == "cat_map":
        _check_keys(doc, ("kind", "matrix"), "base", errors)
        m = doc.get("matrix", [[2, 1], [1, 1]])
        if (not isinstance(m, list) or len(m) != 2
                or any(not isinstance(r, list) or len(r) != 2 for r in m)
                or any(not isinstance(v, int) for r in m for v in r)):
            errors.append(("base.matrix", "must be a 2x2 integer matrix"))
            return
        det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        if abs(det) != 1:
            errors.append(("base.matrix", f"|det| must be 1, got {det}"))
        tr = m[0][0] + m[1][1]
        if abs(tr) <= 2:
            errors.append(("base.matrix",
                           f"not hyperbolic: |trace| <= 2 (trace {tr})"))
    elif kind == "sft":
        _check_keys(doc, ("kind", "transition", "theta"), "base", errors)
        theta = doc.get("theta", 0.5)
        if not _is_num(theta) or not 0.0 < theta < 1.0:
            errors.append(("base.theta", f"must lie in (0,1), got {theta!r}"))
        t = doc.get("transition", [[1, 1], [1, 1]])
        try:
            SftSystem(t, theta if _is_num(theta) and 0 < theta < 1 else 0.5)
        except ValueError as e:
            errors.append(("base.transition", str(e)))
    elif kind is None:
        errors.append(("base", "missing required key 'kind'"))
    else:
        errors.append(("base.kind", f"unknown base kind {kind!r}"))


def _scan_function_kinds(node, out):
    if isinstance(node, dict):
        kind = node.get("kind")
        if kind in ("const", "trig", "cylinder"):
            out.append(kind)
        for v in node.values():
            _scan_function_kinds(v, out)
    elif isinstance(node, list):
        for v in node:
            _scan_function_kinds(v, out)


def _validate_factor_list(cfgs, kind, base_kind, path, errors):
    if not isinstance(cfgs, list) or not cfgs:
        errors.append((path, "must be a non-empty list of factor maps"))
        return
    try:
        if kind == "circle":
            DiffeoField.from_config(cfgs)
        else:
            MatrixField.from_config(cfgs)
    except (ValueError, KeyError, TypeError) as e:
        errors.append((path, f"bad factor: {e}"))
        return
    fns = []
    _scan_function_kinds(cfgs, fns)
    if base_kind == "cat_map" and "cylinder" in fns:
        errors.append((path, "cylinder functions need an sft base"))
    if base_kind == "sft" and "trig" in fns:
        errors.append((path, "trig functions need a cat_map base"))


def _validate_cocycle(doc, base_kind, errors):
    if not isinstance(doc, dict):
        errors.append(("cocycle", "must be a map"))
        return
    _check_keys(doc, ("family_id", "parameters", "alpha"), "cocycle", errors,
                required=("family_id",))
    fam = doc.get("family_id")
    if fam is not None and fam not in FAMILIES:
        errors.append(("cocycle.family_id",
                       f"unknown family {fam!r}; expected one of "
                       f"{', '.join(FAMILIES)}"))
        return
    alpha = doc.get("alpha", 1.0)
    if not _is_num(alpha) or not 0.0 < alpha <= 1.0:
        errors.append(("cocycle.alpha", f"must lie in (0,1], got {alpha!r}"))
    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        errors.append(("cocycle.parameters", "must be a map"))
        return
    p = "cocycle.parameters"
    if fam == "identity":
        _check_keys(params, (), p, errors)
    elif fam == "arnold_bump":
        _check_keys(params, ("a", "phase"), p, errors, required=("a",))
        a = params.get("a", 0.0)
        if not _is_num(a) or not abs(a) < 1.0:
            errors.append((p + ".a", f"needs |a| < 1, got {a!r}"))
        if "phase" in params and not _is_num(params["phase"]):
            errors.append((p + ".phase", "must be a number"))
    elif fam in ("coboundary", "linear_coboundary"):
        _check_keys(params, ("generator",), p, errors, required=("generator",))
        if "generator" in params:
            kind = "circle" if fam == "coboundary" else "linear"
            _validate_factor_list(params["generator"], kind, base_kind,
                                  p + ".generator", errors)
    elif fam in ("direct", "linear_direct"):
        _check_keys(params, ("factors",), p, errors, required=("factors",))
        if "factors" in params:
            kind = "circle" if fam == "direct" else "linear"
            _validate_factor_list(params["factors"], kind, base_kind,
                                  p + ".factors", errors)


def parse_config(document) -> ScenarioConfig:
    """Validate a JSON document (text or already-parsed map).

    Raises ConfigError carrying every (path, reason) pair found, so a bad
    config reports all its problems in one pass.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as e:
            raise ConfigError([("config", f"invalid JSON: {e}")]) from None
    if not isinstance(document, dict):
        raise ConfigError([("config", "top level must be a map")])

    errors: list = []
    _check_keys(document, ("base", "cocycle", "experiment", "tolerances",
                           "seed", "output_dir"), "config", errors,
                required=("base", "cocycle", "experiment"))

    base = document.get("base", {})
    _validate_base(base, errors)
    base_kind = base.get("kind") if isinstance(base, dict) else None
    _validate_cocycle(document.get("cocycle", {}), base_kind, errors)

    exp = document.get("experiment")
    if exp is not None and exp not in EXPERIMENTS:
        errors.append(("experiment",
                       f"unknown experiment kind {exp!r}; expected one of "
                       f"{', '.join(EXPERIMENTS)}"))

    tols = document.get("tolerances", {})
    if not isinstance(tols, dict):
        errors.append(("tolerances", "must be a map"))
        tols = {}
    else:
        for k, v in tols.items():
            if k not in TOLERANCE_DEFAULTS:
                errors.append((f"tolerances.{k}",
                               f"unknown tolerance; expected one of "
                               f"{', '.join(TOLERANCE_DEFAULTS)}"))
            elif not _is_num(v) or v <= 0:
                errors.append((f"tolerances.{k}",
                               f"must be a positive number, got {v!r}"))

    seed = document.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append(("seed", f"must be a non-negative integer, got {seed!r}"))

    outd = document.get("output_dir", "out")
    if not isinstance(outd, str) or not outd:
        errors.append(("output_dir", "must be a non-empty string"))

    fam = document.get("cocycle", {}).get("family_id") \
        if isinstance(document.get("cocycle"), dict) else None
    if (exp in _CIRCLE_ONLY_EXPERIMENTS and fam is not None
            and fam not in CIRCLE_FAMILIES):
        errors.append(("experiment",
                       f"{exp} needs a circle-fiber cocycle, got {fam!r}"))

    if errors:
        raise ConfigError(errors)

    canonical_base = {"kind": base_kind}
    if base_kind == "cat_map":
        canonical_base["matrix"] = [list(r) for r in
                                    base.get("matrix", [[2, 1], [1, 1]])]
    else:
        canonical_base["transition"] = [list(r) for r in
                                        base.get("transition", [[1, 1], [1, 1]])]
        canonical_base["theta"] = float(base.get("theta", 0.5))

    coc = document["cocycle"]
    canonical_cocycle = {
        "family_id": coc["family_id"],
        "alpha": float(coc.get("alpha", 1.0)),
        "parameters": json.loads(json.dumps(coc.get("parameters", {}))),
    }
    tolerances = dict(TOLERANCE_DEFAULTS)
    tolerances.update({k: float(v) for k, v in tols.items()})

    return ScenarioConfig(base=canonical_base, cocycle=canonical_cocycle,
                          experiment=exp, tolerances=tolerances,
                          seed=int(seed), output_dir=outd)


def emit_config(cfg: ScenarioConfig) -> dict:
    """Canonical document; parse(emit(cfg)) == cfg."""
    return {"base": cfg.base, "cocycle": cfg.cocycle,
            "experiment": cfg.experiment, "tolerances": cfg.tolerances,
            "seed": cfg.seed, "output_dir": cfg.output_dir}


def config_to_json(cfg: ScenarioConfig) -> str:
    return json.dumps(emit_config(cfg), indent=2, sort_keys=True)


def scenario_hash(cfg: ScenarioConfig) -> str:
    doc = emit_config(cfg)
    del doc["output_dir"]  # same science, wherever it lands
    payload = json.dumps(doc, sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:12]


def with_overrides(cfg: ScenarioConfig, seed=None, output_dir=None):
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    if output_dir is not None:
        cfg = replace(cfg, output_dir=str(output_dir))
    return cfg


def build_base(cfg: ScenarioConfig):
    if cfg.base["kind"] == "cat_map":
        return CatMapSystem(cfg.base["matrix"])
    return SftSystem(cfg.base["transition"], cfg.base["theta"])


def build_skew(cfg: ScenarioConfig) -> SkewSystem:
    base = build_base(cfg)
    fam = cfg.cocycle["family_id"]
    alpha = cfg.cocycle["alpha"]
    params = cfg.cocycle["parameters"]
    if fam == "identity":
        cocycle = FamilyCocycle(DiffeoField([]), alpha, "identity")
    elif fam == "arnold_bump":
        a = float(params["a"])
        phase = float(params.get("phase", 0.0))
        field_ = DiffeoField([BumpFactor(Const(a), Const(phase))])
        cocycle = FamilyCocycle(field_, alpha, f"arnold_bump(a={a:g})")
    elif fam == "coboundary":
        gen = DiffeoField.from_config(params["generator"])
        cocycle = make_coboundary(gen, alpha)
    elif fam == "direct":
        cocycle = FamilyCocycle(DiffeoField.from_config(params["factors"]),
                                alpha, "direct")
    elif fam == "linear_direct":
        cocycle = LinearCocycle(MatrixField.from_config(params["factors"]),
                                alpha)
    else:
        cocycle = LinearCoboundary(MatrixField.from_config(params["generator"]),
                                   alpha)
    return SkewSystem(base, cocycle)
