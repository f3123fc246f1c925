"""Command-line front end: single runs, manifests and sweeps.

Every command reads its parameters from a YAML or JSON document and writes
its artifacts into an output directory.  Exit status: 0 pass, 1 scientific
check failed, 2 input error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import shutil
import sys
import tempfile
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import jsonschema
import numpy as np
import yaml

from . import __version__
from .lattice import Box, ModeField, TorusSpec, TorusSpecError, random_field, sobolev_norm
from .resonance import (ResonanceCapError, count_by_class, enumerate_resonances, resonant_neighbors,
                        small_divisor_constant, weak_resonance_set)

EXIT_PASS, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
JOBS_ENV = "IRRTORUS_JOBS"
FLOAT_FORMAT = "%.17g"


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# schemas

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 0}
_mode = {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}
_torus = {
    "weights": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2,
                "description": "torus weights [w1, w2]"},
    "rational": {"type": "boolean", "default": False,
                 "description": "treat integer weights as a rational (p, q) torus"},
}
_sim = {
    "M": {**_int, "default": 1}, "N": {**_int, "default": 4}, "L": {**_int, "default": 8},
    "s": {**_num, "default": 1.5}, "epsilon": {**_pos, "default": 0.05},
    "t_final": {**_pos, "description": "user cap on the horizon"},
    "dt_controls": {**_pos, "default": 1e-10}, "seed": {"type": "integer", "default": 0},
    "weak_threshold": {**_pos, "default": 1.0}, "window_constant": {**_pos, "default": 1.0},
    "n_output": {"type": "integer", "minimum": 2, "default": 201}, "split_step": {**_pos, "default": 0.005},
}


def _schema(props: dict, required: List[str]) -> dict:
    return {"type": "object", "properties": props, "required": required, "additionalProperties": False}


SCHEMAS: Dict[str, dict] = {
    "resonances": _schema({**_torus, "N": _int, "L": _int, "weak_threshold": {**_pos, "default": 1.0},
                           "center": _mode}, ["weights", "N"]),
    "normalform": _schema({**_torus, "N": _int, "L": _int, "weak_threshold": {**_pos, "default": 1.0},
                           "quartic_coefficient": {**_pos, "default": 1.0}, "s": {**_num, "default": 1.5},
                           "seed": {"type": "integer", "default": 0},
                           "epsilons": {"type": "array", "items": _pos, "minItems": 2,
                                        "default": [1e-3, 10 ** -2.75, 10 ** -2.5, 10 ** -2.25, 1e-2]},
                           "ode_tol": {**_pos, "default": 1e-10}, "samples": {**_int, "default": 20},
                           "write_terms": {"type": "boolean", "default": True}},
                          ["weights", "N", "L"]),
    "simulate": _schema({**_torus, **_sim,
                         "system": {"enum": ["resonant", "condensed", "full"], "default": "resonant"},
                         "method": {"enum": ["split-step", "lawson"], "default": "split-step"},
                         "include_weak": {"type": "boolean", "default": True},
                         "watch": {"type": "array", "items": _mode},
                         "initial": {"type": "array", "items": {"type": "array", "items": _num,
                                                               "minItems": 4, "maxItems": 4}}},
                        ["weights"]),
    "verify-theorem": _schema({**_torus, **_sim, "gamma": {"type": "number", "exclusiveMaximum": 3},
                               "n_pullback": {"type": "integer", "minimum": 2, "default": 21},
                               "full_method": {"enum": ["split-step", "lawson"], "default": "lawson"}},
                              ["weights", "gamma"]),
    "cascade-demo": _schema({**_torus, "L": {**_int, "default": 5}, "t_final": {**_pos, "default": 1.0},
                             "populate_q1": {"type": "boolean", "default": True},
                             "tolerance": {**_pos, "default": 1e-10}}, []),
    "family": _schema({"s": _num, "relation": {"enum": ["SquareTorusA", "IrrationalR"]},
                       "generations": {"type": "array", "items": {"type": "array", "items": _mode}},
                       "file": {"type": "string"}}, []),
}
COMMANDS = tuple(SCHEMAS)

MANIFEST_SCHEMA = {
    "type": "object",
    "properties": {"name": {"type": "string", "minLength": 1}, "command": {"enum": list(COMMANDS)},
                   "parameters": {"type": "object"}, "output_dir": {"type": "string", "minLength": 1}},
    "required": ["name", "command", "parameters", "output_dir"],
    "additionalProperties": False,
}


def _first_error(validator, doc, prefix: str) -> Optional[str]:
    order = validator.schema.get("required", [])

    def rank(e):
        name = e.message.split("'")[1] if e.validator == "required" else ""
        return (len(e.path), [str(p) for p in e.path], order.index(name) if name in order else len(order),
                e.message)

    errors = sorted(validator.iter_errors(doc), key=rank)
    if not errors:
        return None
    e = errors[0]
    path = ".".join(str(p) for p in e.path)
    if e.validator == "required":
        field = e.message.split("'")[1]
        path = f"{path}.{field}" if path else field
        return f"{prefix}.{path}: missing required field '{field}'"
    if e.validator == "additionalProperties":
        return f"{prefix}{'.' + path if path else ''}: {e.message}"
    return f"{prefix}.{path}: {e.message}"


def validate_parameters(command: str, params: dict) -> dict:
    """Schema-check and fill defaults; raises InputError naming the offending field."""
    if command not in SCHEMAS:
        raise InputError(f"command: unknown command {command!r}; expected one of {list(COMMANDS)}")
    schema = SCHEMAS[command]
    if params is None:
        params = {}
    msg = _first_error(jsonschema.Draft202012Validator(schema), params, "parameters")
    if msg:
        raise InputError(msg)
    out = copy.deepcopy(params)
    for key, prop in schema["properties"].items():
        if key not in out and "default" in prop:
            out[key] = copy.deepcopy(prop["default"])
    return out


def validate_manifest(doc) -> dict:
    if not isinstance(doc, dict):
        raise InputError("manifest: expected a mapping with name, command, parameters, output_dir")
    msg = _first_error(jsonschema.Draft202012Validator(MANIFEST_SCHEMA), doc, "manifest")
    if msg:
        raise InputError(msg)
    out = dict(doc)
    out["parameters"] = validate_parameters(doc["command"], doc["parameters"])
    return out


def load_document(path) -> object:
    text = Path(path).read_text()
    try:
        return json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise InputError(f"{path}: cannot parse ({exc})") from None


# ---------------------------------------------------------------------------
# output helpers


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FORMAT % float(v)
    return "" if v is None else str(v)


class Artifacts:
    """Files accumulated in memory and committed to disk in one atomic rename."""

    def __init__(self):
        self.files: Dict[str, str] = {}

    def json(self, name: str, obj):
        self.files[name] = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"

    def csv(self, name: str, header: List[str], rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        self.files[name] = buf.getvalue()

    def text(self, name: str, text: str):
        self.files[name] = text

    def commit(self, output_dir):
        out = Path(output_dir).resolve()
        out.parent.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
        try:
            for name, content in self.files.items():
                (tmp / name).write_text(content)
            old = None
            if out.exists():
                old = Path(tempfile.mkdtemp(prefix=f".{out.name}.old.", dir=out.parent))
                os.replace(out, old / "d")
            os.replace(tmp, out)
            if old is not None:
                shutil.rmtree(old, ignore_errors=True)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise


# ---------------------------------------------------------------------------
# command implementations: each returns (passed, report) and fills artifacts


def _spec(p: dict) -> TorusSpec:
    w1, w2 = p["weights"]
    try:
        if p.get("rational"):
            if int(w1) != w1 or int(w2) != w2:
                raise InputError("parameters.weights: rational tori need integer weights")
            return TorusSpec.make_rational(int(w1), int(w2))
        return TorusSpec.make_irrational(w1, w2)
    except TorusSpecError as exc:
        raise InputError(f"parameters.weights: {exc}") from None


def _tuple_rows(tuples):
    for t in tuples:
        yield [*t.k1, *t.k2, *t.k3, *t.k4, t.cls.value, t.weak_defect]


_TUPLE_HEADER = ["k1x", "k1y", "k2x", "k2y", "k3x", "k3y", "k4x", "k4y"]


def cmd_resonances(p: dict, art: Artifacts):
    spec = _spec(p)
    try:
        tuples = enumerate_resonances(spec, p["N"])
    except ResonanceCapError as exc:
        raise InputError(f"parameters.N: {exc}") from None
    art.csv("resonances.csv", _TUPLE_HEADER + ["class", "defect"], _tuple_rows(tuples))
    report = {"spec": spec.to_dict(), "N": p["N"], "count": len(tuples), "by_class": count_by_class(tuples),
              "small_divisor_constant": small_divisor_constant(spec, p["N"])}
    if "L" in p:
        if not p["L"] > p["N"]:
            raise InputError("parameters.L: must exceed N")
        weak = weak_resonance_set(spec, p["N"], p["L"], p["weak_threshold"])
        art.csv("weak.csv", _TUPLE_HEADER + ["class", "defect"], _tuple_rows(weak))
        report["weak_count"] = len(weak)
    if "center" in p:
        k = tuple(p["center"])
        if k not in Box(p["N"]):
            raise InputError(f"parameters.center: {list(k)} outside Q_{p['N']}")
        q = resonant_neighbors(spec, k, p["N"])
        report["neighbors"] = {"center": list(k), "triples": [[list(m) for m in t] for t in q.triples]}
    passed = spec.is_rational or report["by_class"]["Nonparallel"] == 0
    report["pass"] = passed
    return passed, report


def cmd_normalform(p: dict, art: Artifacts):
    from .normal_form import (Direction, NormalFormError, build_chi, lie_transform,
                              termwise_identity_residual, verify_poisson_cancellation)
    spec = _spec(p)
    if not p["L"] > p["N"]:
        raise InputError("parameters.L: must exceed N")
    try:
        chi, dec = build_chi(spec, p["N"], p["L"], p["weak_threshold"], p["quartic_coefficient"])
    except NormalFormError as exc:
        raise InputError(f"parameters.weights: {exc}") from None
    if p["write_terms"]:
        t = chi.terms()
        rows = ([*m.ravel().tolist(), g.real, g.imag, "Chi1" if part == 0 else "Chi2"]
                for m, g, part in zip(t.modes, t.g, t.part))
        art.csv("chi_terms.csv", _TUPLE_HEADER + ["re_g", "im_g", "part"], rows)
    rng = np.random.default_rng(p["seed"])
    L, N = Box(p["L"]), Box(p["N"])
    samples = [random_field(L, L, rng.uniform(0.1, 1.0), 0.0, rng) for _ in range(p["samples"])]
    poisson = verify_poisson_cancellation(chi, dec, spec, samples)
    direction = random_field(L, N, 1.0, p["s"], rng)
    rows, norms, diffs, trips = [], [], [], []
    for eps in p["epsilons"]:
        z0 = direction.scale(eps)
        z1 = lie_transform(chi, z0, Direction.FORWARD, p["ode_tol"], p["s"])
        back = lie_transform(chi, z1, Direction.INVERSE, p["ode_tol"], p["s"])
        d = sobolev_norm(z1 - z0, p["s"])
        trip = sobolev_norm(back - z0, p["s"])
        norms.append(eps)
        diffs.append(d)
        trips.append(trip)
        rows.append([eps, d, d / eps ** 3, trip])
    art.csv("scaling.csv", ["epsilon", "transform_shift", "shift_over_eps3", "round_trip_error"], rows)
    slope = float(np.polyfit(np.log(norms), np.log(diffs), 1)[0])
    report = {"spec": spec.to_dict(), "N": p["N"], "L": p["L"],
              "small_divisor_constant": chi.small_divisor_constant,
              "termwise_residual": termwise_identity_residual(chi) if p["write_terms"] else None,
              "poisson": {k: v for k, v in poisson.items() if k != "residuals"},
              "scaling": {"slope": slope, "max_round_trip": max(trips)},
              "resonant_count": len(dec.resonant_modes), "weak_count": len(dec.weak_modes)}
    passed = bool(poisson["pass"] and abs(slope - 3.0) <= 0.2 and max(trips) < 10 * p["ode_tol"])
    report["pass"] = passed
    return passed, report


def _sim_config(p: dict, spec: TorusSpec):
    from .dynamics import SimulationConfig
    try:
        return SimulationConfig(spec, p["N"], p["L"], p["M"], s=p["s"], epsilon=p["epsilon"],
                                t_final=p.get("t_final"), dt_controls=p["dt_controls"], seed=p["seed"],
                                weak_threshold=p["weak_threshold"], window_constant=p["window_constant"],
                                n_output=p["n_output"], split_step=p["split_step"])
    except ValueError as exc:
        raise InputError(f"parameters: {exc}") from None


def cmd_simulate(p: dict, art: Artifacts):
    from .dynamics import (activation_time, integrate_condensed, integrate_full, integrate_resonant,
                           random_initial_data, support_confinement_report)
    spec = _spec(p)
    cfg = _sim_config(p, spec)
    if "initial" in p:
        try:
            u0 = ModeField.from_modes(cfg.L, [((int(r[0]), int(r[1])), complex(r[2], r[3])) for r in p["initial"]])
        except ValueError as exc:
            raise InputError(f"parameters.initial: {exc}") from None
    else:
        u0 = random_initial_data(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if p["system"] == "resonant":
            traj = integrate_resonant(cfg, u0, p["include_weak"])
        elif p["system"] == "condensed":
            traj = integrate_condensed(cfg, u0, p["include_weak"])
        else:
            traj = integrate_full(cfg, u0, p["method"])
    watch = [tuple(k) for k in p.get("watch", [])] or [k for k in Box(cfg.M.M + 1).modes()]
    for k in watch:
        if k not in cfg.L:
            raise InputError(f"parameters.watch: mode {list(k)} outside Q_{cfg.L.M}")
    amps = np.stack([traj.amplitude(k) for k in watch], axis=1)
    art.csv("trajectory.csv", ["time"] + [f"abs_u[{k[0]},{k[1]}]" for k in watch],
            ([t, *a] for t, a in zip(traj.times, amps)))
    c = traj.conserved
    art.csv("conserved.csv", ["time", "mass", "hamiltonian", "momentum_x", "momentum_y"],
            ([t, m, h, px, py] for t, m, h, (px, py) in zip(traj.times, c["mass"], c["hamiltonian"], c["momentum"])))
    conf = support_confinement_report(traj, cfg.M, cfg.N)
    m0 = c["mass"][0]
    mass_drift = float(np.abs(c["mass"] - m0).max() / m0) if m0 > 0 else 0.0
    report = {"spec": spec.to_dict(), "system": p["system"], "t_final": float(traj.times[-1]),
              "t_bound": traj.t_bound, "window_exceeded": traj.window_exceeded,
              "warnings": [str(w.message) for w in caught],
              "max_outside": conf["max_outside"], "max_annulus": float(conf["annulus"].max()),
              "max_exterior": float(conf["exterior"].max()), "mass_drift": mass_drift,
              "activation_times": {f"{k[0]},{k[1]}": activation_time(traj, k, cfg.activation_threshold)
                                   for k in watch}}
    checks = {"mass": mass_drift < (1e-8 if p["system"] == "full" else 1e-6)}
    if not spec.is_rational and p["system"] != "full":
        checks["confinement"] = conf["max_outside"] < cfg.confinement_tol
    report["checks"] = checks
    report["pass"] = all(checks.values())
    return report["pass"], report


def cmd_verify_theorem(p: dict, art: Artifacts):
    from .dynamics import theorem_pipeline
    spec = _spec(p)
    if spec.is_rational:
        raise InputError("parameters.weights: the theorem pipeline needs an irrational torus")
    cfg = _sim_config(p, spec)
    try:
        out = theorem_pipeline(cfg, p["gamma"], p["n_pullback"], p["full_method"])
    except ValueError as exc:
        raise InputError(f"parameters: {exc}") from None
    art.csv("gap.csv", ["time", "duhamel_gap"], zip(out["pullback_times"], out["gap"]))
    psi = out["psi"]
    outside = ~np.isin(np.arange(cfg.L.size), [cfg.L.flat_index(k) for k in cfg.M.modes()])
    art.csv("trajectory.csv", ["time", "max_abs_psi_outside"],
            zip(psi.times, np.abs(psi.values[:, outside]).max(axis=1)))
    report = out["report"]
    return report["pass"], report


def cmd_cascade_demo(p: dict, art: Artifacts):
    from .dynamics import three_step_cascade_demo
    spec = _spec(p) if "weights" in p else TorusSpec.square()
    out = three_step_cascade_demo(p["L"], spec, t_final=p["t_final"], populate_q1=p["populate_q1"],
                                  tolerance=p["tolerance"])
    traj = out.pop("trajectory")
    inst = out["instance"]
    names = ["Q2", "Q3", "Q4"]
    amps = np.stack([traj.amplitude(tuple(inst[n])) for n in names], axis=1)
    art.csv("trajectory.csv", ["time"] + [f"abs_{n}" for n in names], ([t, *a] for t, a in zip(traj.times, amps)))
    act = out["activation_times"]
    if not spec.is_rational:
        passed = all(v is None for v in act.values())
    elif p["populate_q1"]:
        passed = out["order_ok"]
    else:
        passed = act["Q4"] is None
    out["pass"] = bool(passed)
    return out["pass"], out


def cmd_family(p: dict, art: Artifacts):
    from .family import (FamilyError, FamilyStructure, Relation, check_ratio_bound, generation_sums, passes,
                         validate_family)
    doc = p
    if "file" in p:
        try:
            doc = load_document(p["file"])
        except OSError as exc:
            raise InputError(f"parameters.file: {exc}") from None
        if not isinstance(doc, dict):
            raise InputError("parameters.file: expected a mapping with s, relation, generations")
    try:
        fam = FamilyStructure.from_document(doc)
    except FamilyError as exc:
        raise InputError(f"parameters: {exc}") from None
    conditions = validate_family(fam)
    sums = generation_sums(fam)
    ratios = [a / b for a in sums for b in sums if b > 0]
    report = {"conditions": conditions, "sums": sums, "max_ratio": max(ratios, default=1.0),
              "bound": 2.0 ** fam.s, "relation": fam.relation.value}
    ok = passes(conditions)
    if ok and fam.relation is Relation.IRRATIONAL_R:
        rb = check_ratio_bound(fam)
        report["permutations"] = rb["permutations"]
        ok = rb["pass"]
    report["pass"] = bool(ok)
    return ok, report


HANDLERS: Dict[str, Callable] = {
    "resonances": cmd_resonances, "normalform": cmd_normalform, "simulate": cmd_simulate,
    "verify-theorem": cmd_verify_theorem, "cascade-demo": cmd_cascade_demo, "family": cmd_family,
}


# ---------------------------------------------------------------------------
# orchestration


def execute(command: str, params: dict, output_dir, name: Optional[str] = None) -> Tuple[int, dict]:
    """Validate, run, and atomically write artifacts; returns ``(exit_code, report)``."""
    params = validate_parameters(command, params)
    art = Artifacts()
    t0 = time.time()
    passed, report = HANDLERS[command](params, art)
    art.json("report.json", report)
    art.json("manifest.echo.json", {"name": name or command, "command": command, "parameters": params,
                                    "output_dir": str(output_dir), "engine_version": __version__,
                                    "wall_clock_seconds": time.time() - t0})
    art.commit(output_dir)
    return (EXIT_PASS if passed else EXIT_FAIL), report


def run_manifest(manifest: dict) -> Tuple[int, dict]:
    m = validate_manifest(manifest)
    return execute(m["command"], m["parameters"], m["output_dir"], m["name"])


def _child(manifest: dict) -> Tuple[str, int, dict, str]:
    try:
        code, report = run_manifest(manifest)
        return manifest["name"], code, report, ""
    except InputError as exc:
        return manifest["name"], EXIT_INPUT, {}, str(exc)
    except Exception as exc:  # child failures are reported, never abort the sweep
        return manifest["name"], EXIT_FAIL, {}, f"{type(exc).__name__}: {exc}"


def _scalar_items(report: dict, prefix: str = ""):
    for k, v in report.items():
        if isinstance(v, dict):
            yield from _scalar_items(v, f"{prefix}{k}.")
        elif isinstance(v, (int, float, str, bool, np.integer, np.floating)) or v is None:
            yield f"{prefix}{k}", v


def sweep(manifests: List[dict], output_dir, jobs: Optional[int] = None) -> Tuple[int, dict]:
    """Run manifests concurrently and merge their reports keyed by name."""
    checked = [validate_manifest(m) for m in manifests]
    dirs = [str(Path(m["output_dir"]).resolve()) for m in checked]
    dup = next((d for d in dirs if dirs.count(d) > 1), None)
    if dup:
        raise InputError(f"output_dir: duplicate output directory {dup}")
    names = [m["name"] for m in checked]
    dupn = next((n for n in names if names.count(n) > 1), None)
    if dupn:
        raise InputError(f"name: duplicate manifest name {dupn!r}")
    jobs = jobs or int(os.environ.get(JOBS_ENV, "1") or 1)
    if jobs > 1 and len(checked) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_child, checked))
    else:
        results = [_child(m) for m in checked]
    merged, rows, keys = {}, [], []
    for m, (name, code, report, err) in zip(checked, results):
        merged[name] = {"command": m["command"], "exit_code": code, "error": err, "report": report}
        flat = dict(_scalar_items(report))
        rows.append((name, m["command"], code, flat))
        keys.extend(k for k in flat if k not in keys)
    keys = sorted(keys)
    art = Artifacts()
    art.csv("summary.csv", ["name", "command", "exit_code"] + keys,
            ([n, c, e] + [f.get(k) for k in keys] for n, c, e, f in rows))
    art.json("sweep_report.json", merged)
    art.commit(output_dir)
    status = EXIT_PASS if all(code == EXIT_PASS for _, code, _, _ in results) else EXIT_FAIL
    return status, merged


def _load_manifests(paths: List[str]) -> List[dict]:
    out = []
    for path in paths:
        doc = load_document(path)
        if isinstance(doc, dict) and "manifests" in doc:
            doc = doc["manifests"]
        out.extend(doc if isinstance(doc, list) else [doc])
    return out


def _schema_help(command: str) -> str:
    props = SCHEMAS[command]["properties"]
    req = set(SCHEMAS[command]["required"])
    lines = ["parameters:"]
    for k, v in props.items():
        kind = v.get("type") or "one of " + "/".join(v.get("enum", []))
        extra = " (required)" if k in req else (f" (default {v['default']})" if "default" in v else "")
        lines.append(f"  {k}: {kind}{extra}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irrtorus", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="cmd", required=True)
    for command in COMMANDS:
        sp = sub.add_parser(command, help=f"run {command}", epilog=_schema_help(command),
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.add_argument("config", help="YAML or JSON parameter document")
        sp.add_argument("-o", "--output-dir", default=None, help=f"artifact directory (default ./{command}_out)")
    rp = sub.add_parser("run", help="run one experiment manifest",
                        epilog="manifest fields: name, command, parameters, output_dir",
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    rp.add_argument("manifest")
    sw = sub.add_parser("sweep", help=f"run many manifests concurrently (job limit from ${JOBS_ENV})")
    sw.add_argument("manifests", nargs="*")
    sw.add_argument("-o", "--output-dir", default="sweep_out")
    sw.add_argument("-j", "--jobs", type=int, default=None)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.cmd == "run":
            doc = load_document(args.manifest)
            code, report = run_manifest(doc)
        elif args.cmd == "sweep":
            code, report = sweep(_load_manifests(args.manifests), args.output_dir, args.jobs)
        else:
            params = load_document(args.config)
            if params is not None and not isinstance(params, dict):
                raise InputError("parameters: expected a mapping")
            code, report = execute(args.cmd, params or {}, args.output_dir or f"{args.cmd}_out")
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    verdict = {EXIT_PASS: "pass", EXIT_FAIL: "FAIL"}[code]
    print(f"{verdict}")
    return code


if __name__ == "__main__":
    sys.exit(main())
