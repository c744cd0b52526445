"""Command-line harness: membership tables, flow experiments, sweeps and verification suites.

    curvlab check  --config cfg.json --out runs/check
    curvlab flow   --config flow.json --seed 3 --jobs 2
    curvlab sweep  --n 4 5 --sigma 0.1 0.5 --spec SET_E TILDE_C
    curvlab verify algebra

Settings resolve as flags over the JSON config over built-in defaults, and
the resolved values are echoed into each command's JSON sidecar. Tables are
CSV with 17 significant digits; witness frames go to ``witnesses/<row_id>.json``.
Every failure ends with one stderr line ``curvlab: error code=<int> kind=<name> message=<text>``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from . import __version__
from .algebra import CurvatureOperator, TransformParams, from_json_dict, sphere, zero
from .cones import UNDECIDED, ConeSpec, membership
from .errors import CurvlabError
from .flow import FlowConfig, FlowVariant, Scheme, closed_form_sphere, integrate
from .generators import GeneratorSpec, generate_one, product_sphere
from .suites import SUITES

EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "starts": 64,
    "tol": None,
    "jobs": 1,
    "out": "curvlab_out",
    "operators": [],
    "generator": None,
    "specs": ["PIC", "TILDE_C", "HAT_C", "SET_E"],
    "flow": {
        "variant": "PLAIN",
        "eps": 0.0,
        "a": None,
        "b": None,
        "scheme": "RK45_ADAPTIVE",
        "h": 1e-3,
        "rel_tol": 1e-10,
        "abs_tol": 1e-12,
        "step_cap": 0.01,
        "max_time": None,
        "max_trace": None,
        "trace_growth": 1e3,
        "max_steps": 100_000,
        "monitors": ["SET_E"],
        "sample_growth": 1.25,
        "starts": 16,
        "pinching": False,
        "fallback_time": 1.0,
    },
    "sweep": {"kind": "sphere_perturbed", "n": [4], "sigma": [0.1], "specs": ["SET_E"], "count": 1},
    "verify": {"quick": False},
}

CHECK_TOL = 1e-7
FLOW_TOL = 1e-5
CLOSED_FORM_TOL = 1e-6

QUICK_SIZES = {
    "algebra": {"samples": 20, "brute": 2},
    "equivalence": {"samples": 20},
    "inclusions": {"samples": 40, "pairs": 10},
    "invariance": {"plain": 2, "bohm_wilking": 1, "witnesses": 3},
    "integrator": {},
}


class ConfigError(Exception):
    code = EXIT_CONFIG


class UsageError(Exception):
    code = EXIT_USAGE


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def load_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return data, p.parent


def resolve(args: argparse.Namespace) -> tuple[dict, Path]:
    """Flags over config over defaults; CURVLAB_JOBS stands in for a missing --jobs."""
    file_cfg, base = load_config(args.config)
    cfg = _merge(DEFAULTS, file_cfg)
    for key in ("seed", "starts", "tol", "out"):
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    elif os.environ.get("CURVLAB_JOBS"):
        try:
            cfg["jobs"] = int(os.environ["CURVLAB_JOBS"])
        except ValueError as exc:
            raise ConfigError(f"CURVLAB_JOBS must be an integer, got {os.environ['CURVLAB_JOBS']!r}") from exc
    if getattr(args, "operator", None):
        cfg["operators"] = list(args.operator)
    if getattr(args, "generator", None):
        gen = {"kind": args.generator}
        for key in ("n", "count", "sigma", "k"):
            val = getattr(args, key, None)
            if val is not None:
                gen[key] = val
        cfg["generator"] = _merge(cfg["generator"] or {}, gen)
    if getattr(args, "spec", None):
        cfg["specs"] = list(args.spec)
    flow_flags = {
        "variant": "variant", "eps": "eps", "a": "a", "b": "b", "scheme": "scheme", "h": "h",
        "max_time": "max_time", "max_trace": "max_trace", "monitor": "monitors",
        "flow_starts": "starts", "pinching": "pinching",
    }
    for attr, key in flow_flags.items():
        val = getattr(args, attr, None)
        if val is not None:
            cfg["flow"][key] = val
    for attr, key in (("sweep_n", "n"), ("sigma_list", "sigma"), ("sweep_spec", "specs"), ("kind", "kind"),
                      ("sweep_count", "count")):
        val = getattr(args, attr, None)
        if val is not None:
            cfg["sweep"][key] = val
    if getattr(args, "quick", False):
        cfg["verify"]["quick"] = True
    _validate(cfg)
    return cfg, base


def _validate(cfg: dict) -> None:
    for key in ("seed", "starts", "jobs"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool):
            raise ConfigError(f"{key} must be an integer, got {cfg[key]!r}")
    if cfg["seed"] < 0 or cfg["seed"] >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg["starts"] < 1:
        raise ConfigError("starts must be >= 1")
    if cfg["jobs"] < 1:
        raise ConfigError("jobs must be >= 1")
    if cfg["tol"] is not None and not (isinstance(cfg["tol"], (int, float)) and cfg["tol"] >= 0):
        raise ConfigError(f"tol must be a nonnegative number, got {cfg['tol']!r}")
    if not isinstance(cfg["operators"], list):
        raise ConfigError("operators must be a list")
    if not isinstance(cfg["specs"], list):
        raise ConfigError("specs must be a list")


def _generator_spec(gen: dict, seed: int) -> GeneratorSpec:
    try:
        return GeneratorSpec(
            kind=gen.get("kind"),
            n=int(gen.get("n", 4)),
            count=int(gen.get("count", 1)),
            seed=int(gen.get("seed", seed)),
            sigma=float(gen.get("sigma", 0.1)),
            k=gen.get("k"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"generator: {exc}") from exc


def _builtin(entry: dict) -> CurvatureOperator:
    name = entry["builtin"]
    n = int(entry.get("n", 4))
    scale = float(entry.get("scale", 1.0))
    if name == "sphere":
        R = sphere(n)
    elif name == "zero":
        R = zero(n)
    elif name == "product_sphere":
        R = product_sphere(n, int(entry.get("k", n)))
    else:
        raise ConfigError(f"unknown builtin operator {name!r}; expected sphere, zero or product_sphere")
    return scale * R


def load_operators(cfg: dict, base: Path) -> list[tuple[str, CurvatureOperator]]:
    """Listed operators (file paths, inline JSON, or builtins) followed by generated ones."""
    out = []
    for i, entry in enumerate(cfg["operators"]):
        if isinstance(entry, str):
            path = Path(entry) if Path(entry).is_absolute() else base / entry
            try:
                data = json.loads(path.read_text())
            except FileNotFoundError as exc:
                raise ConfigError(f"operator file not found: {path}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"operator file {path} is not valid JSON") from exc
            out.append((path.stem, from_json_dict(data)))
        elif isinstance(entry, dict) and "builtin" in entry:
            out.append((entry.get("name", f"{entry['builtin']}{i}"), _builtin(entry)))
        elif isinstance(entry, dict):
            out.append((entry.get("name", f"inline{i}"), from_json_dict(entry)))
        else:
            raise ConfigError(f"operators[{i}] must be a path, an operator object or a builtin")
    if cfg["generator"]:
        spec = _generator_spec(cfg["generator"], cfg["seed"])
        items = _map(_generate_item, [(spec, i) for i in range(spec.count)], cfg["jobs"])
        out.extend((f"{spec.kind}{i}", R) for i, R in enumerate(items))
    return out


def _generate_item(args):
    spec, i = args
    return generate_one(spec, i)


def _parse_specs(texts: Sequence[str], n: int) -> list[ConeSpec]:
    try:
        return [ConeSpec.parse(t, n) for t in texts]
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad cone spec in {list(texts)}: {exc}") from exc


def item_seed(seed: int, index: int) -> int:
    """Per-item seed derived from (seed, index), independent of scheduling."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint32)[0])


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    atomic_write(path, buf.getvalue())


def write_json(path: Path, obj: Any) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _finite(x):
    return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x


def sidecar(command: str, cfg: dict, **extra) -> dict:
    return {
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "config": cfg,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        **extra,
    }


def _safe(label: str) -> str:
    return label.replace(":", "_").replace(",", "_")


def _map(fn: Callable, items: list, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=1))


# ---------------------------------------------------------------------------
# check and sweep
# ---------------------------------------------------------------------------

CHECK_HEADER = (
    "row_id", "operator", "n", "spec", "margin", "decision", "method", "other_margin",
    "agreement", "starts", "converged", "escalated", "witness_file", "error",
)


def _membership_row(args) -> dict:
    R, spec, starts, seed, tol = args
    try:
        rep = membership(R, spec, starts, seed, member_tol=tol)
    except CurvlabError as exc:
        return {"decision": UNDECIDED, "error": f"{type(exc).__name__}: {exc}"}
    return {
        "margin": rep.margin,
        "decision": rep.decision,
        "method": rep.method,
        "other_margin": rep.other_margin,
        "agreement": rep.agreement,
        "starts": rep.starts,
        "converged": rep.converged,
        "escalated": rep.escalated,
        "report": rep.to_dict(),
    }


def _membership_table(items, cfg, out: Path):
    """items: (row_id, operator name, R, spec, seed). Returns CSV rows; writes witness files."""
    tol = CHECK_TOL if cfg["tol"] is None else cfg["tol"]
    results = _map(_membership_row, [(R, spec, cfg["starts"], seed, tol) for _, _, R, spec, seed in items], cfg["jobs"])
    rows = []
    for (row_id, name, R, spec, _), res in zip(items, results):
        wfile = ""
        if "report" in res:
            wfile = f"witnesses/{row_id}.json"
            write_json(out / wfile, {"row_id": row_id, "operator": name, "spec": spec.label, **res["report"]})
        rows.append((
            row_id, name, R.n, spec.label, res.get("margin", math.nan), res["decision"], res.get("method", ""),
            res.get("other_margin"), res.get("agreement"), res.get("starts"), res.get("converged"),
            res.get("escalated"), wfile, res.get("error", ""),
        ))
    return rows


def cmd_check(cfg: dict, base: Path) -> int:
    out = Path(cfg["out"])
    ops = load_operators(cfg, base)
    items = []
    for i, (name, R) in enumerate(ops):
        for spec in _parse_specs(cfg["specs"], R.n):
            items.append((f"{i:04d}-{_safe(spec.label)}", name, R, spec, item_seed(cfg["seed"], i)))
    rows = _membership_table(items, cfg, out)
    write_csv(out / "check.csv", CHECK_HEADER, rows)
    undecided = sum(r[5] == UNDECIDED for r in rows)
    write_json(out / "check.json", sidecar("check", cfg, rows=len(rows), undecided=undecided, table="check.csv"))
    print(f"check: {len(rows)} rows ({undecided} undecided) -> {out / 'check.csv'}")
    return 0


SWEEP_HEADER = ("row_id", "n", "sigma", "item") + CHECK_HEADER[3:]


def cmd_sweep(cfg: dict, base: Path) -> int:
    out = Path(cfg["out"])
    sw = cfg["sweep"]
    items, meta = [], []
    cell = 0
    for n in sw["n"]:
        for sigma in sw["sigma"]:
            spec_g = _generator_spec({"kind": sw["kind"], "n": n, "count": sw["count"], "sigma": sigma,
                                      "seed": item_seed(cfg["seed"], cell)}, cfg["seed"])
            for j in range(spec_g.count):
                R = generate_one(spec_g, j)
                for spec in _parse_specs(sw["specs"], n):
                    row_id = f"{cell:03d}-{j:03d}-{_safe(spec.label)}"
                    items.append((row_id, f"{sw['kind']}{j}", R, spec, item_seed(cfg["seed"], cell * 100_003 + j)))
                    meta.append((n, float(sigma), j))
            cell += 1
    rows = _membership_table(items, cfg, out)
    table = [(r[0], *m, *r[3:]) for r, m in zip(rows, meta)]
    write_csv(out / "sweep.csv", SWEEP_HEADER, table)
    write_json(out / "sweep.json", sidecar("sweep", cfg, rows=len(table), table="sweep.csv"))
    print(f"sweep: {len(table)} rows over {cell} (n, sigma) cells -> {out / 'sweep.csv'}")
    return 0


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------


def flow_config(fc: dict, seed: int, n: int, trace0: float) -> FlowConfig:
    try:
        kind = str(fc["variant"]).upper()
        if kind == "PLAIN":
            variant = FlowVariant.plain()
        elif kind == "EPSILON":
            variant = FlowVariant.epsilon(float(fc["eps"]))
        elif kind == "BOHM_WILKING":
            if fc["a"] is not None and fc["b"] is not None:
                params = TransformParams(float(fc["a"]), float(fc["b"]))
            else:
                params = TransformParams.admissible(n, None if fc["b"] is None else float(fc["b"]))
            params.check_admissible(n)
            variant = FlowVariant.bohm_wilking(params)
        else:
            raise ConfigError(f"unknown flow variant {fc['variant']!r}; expected PLAIN, EPSILON or BOHM_WILKING")
        max_time = fc["max_time"]
        if max_time is None and fc["max_trace"] is None and trace0 <= 0:
            max_time = fc["fallback_time"]
        return FlowConfig(
            variant=variant,
            scheme=Scheme(str(fc["scheme"]).upper()),
            h=float(fc["h"]),
            rel_tol=float(fc["rel_tol"]),
            abs_tol=float(fc["abs_tol"]),
            step_cap=float(fc["step_cap"]),
            max_time=math.inf if max_time is None else float(max_time),
            max_trace=None if fc["max_trace"] is None else float(fc["max_trace"]),
            trace_growth=float(fc["trace_growth"]),
            max_steps=int(fc["max_steps"]),
            monitors=tuple(_parse_specs(fc["monitors"], n)) if n >= 4 else (),
            sample_growth=float(fc["sample_growth"]),
            seed=seed,
            starts=int(fc["starts"]),
            pinching=bool(fc["pinching"]),
        )
    except CurvlabError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"flow: {exc}") from exc


def _closed_form_flag(R0: CurvatureOperator, traj, variant: FlowVariant) -> str:
    n = R0.n
    c = float(np.einsum("ijij->", R0.entries)) / (n * (n - 1))
    if variant.kind.value != "PLAIN" or c <= 0 or not R0.allclose(c * sphere(n), atol=1e-12):
        return "n/a"
    I = sphere(n).entries
    err = max(
        float(np.abs(s.R.entries / (c * closed_form_sphere(n, c * s.t)) - I).max()) for s in traj.samples
    )
    return "pass" if err <= CLOSED_FORM_TOL else "fail"


def _run_flow(args) -> dict:
    idx, name, R, fcfg, tol = args
    try:
        traj = integrate(R, fcfg)
    except CurvlabError as exc:
        return {"index": idx, "name": name, "error": f"{type(exc).__name__}: {exc}", "code": exc.code}
    labels = [m.label for m in fcfg.monitors]
    summary = {"index": idx, "name": name, "n": R.n, "terminated_by": traj.terminated_by, "steps": traj.steps,
               "t_final": traj.samples[-1].t, "closed_form": _closed_form_flag(R, traj, fcfg.variant),
               "start_margin": {}, "min_margin": {}, "violated": [], "monitor_errors": 0}
    for label in labels:
        start = traj.samples[0].margins.get(label, math.nan)
        low = min((s.margins[label] for s in traj.samples if math.isfinite(s.margins.get(label, math.nan))),
                  default=math.nan)
        summary["start_margin"][label] = _finite(start)
        summary["min_margin"][label] = _finite(low)
        if math.isfinite(start) and start >= -CHECK_TOL and math.isfinite(low) and low < -tol:
            summary["violated"].append(label)
    summary["monitor_errors"] = sum(len(s.errors) for s in traj.samples)
    header = ["t", "scal", "ric0_norm"] + [f"margin_{lab}" for lab in labels] + ["pinching", "step_size", "validated"]
    rows = [
        [s.t, s.scal, s.ric0_norm] + [s.margins.get(lab, math.nan) for lab in labels]
        + [s.pinching, s.step_size, s.validated]
        for s in traj.samples
    ]
    summary["table"] = (header, rows)
    return summary


FLOW_SUMMARY_HEADER = ("traj_id", "operator", "n", "terminated_by", "steps", "t_final", "monitor",
                       "start_margin", "min_margin", "invariance", "closed_form", "file", "error")


def cmd_flow(cfg: dict, base: Path) -> int:
    out = Path(cfg["out"])
    tol = FLOW_TOL if cfg["tol"] is None else cfg["tol"]
    ops = load_operators(cfg, base)
    jobs = []
    configs = {}
    for i, (name, R) in enumerate(ops):
        fcfg = flow_config(cfg["flow"], item_seed(cfg["seed"], i), R.n, float(np.einsum("ijij->", R.entries)))
        configs[i] = fcfg.to_dict()
        jobs.append((i, name, R, fcfg, tol))
    results = _map(_run_flow, jobs, cfg["jobs"])
    summary_rows = []
    violations = 0
    error_code = 0
    for res in results:
        tid = f"{res['index']:04d}"
        if "error" in res:
            error_code = error_code or res["code"]
            summary_rows.append((tid, res["name"], "", "error", "", "", "", "", "", "", "", "", res["error"]))
            continue
        fname = f"trajectory_{tid}.csv"
        header, rows = res.pop("table")
        write_csv(out / fname, header, rows)
        res["file"] = fname
        violations += bool(res["violated"])
        monitors = list(res["min_margin"]) or [""]
        for label in monitors:
            status = "" if not label else ("violated" if label in res["violated"] else "held")
            summary_rows.append((
                tid, res["name"], res["n"], res["terminated_by"], res["steps"], res["t_final"], label,
                res["start_margin"].get(label), res["min_margin"].get(label), status, res["closed_form"], fname, "",
            ))
    write_csv(out / "flow_summary.csv", FLOW_SUMMARY_HEADER, summary_rows)
    write_json(out / "flow.json", sidecar(
        "flow", cfg, invariance_tol=tol, flow_configs=configs, trajectories=results, violations=violations,
    ))
    print(f"flow: {len(results)} trajectories, {violations} with violated invariance -> {out}")
    if violations:
        raise FlowViolation(f"{violations} trajectories left a monitored set by more than {tol:g}")
    if error_code:
        failed = [r["error"] for r in results if "error" in r]
        raise _Passthrough(error_code, failed[0])
    return 0


class FlowViolation(Exception):
    code = EXIT_FAILED


class _Passthrough(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(cfg: dict, base: Path, suite: str) -> int:
    if suite not in SUITES:
        raise UsageError(f"unknown suite {suite!r}; available suites: {', '.join(SUITES)}")
    kwargs: dict[str, Any] = {}
    if cfg["verify"]["quick"]:
        kwargs.update(QUICK_SIZES[suite])
    if suite in ("algebra", "equivalence", "inclusions", "invariance"):
        kwargs["seed"] = cfg["seed"]
    if suite in ("equivalence", "inclusions"):
        kwargs["starts"] = cfg["starts"]
    checks = SUITES[suite](**kwargs)
    for c in checks:
        print(c.line())
    failed = sum(not c.passed for c in checks)
    out = Path(cfg["out"])
    write_json(out / f"verify_{suite}.json", sidecar("verify", cfg, suite=suite, checks=[c.to_dict() for c in checks],
                                                     failed=failed))
    print(f"verify {suite}: {len(checks) - failed}/{len(checks)} passed")
    return EXIT_FAILED if failed else 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--starts", type=int, metavar="N", help="multistart count for membership")
    common.add_argument("--tol", type=float, metavar="REAL",
                        help="membership tolerance (check, sweep) or invariance tolerance (flow)")
    common.add_argument("--jobs", type=int, metavar="N", help="worker processes (default: $CURVLAB_JOBS or 1)")

    ops = argparse.ArgumentParser(add_help=False)
    ops.add_argument("--operator", action="append", metavar="PATH", help="operator JSON file (repeatable)")
    ops.add_argument("--generator", help="generator kind")
    ops.add_argument("--n", type=int, help="dimension for the generator")
    ops.add_argument("--count", type=int, help="number of generated operators")
    ops.add_argument("--sigma", type=float, help="perturbation size for sphere_perturbed")
    ops.add_argument("--k", type=int, help="sphere factor dimension for product_sphere")

    p = _Parser(prog="curvlab", description="Curvature operator cones and the Hamilton ODE.")
    p.add_argument("--version", action="version", version=f"curvlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", parents=[common, ops], help="membership table for operators x specs")
    c.add_argument("--spec", action="append", help="cone spec, e.g. SET_E or LAB_E:a,b (repeatable)")

    f = sub.add_parser("flow", parents=[common, ops], help="integrate and monitor trajectories")
    f.add_argument("--variant", choices=["PLAIN", "EPSILON", "BOHM_WILKING"])
    f.add_argument("--eps", type=float)
    f.add_argument("--a", type=float)
    f.add_argument("--b", type=float)
    f.add_argument("--scheme", choices=["RK4_FIXED", "RK45_ADAPTIVE"])
    f.add_argument("--h", type=float)
    f.add_argument("--max-time", dest="max_time", type=float)
    f.add_argument("--max-trace", dest="max_trace", type=float)
    f.add_argument("--monitor", action="append", help="monitored cone spec (repeatable)")
    f.add_argument("--flow-starts", dest="flow_starts", type=int, help="multistarts per monitored sample")
    f.add_argument("--pinching", action="store_const", const=True, help="record the pinching ratio")

    s = sub.add_parser("sweep", parents=[common], help="membership over a grid of (n, sigma, spec)")
    s.add_argument("--kind", help="generator kind for every cell")
    s.add_argument("--n", dest="sweep_n", type=int, nargs="+")
    s.add_argument("--sigma", dest="sigma_list", type=float, nargs="+")
    s.add_argument("--spec", dest="sweep_spec", nargs="+")
    s.add_argument("--count", dest="sweep_count", type=int, help="operators per cell")

    v = sub.add_parser("verify", parents=[common], help="run a property suite")
    v.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    v.add_argument("--quick", action="store_true", help="reduced sample sizes")
    return p


def _fail(code: int, exc: BaseException) -> int:
    message = " ".join(str(exc).split())
    print(f"curvlab: error code={code} kind={type(exc).__name__} message={message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg, base = resolve(args)
        if args.command == "check":
            return cmd_check(cfg, base)
        if args.command == "flow":
            return cmd_flow(cfg, base)
        if args.command == "sweep":
            return cmd_sweep(cfg, base)
        return cmd_verify(cfg, base, args.suite)
    except (UsageError, ConfigError, FlowViolation, _Passthrough, CurvlabError) as exc:
        return _fail(exc.code, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)


if __name__ == "__main__":
    sys.exit(main())
