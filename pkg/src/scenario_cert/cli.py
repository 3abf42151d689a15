"""Command-line interface.

Every command writes one JSON report to stdout.  The report embeds the full
configuration (problem document included) and seed, so ``replay`` can rerun
it and check the result is bit-identical.

Exit codes: 0 success, 1 usage or schema error, 2 solver or assumption
failure, 3 degenerate problem or removal, 4 validation failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, bounds, canonical
from .bounds import BoundKind
from .cascade import CoupledConstraint, SecondStageSpec, discard_cascade, solve_cascade
from .errors import InfeasibleQuery, ScenarioCertError, SchemaError, ValidationFailed
from .robust_box import discard_box, solve_box_design
from .sampling import GENERATOR, distribution_from_dict, draw
from .scenario import (
    ScenarioProblem,
    UncertainAffineConstraint,
    certify,
    discard,
    solve_scenario,
)
from .validate import FAIL, ExperimentConfig, run_experiment

__all__ = ["main", "DEFAULT_SEED", "DEFAULT_BETA", "load_schema", "load_problem", "build_problem"]

SCHEMA_VERSION = 1
DEFAULT_SEED = 12345
DEFAULT_BETA = 0.01
KIND_CHOICES = ("floyd", "exact", "discard", "discard-unique")


class _UsageError(ScenarioCertError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage().rstrip()}")


def load_schema(name):
    text = resources.files("scenario_cert").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _path(err):
    parts = ["$"]
    for p in err.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts)


def _validate(doc, schema_name):
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(f"{schema_name} file invalid at {_path(err)}: {err.message}")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc


def load_problem(path):
    doc = _read_json(path)
    _validate(doc, "problem")
    build_problem(doc)
    return doc


def _ext(values, n, fill, where):
    if values is None:
        return np.full(n, fill)
    if len(values) != n:
        raise SchemaError(f"{where}: expected {n} entries, got {len(values)}")
    return np.array([fill if v is None else v for v in values], dtype=float)


def _shape(where, arr, shape):
    got = np.shape(arr)
    if got != shape:
        raise SchemaError(f"{where}: expected shape {shape}, got {got}")


def _build_first(doc):
    n, nd = doc["n_x"], doc["n_delta"]
    _shape("$.problem.cost", doc["cost"], (n,))
    cons = []
    for j, c in enumerate(doc["constraints"]):
        where = f"$.problem.constraints[{j}]"
        _shape(f"{where}.f0", c["f0"], (n,))
        _shape(f"{where}.F", c["F"], (n, nd))
        _shape(f"{where}.h", c["h"], (nd,))
        cons.append(UncertainAffineConstraint(c["f0"], c["F"], c["h0"], c["h"]))
    return ScenarioProblem(
        doc["cost"],
        cons,
        _ext(doc.get("var_lower"), n, -np.inf, "$.problem.var_lower"),
        _ext(doc.get("var_upper"), n, np.inf, "$.problem.var_upper"),
        n_delta=nd,
    )


def _build_second(doc, n_x, nd):
    ny = doc["n_y"]
    _shape("$.second_stage.cost_y", doc["cost_y"], (ny,))
    cons = []
    for j, c in enumerate(doc["constraints"]):
        where = f"$.second_stage.constraints[{j}]"
        _shape(f"{where}.a0", c["a0"], (ny,))
        _shape(f"{where}.A", c["A"], (ny, nd))
        _shape(f"{where}.Q", c["Q"], (n_x, nd))
        _shape(f"{where}.q", c["q"], (n_x,))
        _shape(f"{where}.s", c["s"], (nd,))
        cons.append(CoupledConstraint(c["a0"], c["A"], c["Q"], c["q"], c["s"], c["t"]))
    return SecondStageSpec(
        doc["cost_y"],
        cons,
        _ext(doc.get("y_lower"), ny, -np.inf, "$.second_stage.y_lower"),
        _ext(doc.get("y_upper"), ny, np.inf, "$.second_stage.y_upper"),
    )


def build_problem(doc):
    """(problem, second_stage, distribution, canonical_tag) from a problem document."""
    tag = doc.get("canonical_tag")
    can = canonical.get(tag) if tag else None
    if "problem" in doc:
        p1 = _build_first(doc["problem"])
        if can is not None and p1.to_dict() != can.problem().to_dict():
            raise SchemaError(f"$.problem: does not match the registered {tag!r} problem")
    else:
        p1 = can.problem()
    if "second_stage" in doc:
        p2 = _build_second(doc["second_stage"], p1.n_x, p1.n_delta)
        if can is not None and can.second_stage() is not None:
            if p2.to_dict() != can.second_stage().to_dict():
                raise SchemaError(f"$.second_stage: does not match the registered {tag!r} stage")
    else:
        p2 = None if can is None else can.second_stage()
    try:
        dist = distribution_from_dict(doc["distribution"])
    except ScenarioCertError as exc:
        raise SchemaError(f"$.distribution: {exc}") from exc
    if dist.n_delta != p1.n_delta:
        raise SchemaError(f"$.distribution: dimension {dist.n_delta} but n_delta={p1.n_delta}")
    return p1, p2, dist, tag


def _kind(name, r):
    return None if name is None else BoundKind.parse(name, r)


def _conf(cfg):
    """(epsilon, beta) for a design command, defaulting to beta=DEFAULT_BETA."""
    eps, beta = cfg.get("epsilon"), cfg.get("beta")
    if eps is None and beta is None:
        beta = DEFAULT_BETA
    return eps, beta


def _cmd_certify(cfg):
    m, d, r = cfg["m"], cfg["d"], cfg.get("r", 0)
    eps, beta = cfg.get("epsilon"), cfg.get("beta")
    if (eps is None) == (beta is None):
        raise _UsageError("certify needs exactly one of --epsilon and --beta")
    selected = BoundKind.parse(cfg.get("kind") or "floyd", r)
    kinds = [BoundKind.floyd(), BoundKind.exact(), BoundKind.discard(r), BoundKind.discard_unique(r)]
    out = {"m": m, "d": d, "r": r, "kind": selected.label}
    if eps is not None:
        out["epsilon"] = eps
        out["beta"] = bounds.q(selected, m, d, eps)
        out["beta_by_kind"] = {k.label: bounds.q(k, m, d, eps) for k in kinds}
        vc = {"advisory": True, "d_vc": d, "m_floor": BoundKind.vc().min_samples(d, eps)}
        vc["value"] = bounds.q_vc(m, d, eps) if m >= vc["m_floor"] else None
        out["vc"] = vc
    else:
        out["beta"] = beta
        out["epsilon"] = bounds.epsilon_for(m, d, beta, selected)
        by_kind = {}
        for k in kinds + [BoundKind.vc()]:
            try:
                by_kind[k.label] = bounds.epsilon_for(m, d, beta, k)
            except InfeasibleQuery:
                by_kind[k.label] = None
        out["epsilon_by_kind"] = by_kind
    return out


def _cmd_sample_size(cfg):
    r = cfg.get("r", 0)
    kind = BoundKind.parse(cfg["kind"], r)
    m = bounds.sample_size_for(cfg["d"], cfg["epsilon"], cfg["beta"], kind)
    return {
        "m": m,
        "d": cfg["d"],
        "r": r,
        "epsilon": cfg["epsilon"],
        "beta": cfg["beta"],
        "kind": kind.label,
        "q_at_m": bounds.q(kind, m, cfg["d"], cfg["epsilon"]),
    }


def _cmd_epsilon(cfg):
    r = cfg.get("r", 0)
    kind = BoundKind.parse(cfg["kind"], r)
    eps = bounds.epsilon_for(cfg["m"], cfg["d"], cfg["beta"], kind)
    return {
        "epsilon": eps,
        "m": cfg["m"],
        "d": cfg["d"],
        "r": r,
        "beta": cfg["beta"],
        "kind": kind.label,
        "q_at_epsilon": bounds.q(kind, cfg["m"], cfg["d"], eps),
    }


def _samples(cfg):
    p1, p2, dist, tag = build_problem(cfg["problem"])
    return p1, p2, dist, tag, draw(dist, cfg["m"], cfg["seed"])


def _solution(sol):
    return {"status": sol.status, "x": sol.x.tolist(), "objective": sol.objective}


def _cmd_solve(cfg):
    p1, _, _, _, s = _samples(cfg)
    sol, rec = solve_scenario(p1, s)
    eps, beta = _conf(cfg)
    cert = certify(rec, eps, beta, _kind(cfg.get("kind"), 0), cfg.get("exact_support", False))
    return {"solution": _solution(sol), "record": rec.to_dict(), "certificate": cert.to_dict()}


def _cmd_discard(cfg):
    p1, _, _, _, s = _samples(cfg)
    r = cfg["r"]
    sol, removed, rec = discard(p1, s, r)
    eps, beta = _conf(cfg)
    cert = certify(rec, eps, beta, _kind(cfg.get("kind"), r))
    return {
        "solution": _solution(sol),
        "removed": list(removed),
        "record": rec.to_dict(),
        "certificate": cert.to_dict(),
    }


def _cmd_box(cfg):
    p1, _, _, _, s = _samples(cfg)
    eps, beta = _conf(cfg)
    sol, box, cert = solve_box_design(p1, s, eps, beta, _kind(cfg.get("kind"), 0))
    return {
        "solution": _solution(sol),
        "box": box.to_dict(),
        "box_support": sol.info["box_support"],
        "certificate": cert.to_dict(),
    }


def _cmd_box_discard(cfg):
    p1, _, _, _, s = _samples(cfg)
    eps, beta = _conf(cfg)
    sol, box, removed, cert = discard_box(p1, s, cfg["r"], eps, beta)
    return {
        "solution": _solution(sol),
        "box": box.to_dict(),
        "removed": list(removed),
        "box_support": sol.info["box_support"],
        "certificate": cert.to_dict(),
    }


def _need_stage_two(p2):
    if p2 is None:
        raise SchemaError("$.second_stage: required for cascade commands")
    return p2


def _cmd_cascade(cfg):
    p1, p2, _, _, s = _samples(cfg)
    eps, beta = _conf(cfg)
    res = solve_cascade(p1, _need_stage_two(p2), s, eps, beta, _kind(cfg.get("kind"), 0))
    return res.to_dict()


def _cmd_cascade_discard(cfg):
    p1, p2, _, _, s = _samples(cfg)
    eps, beta = _conf(cfg)
    res = discard_cascade(
        p1, _need_stage_two(p2), s, cfg["r"], cfg.get("target_stage", 2), eps, beta
    )
    return res.to_dict()


def _experiment_config(doc, m, epsilon, method, cfg):
    p1, p2, dist, tag = build_problem(doc)
    return ExperimentConfig(
        m=m,
        epsilon=epsilon,
        method=method,
        trials=cfg.get("trials", 2000),
        seed=cfg.get("seed", DEFAULT_SEED),
        r=cfg.get("r", 0),
        kind=_kind(cfg.get("kind"), cfg.get("r", 0)),
        canonical_tag=tag,
        problem=p1,
        second_stage=p2,
        distribution=dist,
        n_fresh=cfg.get("n_fresh", 100_000),
        target_stage=cfg.get("target_stage", 2),
    )


def _cmd_validate(cfg):
    ec = _experiment_config(cfg["problem"], cfg["m"], cfg["epsilon"], cfg["method"], cfg)
    return run_experiment(ec).to_dict()


def _cmd_experiment(cfg):
    runs = []
    for m, eps, method in itertools.product(cfg["m"], cfg["epsilon"], cfg["method"]):
        ec = _experiment_config(cfg["problem"], m, eps, method, cfg)
        runs.append(run_experiment(ec).to_dict())
    return {"runs": runs, "verdicts": [r["verdict"] for r in runs]}


COMMANDS = {
    "certify": _cmd_certify,
    "sample-size": _cmd_sample_size,
    "epsilon": _cmd_epsilon,
    "solve": _cmd_solve,
    "discard": _cmd_discard,
    "box": _cmd_box,
    "box-discard": _cmd_box_discard,
    "cascade": _cmd_cascade,
    "cascade-discard": _cmd_cascade_discard,
    "validate": _cmd_validate,
    "experiment": _cmd_experiment,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False)


def _run(command, cfg):
    return json.loads(_dumps(COMMANDS[command](cfg)))


def _failed(command, result):
    if command == "validate":
        return result["verdict"] == FAIL
    if command == "experiment":
        return FAIL in result["verdicts"]
    return False


def _diff(a, b, path="$"):
    if isinstance(a, dict) and isinstance(b, dict):
        out = []
        for k in sorted(set(a) | set(b)):
            out += _diff(a.get(k), b.get(k), f"{path}.{k}")
        return out
    if isinstance(a, list) and isinstance(b, list) and len(a) == len(b):
        out = []
        for i, (x, y) in enumerate(zip(a, b)):
            out += _diff(x, y, f"{path}[{i}]")
        return out
    return [] if a == b else [path]


def _replay(path):
    report = _read_json(path)
    _validate(report, "report")
    if report["command"] not in COMMANDS:
        raise SchemaError(f"$.command: unknown command {report['command']!r}")
    again = _run(report["command"], report["config"])
    diffs = _diff(report["result"], again, "$.result")
    return {"report": str(path), "command": report["command"], "identical": not diffs, "differences": diffs}


def _add_conf(p, kind_default=None):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--epsilon", type=float, help="violation level; beta is computed")
    g.add_argument("--beta", type=float, help="confidence level; epsilon is computed")
    p.add_argument("--kind", choices=KIND_CHOICES, default=kind_default)


def _add_design(sub, name, help, with_r=False):
    p = sub.add_parser(name, help=help)
    p.add_argument("problem_file")
    p.add_argument("--m", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    if with_r:
        p.add_argument("--r", type=int, required=True, help="samples to discard")
    return p


def build_parser():
    parser = _Parser(prog="scenario-cert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("certify", help="evaluate every bound kind side by side")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--r", type=int, default=0)
    _add_conf(p, "floyd")

    p = sub.add_parser("sample-size", help="smallest m meeting (epsilon, beta)")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--kind", choices=KIND_CHOICES + ("vc",), required=True)
    p.add_argument("--r", type=int, default=0)

    p = sub.add_parser("epsilon", help="smallest epsilon certified at confidence beta")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--kind", choices=KIND_CHOICES + ("vc",), required=True)
    p.add_argument("--r", type=int, default=0)

    p = _add_design(sub, "solve", "scenario program with certificate")
    _add_conf(p)
    p.add_argument("--exact-support", action="store_true",
                   help="assert exactly d support constraints (exact kind only)")
    p = _add_design(sub, "discard", "greedy sampling-and-discarding", with_r=True)
    _add_conf(p)
    p = _add_design(sub, "box", "robust design over the fitted box")
    _add_conf(p)
    p = _add_design(sub, "box-discard", "box design with facet-sample removal", with_r=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--epsilon", type=float)
    g.add_argument("--beta", type=float)
    p = _add_design(sub, "cascade", "two-stage cascade on shared samples")
    _add_conf(p)
    p = _add_design(sub, "cascade-discard", "cascade with greedy removal", with_r=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--epsilon", type=float)
    g.add_argument("--beta", type=float)
    p.add_argument("--target-stage", type=int, choices=(1, 2), default=2)

    p = sub.add_parser("validate", help="repeated-trial check of a certificate")
    p.add_argument("problem_file")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--method", choices=canonical.METHODS, default="scenario")
    p.add_argument("--r", type=int, default=0)
    p.add_argument("--kind", choices=KIND_CHOICES)
    p.add_argument("--n-fresh", type=int, default=100_000)
    p.add_argument("--target-stage", type=int, choices=(1, 2), default=2)

    p = sub.add_parser("experiment", help="grid of validation runs from a config file")
    p.add_argument("config_file")

    p = sub.add_parser("replay", help="rerun a report and compare results")
    p.add_argument("report_file")
    return parser


def _config_from_args(args):
    cfg = {k: v for k, v in vars(args).items() if k not in ("command", "problem_file", "config_file")}
    if getattr(args, "problem_file", None) is not None:
        cfg["problem"] = load_problem(args.problem_file)
    if args.command == "experiment":
        grid = _read_json(args.config_file)
        _validate(grid, "experiment")
        src = grid["problem_file"]
        if isinstance(src, str):
            src = Path(args.config_file).parent / src
            doc = load_problem(src)
        else:
            _validate(src, "problem")
            build_problem(src)
            doc = src
        cfg = {k: v for k, v in grid.items() if k not in ("problem_file", "schema_version")}
        cfg["problem"] = doc
    return cfg


def main(argv=None):
    """Run the command line; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.command == "replay":
            out = _replay(args.report_file)
            print(_dumps(out))
            return 0 if out["identical"] else ValidationFailed.exit_code
        cfg = _config_from_args(args)
        result = _run(args.command, cfg)
        report = {
            "schema_version": SCHEMA_VERSION,
            "command": args.command,
            "config": cfg,
            "result": result,
            "generator": GENERATOR,
            "package_version": __version__,
            "generated_at": datetime.now(timezone.utc).isoformat(),
        }
        print(_dumps(report))
        if _failed(args.command, result):
            print(f"scenario-cert: validation failed for {args.command}", file=sys.stderr)
            return ValidationFailed.exit_code
        return 0
    except ScenarioCertError as exc:
        prefix = "" if isinstance(exc, _UsageError) else "scenario-cert: error: "
        print(f"{prefix}{exc}", file=sys.stderr)
        return exc.exit_code
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
