"""Command-line entry point.

    demiclosure demo {zarantonello,counterexample,svaiter,feasibility} [flags]
    demiclosure solve --config PATH
    demiclosure consensus --config PATH
    demiclosure check --config PATH

Exit status: 0 on pass/convergence, 2 on a failed certificate or
non-convergence, 1 on usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from . import serialization
from .demiclosedness import (GraphSequence, OrthogonalityError, Tolerances, classical_certificate,
                             firm_principle_certificate, multi_firm_certificate,
                             multi_nonexp_certificate, nonexp_principle_certificate,
                             theorem22_certificate)
from .experiments import (DEFAULT_SEED, ExperimentConfig, feasibility_demo_run, remark14_run,
                          svaiter_shadow_run, zarantonello_run)
from .hilbert import AffineSubspace, DimensionError
from .operators import (Affine, Ball, Box, OperatorMap, averaged_map, complement_map,
                        identity_map, operator_from_spec, projector_map, reflector_map,
                        resolvent_map, scaling_map, set_from_spec)
from .splitting import (DRProblem, asymptotic_regularity_check, consensus_solve, dr_iterate,
                        dr_operator_map)

log = logging.getLogger("demiclosure")

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2

COMMANDS = ("demo", "solve", "consensus", "check")
DEMOS = ("zarantonello", "counterexample", "svaiter", "feasibility")
CERTIFICATES = ("theorem22", "firm", "nonexp", "classical", "multi_firm", "multi_nonexp")
FORMATS = ("json", "csv", "both")


class ConfigError(ValueError):
    """Invalid configuration document."""


# -- schema ---------------------------------------------------------------------

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}
_MAT = {"type": "array", "items": _VEC, "minItems": 1}
_SEQ = {"type": "array", "items": _VEC, "minItems": 1}


def _variant(kind: str, props: dict, required=()) -> dict:
    return {
        "if": {"properties": {"kind": {"const": kind}}, "required": ["kind"]},
        "then": {
            "properties": {"kind": {"const": kind}, **props},
            "required": ["kind", *required],
            "additionalProperties": False,
        },
    }


def _tagged(kinds: dict) -> dict:
    return {
        "type": "object",
        "required": ["kind"],
        "properties": {"kind": {"enum": list(kinds)}},
        "allOf": [_variant(k, *v) for k, v in kinds.items()],
    }


SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$defs": {
        "set": _tagged({
            "ball": ({"center": _VEC, "radius": {"type": "number", "exclusiveMinimum": 0}},
                     ["center", "radius"]),
            "box": ({"lower": _VEC, "upper": _VEC}, ["lower", "upper"]),
            "affine": ({"anchor": _VEC, "basis": {"type": "array", "items": _VEC}}, ["anchor"]),
            "halfspace": ({"normal": _VEC, "offset": _NUM}, ["normal", "offset"]),
            "diagonal": ({"m": {"type": "integer", "minimum": 2}, "d": {"type": "integer", "minimum": 1}},
                         ["m", "d"]),
        }),
        "operator": _tagged({
            "zero": ({"dim": {"type": "integer", "minimum": 1}},),
            "linear": ({"matrix": _MAT}, ["matrix"]),
            "normal_cone": ({"set": {"$ref": "#/$defs/set"}}, ["set"]),
            "abs_sum": ({"weight": {"type": "number", "exclusiveMinimum": 0},
                         "dim": {"type": "integer", "minimum": 1}},),
            "quadratic": ({"Q": _MAT, "b": _VEC}, ["Q"]),
        }),
        "map": _tagged({
            "identity": ({},),
            "scale": ({"factor": _NUM}, ["factor"]),
            "resolvent": ({"operator": {"$ref": "#/$defs/operator"}}, ["operator"]),
            "reflector": ({"operator": {"$ref": "#/$defs/operator"}}, ["operator"]),
            "projector": ({"set": {"$ref": "#/$defs/set"}}, ["set"]),
            "complement": ({"map": {"$ref": "#/$defs/map"}}, ["map"]),
            "average": ({"map": {"$ref": "#/$defs/map"}}, ["map"]),
            "dr": ({"A": {"$ref": "#/$defs/operator"}, "B": {"$ref": "#/$defs/operator"}}, ["A", "B"]),
        }),
        "subspace": {
            "type": "object",
            "properties": {"anchor": _VEC, "basis": {"type": "array", "items": _VEC}},
            "required": ["anchor"],
            "additionalProperties": False,
        },
        "check": {
            "type": "object",
            "properties": {
                "certificate": {"enum": list(CERTIFICATES)},
                "maps": {"type": "array", "items": {"$ref": "#/$defs/map"}, "minItems": 1},
                "operator": {"$ref": "#/$defs/operator"},
                "sequences": {"type": "array", "items": _SEQ, "minItems": 1},
                "graph": {
                    "type": "object",
                    "properties": {"x": _SEQ, "u": _SEQ},
                    "required": ["x", "u"],
                    "additionalProperties": False,
                },
                "data": {"type": "string"},
                "C": {"$ref": "#/$defs/subspace"},
                "D": {"$ref": "#/$defs/subspace"},
                "x_strong": _VEC,
            },
            "required": ["certificate"],
            "additionalProperties": False,
        },
    },
    "type": "object",
    "properties": {
        "version": {"const": 1},
        "command": {"enum": list(COMMANDS)},
        "demo": {"enum": list(DEMOS)},
        "operators": {"type": "array", "items": {"$ref": "#/$defs/operator"}, "minItems": 1},
        "sets": {"type": "array", "items": {"$ref": "#/$defs/set"}, "minItems": 2},
        "z0": _VEC,
        "n": {"type": "integer", "minimum": 1},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "max_iter": {"type": "integer", "minimum": 1},
        "hyp_tol": {"type": "number", "exclusiveMinimum": 0},
        "concl_tol": {"type": "number", "exclusiveMinimum": 0},
        "window": {"type": "integer", "minimum": 1},
        "probes": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "out": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "format": {"enum": list(FORMATS)},
        "check": {"$ref": "#/$defs/check"},
    },
    "required": ["version", "command"],
    "additionalProperties": False,
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


@dataclass
class RunConfig:
    command: str
    version: int = 1
    demo: str | None = None
    operators: list[dict] | None = None
    sets: list[dict] | None = None
    z0: list[float] | None = None
    n: int = 1000
    tol: float = 1e-10
    max_iter: int = 100_000
    hyp_tol: float = 1e-6
    concl_tol: float = 1e-6
    window: int | None = None
    probes: list[int] | None = None
    out: str | None = None
    seed: int = DEFAULT_SEED
    format: str = "both"
    check: dict[str, Any] | None = field(default=None)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def experiment_config(self) -> ExperimentConfig:
        return ExperimentConfig(tol=self.tol, max_iter=self.max_iter,
                                window=64 if self.window is None else self.window,
                                hyp_tol=self.hyp_tol, concl_tol=self.concl_tol,
                                probes=self.probes, seed=self.seed)

    def tolerances(self) -> Tolerances:
        return Tolerances(self.hyp_tol, self.concl_tol, self.window, self.probes)


def _where(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    return path or "<root>"


def validate(doc: Any) -> None:
    errors = list(_VALIDATOR.iter_errors(doc))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(f"schema violation at {_where(err)}: {err.message}")


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON config document; defaults are filled in."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    validate(doc)
    cfg = RunConfig(**doc)
    _semantic_checks(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _semantic_checks(cfg: RunConfig) -> None:
    if cfg.command == "demo" and cfg.demo is None:
        raise ConfigError("field 'demo' is required when command is 'demo'")
    if cfg.command == "solve" and (cfg.operators is None or len(cfg.operators) != 2):
        raise ConfigError("field 'operators' must list exactly two operators for 'solve'")
    if cfg.command == "consensus" and (cfg.operators is None or len(cfg.operators) < 2):
        raise ConfigError("field 'operators' must list at least two operators for 'consensus'")
    if cfg.command == "check" and cfg.check is None:
        raise ConfigError("field 'check' is required when command is 'check'")
    # build everything once so payload errors surface as config errors
    for i, spec in enumerate(cfg.operators or []):
        _build(operator_from_spec, spec, f"operators.{i}")
    for i, spec in enumerate(cfg.sets or []):
        _build(set_from_spec, spec, f"sets.{i}")


def _build(factory, spec, where: str):
    try:
        return factory(spec)
    except (ValueError, DimensionError) as exc:
        raise ConfigError(f"invalid payload at {where}: {exc}") from None


# -- map specs ------------------------------------------------------------------


def map_from_spec(spec: dict) -> OperatorMap:
    kind = spec["kind"]
    if kind == "identity":
        return identity_map()
    if kind == "scale":
        return scaling_map(spec["factor"])
    if kind == "resolvent":
        return resolvent_map(operator_from_spec(spec["operator"]))
    if kind == "reflector":
        return reflector_map(operator_from_spec(spec["operator"]))
    if kind == "projector":
        return projector_map(set_from_spec(spec["set"]))
    if kind == "complement":
        return complement_map(map_from_spec(spec["map"]))
    if kind == "average":
        return averaged_map(map_from_spec(spec["map"]))
    if kind == "dr":
        return dr_operator_map(operator_from_spec(spec["A"]), operator_from_spec(spec["B"]))
    raise ValueError(f"unknown map kind {kind!r}")


def _subspace(spec: dict | None, d: int, default: str) -> AffineSubspace:
    if spec is None:
        return AffineSubspace.full_space(d) if default == "full" else AffineSubspace.singleton(np.zeros(d))
    return AffineSubspace.from_spanning(spec["anchor"], spec.get("basis", []))


def run_check(chk: dict, tol: Tolerances, base: Path | None = None):
    """Evaluate a ``check`` block; returns a :class:`CertificateReport`."""
    chk = dict(chk)
    if "data" in chk:
        path = Path(chk.pop("data"))
        if base is not None and not path.is_absolute():
            path = base / path
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load check data {path}: {exc}") from None
        extra = set(data) - {"sequences", "graph", "x_strong"}
        if extra:
            raise ConfigError(f"unknown keys in check data: {sorted(extra)}")
        chk.update(data)
        validate({"version": 1, "command": "check", "check": chk})
    kind = chk["certificate"]
    maps = [_build(map_from_spec, s, f"check.maps.{i}") for i, s in enumerate(chk.get("maps", []))]

    if kind == "theorem22":
        if "graph" not in chk:
            raise ConfigError("theorem22 needs check.graph with x and u sequences")
        op = _build(operator_from_spec, chk["operator"], "check.operator") if "operator" in chk else None
        g = GraphSequence(chk["graph"]["x"], chk["graph"]["u"], op)
        d = g.x.shape[1]
        return theorem22_certificate(g, _subspace(chk.get("C"), d, "full"),
                                     _subspace(chk.get("D"), d, "point"), tol)

    seqs = chk.get("sequences")
    if not seqs:
        raise ConfigError(f"{kind} needs check.sequences")
    if kind in ("multi_firm", "multi_nonexp"):
        if len(maps) != len(seqs) or len(maps) < 2:
            raise ConfigError("multi-operator checks need one map per sequence and at least two of each")
        fn = multi_firm_certificate if kind == "multi_firm" else multi_nonexp_certificate
        return fn(maps, seqs, tol)
    if len(maps) != 1 or len(seqs) != 1:
        raise ConfigError(f"{kind} needs exactly one map and one sequence")
    Z = np.asarray(seqs[0], dtype=float)
    d = Z.shape[1]
    if kind == "classical":
        if "x_strong" not in chk:
            raise ConfigError("classical needs check.x_strong")
        return classical_certificate(maps[0], Z, chk["x_strong"], tol)
    C, D = _subspace(chk.get("C"), d, "full"), _subspace(chk.get("D"), d, "point")
    fn = firm_principle_certificate if kind == "firm" else nonexp_principle_certificate
    return fn(maps[0], Z, C, D, tol)


# -- dispatch -------------------------------------------------------------------


def _emit(payload: dict, cfg: RunConfig, stem: str, trace=None) -> None:
    if cfg.out:
        out = Path(cfg.out)
        if cfg.format in ("csv", "both") and trace is not None:
            payload.setdefault("artifacts", []).append(
                str(serialization.write_trace_csv(out / f"{stem}_trace.csv", trace)))
        if cfg.format in ("json", "both"):
            path = out / f"{stem}.json"
            payload.setdefault("artifacts", []).append(str(path))
            serialization.write_json(path, payload)
    print(serialization.dumps(payload))


def _demo(cfg: RunConfig) -> int:
    ecfg = cfg.experiment_config()
    if cfg.demo == "zarantonello":
        res = zarantonello_run(cfg.n, cfg.probes, ecfg.window)
    elif cfg.demo == "counterexample":
        res = remark14_run(cfg.n, cfg.probes, ecfg.window)
    elif cfg.demo == "svaiter":
        if cfg.operators:
            if len(cfg.operators) != 2:
                raise ConfigError("the svaiter demo needs exactly two operators")
            A, B = (operator_from_spec(s) for s in cfg.operators)
        else:
            A = operator_from_spec({"kind": "normal_cone",
                                    "set": {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}})
            B = operator_from_spec({"kind": "normal_cone",
                                    "set": {"kind": "affine", "anchor": [0.5, 0.0], "basis": [[0.0, 1.0]]}})
        z0 = cfg.z0 if cfg.z0 is not None else [3.0, -2.0]
        res = svaiter_shadow_run(A, B, z0, ecfg)
    else:
        if cfg.sets:
            sets = [set_from_spec(s) for s in cfg.sets]
        else:
            sets = [Box([0.0], [2.0]), Box([1.0], [3.0]), Box([1.5], [2.5])]
        res = feasibility_demo_run(sets, cfg.z0, ecfg)
    if cfg.out:
        res.write(cfg.out, cfg.format)
    print(serialization.dumps(res.to_dict()))
    return EXIT_OK if res.ok else EXIT_FAILED


def _solve(cfg: RunConfig) -> int:
    A, B = (operator_from_spec(s) for s in cfg.operators)
    d = next((op.dim for op in (A, B) if op.dim is not None), None)
    z0 = cfg.z0 if cfg.z0 is not None else np.zeros(d or 1)
    p = DRProblem(A, B, z0, tol=cfg.tol, max_iter=cfg.max_iter, probe_indices=cfg.probes)
    trace, report = dr_iterate(p)
    reg = asymptotic_regularity_check(trace, cfg.tol) if len(trace) >= 2 else None
    payload = {"command": "solve", "report": report.to_dict(),
               "asymptotic_regularity": None if reg is None else {"passed": reg.passed, "margin": reg.margin}}
    _emit(payload, cfg, "solve", trace)
    return EXIT_OK if report.converged else EXIT_FAILED


def _consensus(cfg: RunConfig) -> int:
    ops = [operator_from_spec(s) for s in cfg.operators]
    res = consensus_solve(ops, cfg.z0, tol=cfg.tol, max_iter=cfg.max_iter, probe_indices=cfg.probes)
    payload = {"command": "consensus", "point": res.point, "diagonal_gap": res.diagonal_gap,
               "report": res.report.to_dict()}
    _emit(payload, cfg, "consensus", res.trace)
    return EXIT_OK if res.report.converged else EXIT_FAILED


def _check(cfg: RunConfig, base: Path | None) -> int:
    try:
        report = run_check(cfg.check, cfg.tolerances(), base)
    except (OrthogonalityError, DimensionError, IndexError) as exc:
        raise ConfigError(str(exc)) from None
    _emit({"command": "check", **report.to_dict()}, cfg, "check")
    return EXIT_OK if report.passed else EXIT_FAILED


def dispatch(cfg: RunConfig, base: Path | None = None) -> int:
    """Run ``cfg``; returns the process exit status."""
    if cfg.command == "demo":
        return _demo(cfg)
    if cfg.command == "solve":
        return _solve(cfg)
    if cfg.command == "consensus":
        return _consensus(cfg)
    return _check(cfg, base)


# -- argument parsing -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _probes(text: str) -> list[int]:
    try:
        out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if any(k < 0 for k in out):
        raise argparse.ArgumentTypeError("probe indices must be non-negative")
    return out


def _hex(text: str) -> int:
    try:
        return int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a hexadecimal seed, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--out", help="output directory for JSON/CSV artifacts")
    common.add_argument("--n", type=int, help="sequence length for the l2 demos")
    common.add_argument("--tol", type=float, help="stopping tolerance on ||z - Tz||")
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--probes", type=_probes, help="probe coordinates, e.g. 0,1,2")
    common.add_argument("--seed", type=_hex, help="random seed in hex (default 5EED)")
    common.add_argument("--format", choices=FORMATS)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="demiclosure", description=__doc__.splitlines()[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    demo = sub.add_parser("demo", parents=[common], help="canned experiments")
    demo.add_argument("demo", choices=DEMOS)
    sub.add_parser("solve", parents=[common], help="Douglas-Rachford on two operators")
    sub.add_parser("consensus", parents=[common], help="product-space lift of m operators")
    sub.add_parser("check", parents=[common], help="certificate over recorded sequences")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        cfg = load_config(args.config)
        if cfg.command != args.command:
            raise ConfigError(f"config command {cfg.command!r} does not match subcommand {args.command!r}")
    elif args.command == "demo":
        cfg = RunConfig(command="demo")
    else:
        raise ConfigError(f"'{args.command}' requires --config")
    if args.command == "demo":
        cfg.demo = args.demo
    for name in ("out", "n", "tol", "max_iter", "probes", "seed", "format"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    validate(cfg.to_dict())
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        base = args.config.parent if args.config is not None else None
        return dispatch(cfg, base)
    except ConfigError as exc:
        print(f"demiclosure: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
