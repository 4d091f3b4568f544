"""``qtensor`` command line: tensors | verify | qcheck | fuzz.

Exit codes: 0 pass, 1 mathematical failure or violation, 2 usage/config error.
Every report body is a pure function of the resolved config and master seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .catalog import (
    CATALOG, SCALAR_FIELDS, DomainError, ModelError, catalog_get, conformal, default_rho, from_spec,
    fubini_study, flat, polynomial_random, scalar_field,
)
from .identities import (
    IDENTITIES, IdentityReport, PreconditionError, check_bismut_metric, check_bismut_two_routes,
    check_bochner, check_commutation_identity, check_conformal_lemma, check_eigenspace_torsion,
    check_kahler_reduction, check_q_bismut_proposition, check_q_symmetry,
)
from .jets import JetError
from .positivity import PositivityCertificate, q_nonneg_certify, qob_check_kahler
from .tensors import Geometry

SEED_ENV = "QTENSOR_SEED"
FUZZ_IDENTITIES = ("proposition", "bismut_two_route", "bismut_metric", "commutation", "conformal", "q_symmetry")
MIN_ORDER = 2

# tensor dump roles: name -> (Geometry attribute, index layout)
ROLES = {
    "Gamma": ("gamma", "[k,i,j] = Gamma^j_{k i}"),
    "T": ("torsion_low", "[i,j,k] = T_{i j kbar}"),
    "R": ("chern", "[i,j,k,l] = R_{i jbar k lbar}"),
    "Q": ("q", "[i,j,k,l] = Q_{i jbar k lbar}"),
    "B": ("bismut_direct", "[i,j,k,l] = B_{i jbar k lbar}"),
    "DdbarOmega": ("ddbar_omega", "[i,j,k,l] = (ddbar omega)_{i jbar k lbar} block"),
}

DEFAULTS = {
    "model": None, "dim": None, "params": None, "seed": None, "points": None, "point_list": None,
    "frames": 1000, "order": MIN_ORDER, "tol": None, "out": None, "format": "json",
    "identity": None, "all": False, "base": None, "f": None, "cases": 200, "kind": "q_nonneg",
    "replay": None, "replay_out": None,
}


class UsageError(Exception):
    """Bad flags, config or model specification (exit code 2)."""


@dataclass
class RunConfig:
    command: str
    model: str | None = None
    dim: int | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    points: int | None = None
    point_list: list | None = None
    frames: int = 1000
    order: int = MIN_ORDER
    tol: float | None = None
    out: str | None = None
    format: str = "json"
    identity: list = field(default_factory=list)
    all: bool = False
    base: str | None = None
    f: str | None = None
    cases: int = 200
    kind: str = "q_nonneg"
    replay: str | None = None
    replay_out: str | None = None

    def validate(self) -> None:
        if self.order < MIN_ORDER:
            raise UsageError(f"--order {self.order} is too low: curvature needs metric jets of order >= {MIN_ORDER}")
        for name in ("points", "frames", "cases"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise UsageError(f"--{name} must be positive")
        if self.tol is not None and not self.tol > 0:
            raise UsageError("--tol must be positive")
        if self.format not in ("json", "csv"):
            raise UsageError("--format must be json or csv")
        for ident in self.identity:
            if ident not in IDENTITIES:
                raise UsageError(f"unknown identity {ident!r}; choose from {list(IDENTITIES)}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through the JSON error contract
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtensor", description="Hermitian curvature tensors, identity checks and Q-positivity.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    common = _Parser(add_help=False)
    S = argparse.SUPPRESS  # unset flags stay absent so config files can fill them
    common.add_argument("--config", help="JSON config file; flags win on conflict", default=S)
    common.add_argument("--model", choices=CATALOG, default=S)
    common.add_argument("--dim", type=int, default=S)
    common.add_argument("--params", type=json.loads, help="model parameters as a JSON object", default=S)
    common.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)", default=S)
    common.add_argument("--points", type=int, help="number of sampled points", default=S)
    common.add_argument("--point-list", dest="point_list", type=json.loads, default=S,
                        help="explicit points as JSON [[[re, im], ...], ...]")
    common.add_argument("--order", type=int, help="metric jet order (>= 2)", default=S)
    common.add_argument("--tol", type=float, default=S)
    common.add_argument("--out", help="output path (default stdout)", default=S)
    common.add_argument("--format", choices=("json", "csv"), default=S)

    sub.add_parser("tensors", parents=[common], help="dump Gamma, T, R, Q, B and the ddbar omega block")
    v = sub.add_parser("verify", parents=[common], help="run identity checks")
    v.add_argument("--identity", action="append", default=S, help=f"one of {', '.join(IDENTITIES)}")
    v.add_argument("--all", action="store_true", default=S)
    v.add_argument("--base", help="Kahler base model for the conformal identity", default=S)
    v.add_argument("--f", help=f"conformal factor, one of {', '.join(sorted(SCALAR_FIELDS))}", default=S)
    q = sub.add_parser("qcheck", parents=[common], help="Q-nonnegativity certificate")
    q.add_argument("--frames", type=int, default=S)
    q.add_argument("--kind", choices=("q_nonneg", "qob"), default=S)
    q.add_argument("--replay", help="re-run a stored certificate", default=S)
    fz = sub.add_parser("fuzz", parents=[common], help="fuzz identities over random models")
    fz.add_argument("--identity", action="append", default=S, help=f"one of {', '.join(FUZZ_IDENTITIES)}")
    fz.add_argument("--cases", type=int, default=S)
    fz.add_argument("--replay", help="re-run a replay file", default=S)
    fz.add_argument("--replay-out", dest="replay_out", default=S, help="where failing cases are written")
    return parser


def _env_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"{SEED_ENV}={raw!r} is not an integer") from exc


def resolve_config(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    merged = dict(DEFAULTS)
    path = ns.pop("config", None)
    if path is not None:
        try:
            with open(path) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(DEFAULTS) - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        merged.update({k: v for k, v in file_cfg.items() if k != "command"})
    merged.update(ns)
    if merged["seed"] is None:
        merged["seed"] = _env_seed()
    if merged["params"] is None:
        merged["params"] = {}
    if not isinstance(merged["params"], dict):
        raise UsageError("--params must be a JSON object")
    ident = merged["identity"]
    merged["identity"] = [] if ident is None else ([ident] if isinstance(ident, str) else list(ident))
    merged["identity"] = [s for item in merged["identity"] for s in item.split(",") if s]
    try:
        cfg = RunConfig(command=command, **merged)
        for name in ("dim", "seed", "points", "frames", "order", "cases"):
            v = getattr(cfg, name)
            if v is not None:
                setattr(cfg, name, int(v))
        if cfg.tol is not None:
            cfg.tol = float(cfg.tol)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad config value: {exc}") from exc
    cfg.validate()
    return cfg


# -- output -------------------------------------------------------------------


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return buf.getvalue()


def _emit(cfg: RunConfig, body: dict, rows: list[dict]) -> None:
    text = _to_csv(rows) if cfg.format == "csv" else dumps(body)
    if cfg.out is None:
        sys.stdout.write(text)
        return
    try:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {cfg.out}: {exc}") from exc


def error_json(kind: str, message: str) -> dict:
    return {"error": {"type": kind, "message": message, "exit_code": 2}}


# -- shared helpers -------------------------------------------------------------


def _model(cfg: RunConfig):
    if cfg.model is None:
        raise UsageError("--model is required")
    default_dim = None if cfg.model in ("conformal", "product") else 2
    seed = cfg.seed if cfg.model == "polynomial_random" else None
    return catalog_get(cfg.model, cfg.dim if cfg.dim is not None else default_dim, cfg.params, seed)


def _points(cfg: RunConfig, model, default_count: int) -> list[np.ndarray]:
    if cfg.point_list is not None:
        try:
            pts = [np.array([complex(a, b) for a, b in p]) for p in cfg.point_list]
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad --point-list: {exc}") from exc
        for p in pts:
            if not model.is_valid(p):
                raise UsageError(f"point {p.tolist()} is outside the domain of {model.name}")
        return pts
    return model.sample_points(cfg.points or default_count, cfg.seed)


def _pjson(p) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(p, dtype=complex)]


def _entries(a: np.ndarray) -> list:
    return [[list(idx), float(v.real), float(v.imag)] for idx, v in np.ndenumerate(a)]


# -- tensors -----------------------------------------------------------------------


def _role_value(geo: Geometry, attr: str) -> np.ndarray:
    return geo.torsion.low if attr == "torsion_low" else getattr(geo, attr)


def cmd_tensors(cfg: RunConfig) -> int:
    model = _model(cfg)
    records, rows = [], []
    for idx, p in enumerate(_points(cfg, model, 1)):
        geo = Geometry(model.jet(p, cfg.order))
        tensors = {}
        for role, (attr, layout) in ROLES.items():
            a = _role_value(geo, attr)
            tensors[role] = {"layout": layout, "shape": list(a.shape),
                             "max_abs": float(np.abs(a).max()), "entries": _entries(a)}
            rows += [{"point": idx, "role": role, "index": " ".join(map(str, i)), "re": re, "im": im}
                     for i, re, im in tensors[role]["entries"]]
        records.append({"point_index": idx, "point": _pjson(p), "tensors": tensors})
    _emit(cfg, {"command": "tensors", "model": model.spec(), "order": cfg.order, "records": records}, rows)
    return 0


# -- verify -------------------------------------------------------------------------


def _conformal_parts(cfg: RunConfig, model):
    if model is not None and model.name == "conformal" and cfg.base is None and cfg.f is None:
        return model.base, model.conformal_factor
    if cfg.base is not None:
        base = catalog_get(cfg.base, cfg.dim or (model.dim if model is not None else 2))
    elif model is not None and model.name != "conformal":
        if not model.kahler:
            raise PreconditionError(f"{model.name} is not Kahler; pass --base for the conformal identity")
        base = model
    else:
        base = catalog_get("flat", cfg.dim or 2)
    return base, scalar_field(cfg.f or "poly_random", base.dim, cfg.seed)


def run_identity(ident: str, model, points, tol, cfg: RunConfig) -> IdentityReport:
    """Dispatch one identity; raises PreconditionError when it does not apply."""
    kw = {} if tol is None else {"tol": tol}
    simple = {
        "proposition": check_q_bismut_proposition, "bismut_two_route": check_bismut_two_routes,
        "kahler_reduction": check_kahler_reduction, "bismut_metric": check_bismut_metric,
        "q_symmetry": check_q_symmetry,
    }
    if ident in simple:
        return simple[ident](model, points, **kw)
    if ident == "conformal":
        base, f = _conformal_parts(cfg, model)
        return check_conformal_lemma(base, f, points, **kw)
    rho, constant_trace = default_rho(model, cfg.seed)
    if ident == "commutation":
        return check_commutation_identity(model, rho, points, **kw)
    if ident == "bochner":
        if not constant_trace:
            raise PreconditionError(f"no closed constant-trace form is available for {model.name}")
        return check_bochner(model, rho, points, **kw)
    return check_eigenspace_torsion(model, rho, points, **kw)


def cmd_verify(cfg: RunConfig) -> int:
    idents = list(IDENTITIES) if cfg.all else cfg.identity
    if not idents:
        raise UsageError("give --identity NAME or --all")
    conformal_only = idents == ["conformal"] and cfg.model is None
    model = None if conformal_only else _model(cfg)
    if conformal_only:
        base, _ = _conformal_parts(cfg, None)
        points = _points(cfg, base, 20)
    else:
        points = _points(cfg, model, 20)
    reports, skipped = [], []
    for ident in idents:
        try:
            reports.append(run_identity(ident, model, points, cfg.tol, cfg))
        except PreconditionError as exc:
            if not cfg.all:
                raise UsageError(f"{ident}: {exc}") from exc
            skipped.append({"identity": ident, "reason": str(exc)})
    failing = [r for r in reports if not r.passed and not r.informational]
    body = {
        "command": "verify",
        "model": None if model is None else model.spec(),
        "seed": cfg.seed,
        "reports": [r.to_json() for r in reports],
        "skipped": skipped,
        "pass": not failing,
        "worst_offenders": [{"identity": r.identity, "max_residual": r.max_residual, "worst": r.worst}
                            for r in failing],
    }
    rows = [{"identity": r.identity, "n_points": r.n_points, "max_residual": r.max_residual,
             "tolerance": r.tolerance, "pass": r.passed, "informational": r.informational} for r in reports]
    _emit(cfg, body, rows)
    for r in failing:
        print(f"FAIL {r.identity}: residual {r.max_residual:.3e} > {r.tolerance:.1e} at {r.worst}", file=sys.stderr)
    return 1 if failing else 0


# -- qcheck -------------------------------------------------------------------------


def _cert_rows(cert: PositivityCertificate) -> list[dict]:
    return [{"kind": cert.kind, "model": cert.model["name"], "n_points": cert.n_points, "n_frames": cert.n_frames,
             "min_eigenvalue": cert.min_eigenvalue, "verdict": cert.verdict}]


def cmd_qcheck(cfg: RunConfig) -> int:
    if cfg.replay is not None:
        stored = _load_json(cfg.replay)
        try:
            model = from_spec(stored["model"])
            cfg.point_list, cfg.seed = stored["points"], int(stored["seed"])
            cfg.frames, cfg.tol, cfg.kind = int(stored["n_frames"]), float(stored["tol"]), stored["kind"]
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"malformed certificate {cfg.replay}: {exc}") from exc
    else:
        model = _model(cfg)
    points = _points(cfg, model, 100)
    run = qob_check_kahler if cfg.kind == "qob" else q_nonneg_certify
    kw = {} if cfg.tol is None else {"tol": cfg.tol}
    try:
        cert = run(model, points, n_frames=cfg.frames, seed=cfg.seed, **kw)
    except PreconditionError as exc:
        raise UsageError(str(exc)) from exc
    _emit(cfg, cert.to_json(), _cert_rows(cert))
    if cert.violated:
        print(f"violation: min eigenvalue {cert.min_eigenvalue:.6e} witness {cert.witness['lambda']}", file=sys.stderr)
    return 1 if cert.violated else 0


# -- fuzz ---------------------------------------------------------------------------


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def fuzz_case(ident: str, case_seed: int, dim: int, n_points: int, params: dict) -> dict:
    """Model and point set for one fuzz case, as a replayable record (residual not yet filled)."""
    if ident == "conformal":
        base = (flat, fubini_study)[case_seed % 2](dim)
        model = conformal(base, scalar_field("poly_random", dim, case_seed))
    else:
        model = polynomial_random(dim, int(params.get("degree", 3)), case_seed,
                                  float(params.get("amplitude", 0.05)))
    points = model.sample_points(n_points, case_seed)
    return {"identity": ident, "case_seed": case_seed, "model": model.spec(), "points": [_pjson(p) for p in points]}


def evaluate_case(record: dict, tol: float | None) -> dict:
    ident = record["identity"]
    model = from_spec(record["model"])
    points = [np.array([complex(a, b) for a, b in p]) for p in record["points"]]
    cfg = RunConfig(command="fuzz", seed=int(record["case_seed"]))
    rep = run_identity(ident, model, points, tol, cfg)
    out = dict(record)
    out.update({"residual": rep.max_residual, "tolerance": rep.tolerance, "pass": rep.passed,
                "informational": rep.informational, "worst": rep.worst})
    return out


def _failed(rec: dict) -> bool:
    return not rec["pass"] and not rec["informational"]


def cmd_fuzz(cfg: RunConfig) -> int:
    if cfg.replay is not None:
        stored = _load_json(cfg.replay)
        if not isinstance(stored, list):
            raise UsageError("replay file must hold a JSON list of case records")
        try:
            results = [evaluate_case({k: r[k] for k in ("identity", "case_seed", "model", "points")}, r.get("tolerance"))
                       for r in stored]
        except (KeyError, TypeError, ModelError) as exc:
            raise UsageError(f"malformed replay record: {exc}") from exc
        text = dumps(results)
        if cfg.out is None:
            sys.stdout.write(text)
        else:
            with open(cfg.out, "w") as fh:
                fh.write(text)
        return 1 if any(_failed(r) for r in results) else 0

    idents = cfg.identity or ["proposition"]
    for ident in idents:
        if ident not in FUZZ_IDENTITIES:
            raise UsageError(f"identity {ident!r} cannot be fuzzed; choose from {list(FUZZ_IDENTITIES)}")
    dim = cfg.dim or 2
    if not 1 <= dim <= 4:
        raise UsageError("fuzz dimension must be between 1 and 4")
    results = []
    for ident in idents:
        for c in range(cfg.cases):
            case = fuzz_case(ident, cfg.seed + c, dim, cfg.points or 3, cfg.params)
            results.append(evaluate_case(case, cfg.tol))
    failures = [r for r in results if _failed(r)]
    replay_path = cfg.replay_out or ((cfg.out + ".replay.json") if cfg.out else "fuzz_replay.json")
    try:
        with open(replay_path, "w") as fh:
            fh.write(dumps(failures))
    except OSError as exc:
        raise UsageError(f"cannot write {replay_path}: {exc}") from exc
    summary = {}
    for ident in idents:
        res = [r["residual"] for r in results if r["identity"] == ident]
        summary[ident] = {"cases": len(res), "max_residual": max(res),
                          "failures": sum(1 for r in failures if r["identity"] == ident)}
    body = {"command": "fuzz", "seed": cfg.seed, "dim": dim, "identities": summary,
            "failures": len(failures), "replay_file": replay_path, "pass": not failures}
    rows = [{"identity": r["identity"], "case_seed": r["case_seed"], "residual": r["residual"],
             "tolerance": r["tolerance"], "pass": r["pass"]} for r in results]
    _emit(cfg, body, rows)
    return 1 if failures else 0


COMMANDS = {"tensors": cmd_tensors, "verify": cmd_verify, "qcheck": cmd_qcheck, "fuzz": cmd_fuzz}


def main(argv=None) -> int:
    try:
        cfg = resolve_config(sys.argv[1:] if argv is None else argv)
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        kind, msg = "usage", str(exc)
    except (ModelError, DomainError, JetError, json.JSONDecodeError) as exc:
        kind, msg = type(exc).__name__, str(exc)
    sys.stdout.write(dumps(error_json(kind, msg)))
    return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
