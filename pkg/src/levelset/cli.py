"""Command-line front end.

Exit codes: 0 when every verdict passes, 1 when one fails, 2 for usage or
configuration errors (nothing is written in that case).
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import tomli
import tomli_w

from . import __version__
from . import experiments as ex
from .errors import LevelSetError, UsageError
from .functions import Zero, parse_function, unit_ball_volume
from .measure import (
    LevelSetQuery,
    exact_single_measure,
    grid_bruteforce_measure,
    radial_quadrature_measure,
)
from .montecarlo import bounding_region, estimate_measure
from .report import Report, Verdict, sweep_csv, write_report
from .weaknorm import weak_quasinorm_p_power

COMMANDS = (
    "catalog", "measure", "sweep", "weaknorm", "verify-heart", "envelope", "gy",
    "sandwich", "corollary", "truncation", "all",
)
METHODS = ("auto", "exact", "quadrature", "grid", "montecarlo")


@dataclass
class RunConfig:
    command: Optional[str] = None
    u: Optional[str] = None
    v: Optional[str] = None
    p: Optional[float] = None
    lam: Optional[float] = None
    lambdas: Optional[list] = None
    samples: Optional[int] = None
    seed: Optional[int] = None
    workers: Optional[int] = None
    R: Optional[float] = None
    R_schedule: Optional[list] = None
    method: Optional[str] = None
    grid_h: Optional[float] = None
    refine_rounds: Optional[int] = None
    experiments: Optional[list] = None
    json: Optional[str] = None
    csv: Optional[str] = None
    tolerances: dict = field(default_factory=dict)

    _FLOATS = ("p", "lam", "R", "grid_h")
    _INTS = ("samples", "seed", "workers", "refine_rounds")

    def to_dict(self):
        """Plain dict without unset (None) entries; TOML has no null."""
        out = {}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if val is None or (f.name == "tolerances" and not val):
                continue
            out[f.name] = list(val) if isinstance(val, tuple) else val
        return out

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise UsageError(f"unknown config keys: {unknown}")
        d = dict(d)
        for k in cls._FLOATS:
            if k in d:
                d[k] = _as_float(d[k], k)
        for k in cls._INTS:
            if k in d:
                d[k] = _as_int(d[k], k)
        for k in ("lambdas", "R_schedule"):
            if k in d:
                if not isinstance(d[k], list):
                    raise UsageError(f"{k} must be a list of numbers")
                d[k] = [_as_float(t, k) for t in d[k]]
        if "experiments" in d and not isinstance(d["experiments"], list):
            raise UsageError("experiments must be a list of names")
        tol = d.get("tolerances", {})
        if not isinstance(tol, dict):
            raise UsageError("tolerances must be a table")
        valid = {f.name for f in dataclasses.fields(ex.Tolerances)}
        bad = sorted(set(tol) - valid)
        if bad:
            raise UsageError(f"unknown tolerance keys {bad}; valid: {sorted(valid)}")
        d["tolerances"] = {k: _as_float(v, k) for k, v in tol.items()}
        return cls(**d)

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            data = tomli.loads(text)
        except tomli.TOMLDecodeError as e:
            raise UsageError(f"config is not valid TOML: {e}") from None
        return cls.from_dict(data)

    def merged(self, other: "RunConfig") -> "RunConfig":
        """Values set in ``other`` override this config's."""
        out = dataclasses.replace(self, tolerances=dict(self.tolerances))
        for f in dataclasses.fields(other):
            val = getattr(other, f.name)
            if f.name == "tolerances":
                out.tolerances.update(val)
            elif val is not None:
                setattr(out, f.name, val)
        return out


def _as_float(x, name):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise UsageError(f"{name} must be a number, got {x!r}")
    return float(x)


def _as_int(x, name):
    if isinstance(x, bool) or not isinstance(x, int):
        raise UsageError(f"{name} must be an integer, got {x!r}")
    return int(x)


# ------------------------------------------------------------------ parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage().strip()}")


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    return vals


def _name_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="levelset", description="Level-set measure verification toolkit.")
    parser.add_argument("--version", action="version", version=f"levelset {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML file with RunConfig keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--workers", type=int, help="overrides LEVELSET_THREADS")
    common.add_argument("--json", help="write the JSON report here ('-' for stdout)")
    common.add_argument("--csv", help="write the sweep CSV here")
    common.add_argument("--tol", action="append", default=[], metavar="KEY=VALUE",
                        help="tolerance override, e.g. sigmas=4 or limit_rel=0.01")
    fn = _Parser(add_help=False)
    fn.add_argument("--u", help="function spec for u")
    fn.add_argument("--v", help="function spec for v (default: zero)")
    fn.add_argument("--p", type=float)

    def add(name, parents, help_text):
        return sub.add_parser(name, parents=parents, help=help_text)

    c = add("catalog", [common], "list catalog kinds, or show norms of --u")
    c.add_argument("--u")
    c.add_argument("--p", type=float)
    m = add("measure", [common, fn], "measure of E_lambda for one lambda")
    m.add_argument("--lambda", dest="lam", type=float)
    m.add_argument("--method", choices=METHODS)
    m.add_argument("--grid-h", dest="grid_h", type=float)
    for name, text in (("sweep", "limit of lambda^p |E_lambda| by extrapolation"),
                       ("gy", "limit for v = -u"),
                       ("verify-heart", "lambda^p |E_lambda| = kappa ||u||^p with v = 0"),
                       ("envelope", "values inside the analytic envelope")):
        s = add(name, [common, fn], text)
        s.add_argument("--lambdas", type=_float_list)
        if name in ("envelope", "verify-heart"):
            s.add_argument("--grid-h", dest="grid_h", type=float)
        if name == "envelope":
            s.add_argument("--R", type=float)
    for name, text in (("weaknorm", "sup over lambda of lambda^p |E_lambda|"),
                       ("sandwich", "two-sided bounds on the weak quasinorm"),
                       ("corollary", "|u(x)| - |u(y)| and |u(x)| + |u(y)| forms")):
        s = add(name, [common, fn], text)
        s.add_argument("--lambdas", type=_float_list)
        s.add_argument("--refine-rounds", dest="refine_rounds", type=int)
    t = add("truncation", [common, fn], "truncation study along R -> infinity")
    t.add_argument("--R-schedule", dest="R_schedule", type=_float_list)
    a = add("all", [common], "run the acceptance suite")
    a.add_argument("--experiments", type=_name_list,
                   help="comma-separated subset of: " + ",".join(_criteria()))
    return parser


def _criteria():
    from .acceptance import CRITERIA

    return list(CRITERIA)


def _config_from_args(ns) -> RunConfig:
    base = RunConfig()
    if getattr(ns, "config", None):
        try:
            with open(ns.config, "rb") as fh:
                text = fh.read().decode("utf-8")
        except OSError as e:
            raise UsageError(f"cannot read config {ns.config}: {e.strerror}") from None
        base = RunConfig.from_toml(text)
    flags = {}
    for f in dataclasses.fields(RunConfig):
        if f.name in ("tolerances",):
            continue
        if hasattr(ns, f.name):
            flags[f.name] = getattr(ns, f.name)
    tol = {}
    for item in getattr(ns, "tol", []) or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects KEY=VALUE, got {item!r}")
        try:
            tol[key.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--tol value for {key} is not a number: {val!r}") from None
    flags["tolerances"] = tol
    flags = {k: v for k, v in flags.items() if v is not None}
    override = RunConfig.from_dict(flags)
    cfg = base.merged(override)
    if ns.command:
        cfg.command = ns.command
    return cfg


# ---------------------------------------------------------------- validation


DEFAULTS = {
    "measure": {"method": "auto", "samples": 1_000_000, "grid_h": 1e-3},
    "sweep": {"samples": 1_000_000},
    "gy": {"samples": 1_000_000},
    "verify-heart": {"lambdas": [0.1, 1.0, 10.0], "samples": 1_000_000, "grid_h": 1e-3},
    "envelope": {"samples": 1_000_000, "grid_h": 1e-3},
    "weaknorm": {"samples": 200_000, "refine_rounds": 3},
    "sandwich": {"samples": 200_000, "refine_rounds": 3},
    "corollary": {"samples": 200_000, "refine_rounds": 3},
    "truncation": {"samples": 1_000_000, "R_schedule": [2.0, 3.0, 4.0]},
}


@dataclass
class _Plan:
    cfg: RunConfig
    u: object = None
    v: object = None
    tol: ex.Tolerances = ex.DEFAULT_TOL


def _check_writable(path):
    if path is None or path == "-":
        return
    directory = os.path.dirname(os.path.abspath(path)) or "."
    if os.path.isdir(path):
        raise UsageError(f"output path {path} is a directory")
    if not os.path.isdir(directory):
        raise UsageError(f"output directory {directory} does not exist")
    if not os.access(directory, os.W_OK):
        raise UsageError(f"output directory {directory} is not writable")


def validate(cfg: RunConfig) -> _Plan:
    """Fill command defaults and check everything before any computation."""
    if cfg.command not in COMMANDS:
        raise UsageError(f"unknown or missing command {cfg.command!r}; choose from {COMMANDS}")
    for k, val in DEFAULTS.get(cfg.command, {}).items():
        if getattr(cfg, k) is None:
            setattr(cfg, k, val)
    if cfg.seed is None and cfg.command != "catalog":
        cfg.seed = 0
    plan = _Plan(cfg)
    try:
        plan.tol = ex.Tolerances(**{**ex.DEFAULT_TOL.to_dict(), **cfg.tolerances})
    except TypeError as e:
        raise UsageError(str(e)) from None
    if any(not (t > 0) for t in plan.tol.to_dict().values()):
        raise UsageError("tolerances must be positive")
    if cfg.seed is not None and not 0 <= cfg.seed < 2**64:
        raise UsageError("seed must lie in [0, 2^64)")
    if cfg.samples is not None and cfg.samples < 1:
        raise UsageError("samples must be a positive integer")
    if cfg.workers is not None and cfg.workers < 1:
        raise UsageError("workers must be a positive integer")
    if cfg.p is not None and not (cfg.p >= 1 and math.isfinite(cfg.p)):
        raise UsageError("p must be a finite number >= 1")
    if cfg.lambdas is not None:
        if not cfg.lambdas:
            raise UsageError("lambda list is empty")
        if any(not (t > 0 and math.isfinite(t)) for t in cfg.lambdas):
            raise UsageError("lambdas must be positive and finite")
    if cfg.lam is not None and not (cfg.lam > 0 and math.isfinite(cfg.lam)):
        raise UsageError("lambda must be positive and finite")
    if cfg.grid_h is not None and not cfg.grid_h > 0:
        raise UsageError("grid-h must be positive")
    if cfg.command == "all":
        if cfg.experiments is not None and not cfg.experiments:
            raise UsageError("experiment list is empty")
        unknown = [e for e in cfg.experiments or [] if e not in _criteria()]
        if unknown:
            raise UsageError(f"unknown experiments {unknown}; choose from {_criteria()}")
    needs_fn = cfg.command not in ("catalog", "all")
    if needs_fn or cfg.u is not None:
        if cfg.u is None:
            raise UsageError(f"{cfg.command} needs --u")
        plan.u = parse_function(cfg.u)
        plan.v = parse_function(cfg.v) if cfg.v is not None else Zero(plan.u.dimension)
        if plan.v.dimension != plan.u.dimension:
            raise UsageError("u and v must have the same dimension")
    if needs_fn and cfg.p is None:
        raise UsageError(f"{cfg.command} needs --p")
    if cfg.command == "measure" and cfg.lam is None:
        raise UsageError("measure needs --lambda")
    if cfg.command == "measure" and cfg.method not in METHODS:
        raise UsageError(f"method must be one of {METHODS}")
    if cfg.command in ("verify-heart",) and not plan.v.__class__ is Zero:
        raise UsageError("verify-heart takes only --u (v is zero)")
    if cfg.command in ("gy", "corollary") and cfg.v is not None:
        raise UsageError(f"{cfg.command} takes only --u")
    if cfg.R_schedule is not None and not cfg.R_schedule:
        raise UsageError("R schedule is empty")
    _check_writable(cfg.json)
    _check_writable(cfg.csv)
    return plan


# ---------------------------------------------------------------- commands


def _catalog(plan: _Plan) -> Report:
    from . import functions

    cfg = plan.cfg
    results = {"grammar": functions.__doc__.split("Spec strings")[1].split("::", 1)[1]
               .split("Omitted")[0].strip("\n")}
    if plan.u is not None:
        p = cfg.p if cfg.p is not None else 1.0
        f = plan.u
        results.update({"spec": f.to_spec(), "dimension": f.dimension, "p": p,
                        "lp_norm_p_power": f.lp_norm_p_power(p), "sup_norm": f.sup_norm(),
                        "support_radius": f.support_radius(),
                        "kappa_N": unit_ball_volume(f.dimension)})
    return Report("catalog", {}, results, [], 0.0)


def _measure(plan: _Plan) -> Report:
    cfg = plan.cfg
    q = LevelSetQuery(plan.u, plan.v, cfg.p, cfg.lam)
    method = cfg.method
    if method == "auto":
        if isinstance(plan.v, Zero):
            method = "exact"
        elif q.N <= 3 and plan.u.radial_form() is not None and plan.v.radial_form() is not None:
            method = "quadrature"
        else:
            method = "montecarlo"
    results = {"method": method}
    if method == "exact":
        mv = exact_single_measure(q)
        results.update(measure=mv.measure, error_bound=mv.error_bound)
    elif method == "quadrature":
        mv = radial_quadrature_measure(q)
        results.update(measure=mv.measure, error_bound=mv.error_bound)
    elif method == "grid":
        box = bounding_region(q.u, q.v, q.p, q.lam).required_halfwidth * (1 + 1e-9) + 1e-9
        mv = grid_bruteforce_measure(q, box, cfg.grid_h, cfg.workers)
        results.update(measure=mv.measure, error_bound=mv.error_bound, box_halfwidth=box)
    else:
        est = estimate_measure(q, cfg.samples, cfg.seed, cfg.workers)
        results.update(measure=est.value, stderr=est.stderr, region_volume=est.region_volume)
    results["lambda_p_measure"] = cfg.lam**cfg.p * results["measure"]
    return Report("measure", {}, results, [], 0.0)


def _weaknorm(plan: _Plan) -> Report:
    cfg = plan.cfg
    W = weak_quasinorm_p_power(plan.u, plan.v, cfg.p, cfg.lambdas, cfg.samples, cfg.seed,
                               cfg.refine_rounds, cfg.workers)
    slack = plan.tol.sigmas * W.stderr + 1e-9 * max(W.lower_bound_from_limit, 1.0)
    verdicts = [Verdict("dominates the small-lambda limit",
                        W.value_p_power >= W.lower_bound_from_limit - slack,
                        W.value_p_power, W.lower_bound_from_limit, slack)]
    return Report("weaknorm", {}, {
        "value_p_power": W.value_p_power, "value": W.value, "stderr": W.stderr,
        "argmax_lambda": W.argmax_lambda, "lower_bound_from_limit": W.lower_bound_from_limit,
        "profile": [list(t) for t in W.profile]}, verdicts, 0.0)


def _all(plan: _Plan) -> Report:
    from .acceptance import run_suite

    cfg = plan.cfg
    parts = run_suite(cfg.experiments, cfg.workers, cfg.seed)
    merged = ex.merge_reports("all", [r for _, _, r in parts])
    merged.results["criteria"] = [{"number": n, "title": t, "pass": r.passed}
                                  for n, t, r in parts]
    return merged


def run(plan: _Plan) -> Report:
    cfg, tol = plan.cfg, plan.tol
    c = cfg.command
    if c == "catalog":
        return _catalog(plan)
    if c == "measure":
        return _measure(plan)
    if c == "weaknorm":
        return _weaknorm(plan)
    if c == "all":
        return _all(plan)
    if c == "verify-heart":
        return ex.verify_heart(plan.u, cfg.p, cfg.lambdas, cfg.samples, cfg.seed, cfg.workers,
                               tol, cfg.grid_h)
    if c == "sweep":
        return ex.run_sweep(plan.u, plan.v, cfg.p, cfg.lambdas, cfg.samples, cfg.seed,
                            cfg.workers, tol)
    if c == "gy":
        return ex.gy_reduction(plan.u, cfg.p, cfg.lambdas, cfg.samples, cfg.seed, cfg.workers, tol)
    if c == "envelope":
        return ex.envelope_check(plan.u, plan.v, cfg.p, cfg.R, cfg.lambdas, cfg.samples,
                                 cfg.seed, cfg.workers, tol, cfg.grid_h)
    if c == "sandwich":
        return ex.sandwich_check(plan.u, plan.v, cfg.p, cfg.samples, cfg.seed, cfg.workers, tol,
                                 cfg.lambdas, cfg.refine_rounds)
    if c == "corollary":
        return ex.corollary_forms(plan.u, cfg.p, cfg.samples, cfg.seed, cfg.workers, tol,
                                  cfg.lambdas, cfg.refine_rounds)
    if c == "truncation":
        return ex.truncation_study(plan.u, plan.v, cfg.p, cfg.R_schedule, None, cfg.samples,
                                   cfg.seed, cfg.workers, tol)
    raise UsageError(f"unknown command {c}")  # pragma: no cover


def _summary(report: Report, out):
    res = report.results
    keys = ("measure", "lambda_p_measure", "method", "extrapolated_limit", "analytic_target",
            "value_p_power", "argmax_lambda", "W_p_power", "minus_p_power", "plus_p_power",
            "target", "spec", "lp_norm_p_power", "sup_norm", "support_radius")
    print(f"experiment: {report.experiment}", file=out)
    if "grammar" in res:
        print(res["grammar"], file=out)
    for k in keys:
        if k in res:
            print(f"{k}: {res[k]}", file=out)
    for row in res.get("per_lambda", []):
        print(f"lambda={row['lambda']:g}: mc={row['mc']:.10g} exact={row['exact']:.10g}"
              + (f" grid={row['grid']:.10g}" if "grid" in row else ""), file=out)
    for v in report.verdicts:
        print(v.line(), file=out)
    if report.verdicts:
        print("overall: " + ("PASS" if report.passed else "FAIL"), file=out)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            raise UsageError(parser.format_usage().strip() + "\nlevelset: a command is required")
        cfg = _config_from_args(ns)
        plan = validate(cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except LevelSetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)

    t0 = time.perf_counter()
    try:
        report = run(plan)
    except LevelSetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    if not report.wall_time_seconds:
        report.wall_time_seconds = time.perf_counter() - t0
    report.inputs = {**report.inputs, "config": plan.cfg.to_dict()}
    out = sys.stdout
    if plan.cfg.json == "-":
        print(report.to_json(), file=out)
    else:
        _summary(report, out)
    try:
        write_report(report, None if plan.cfg.json in (None, "-") else plan.cfg.json,
                     plan.cfg.csv)
    except OSError as e:
        print(f"error: cannot write output: {e}", file=sys.stderr)
        return 2
    if plan.cfg.csv and not report.sweep_rows():
        print("note: this experiment has no sweep rows; no CSV written", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
