"""Command line entry point: ``lsvp run``, ``lsvp zoo list``, ``lsvp fixture export``."""

import argparse
from concurrent.futures import ThreadPoolExecutor
import csv
from dataclasses import dataclass, field
import datetime
import enum
import json
import math
import os
from pathlib import Path
import re
import sys

import numpy as np

from . import BACKEND, __version__, zoo
from .gridfn import ExponentPair, FormatError, GridSpec, ParameterError, load, save
from .products import (
    HypothesisViolated, PreconditionFailed, hjb_residual, hypercontract_check, laplace_lp_bound_check, log_gaussian_bound,
    monotonicity_sweep, mp_product, p_limit_sweep, santalo_curve, volume_product,
)
from .semigroups import FlowKind


class Experiment(enum.Enum):
    MpProduct = "MpProduct"
    VolumeProduct = "VolumeProduct"
    Monotonicity = "Monotonicity"
    PLimit = "PLimit"
    Hjb = "Hjb"
    Hypercontract = "Hypercontract"
    SantaloCurve = "SantaloCurve"
    LaplaceBound = "LaplaceBound"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


DEFAULT_TOLERANCES = {
    "ratio": 2e-4,
    "step_slack": 1e-5,
    "margin": 2e-4,
    "hypercontract": 1e-5,
}

DEFAULT_TIMES = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
DEFAULT_P_LIMIT = [0.2, 0.1, 0.05, 0.02]


@dataclass
class ExperimentConfig:
    experiment: Experiment
    fixture: str
    p_list: list = field(default_factory=lambda: [0.5])
    times: list = field(default_factory=lambda: list(DEFAULT_TIMES))
    grid: GridSpec = field(default_factory=lambda: GridSpec.box(-10.0, 10.0, 2001))
    grid_explicit: bool = False
    flow: FlowKind = FlowKind.Heat
    z_samples: list | None = None
    ode_step: float = 0.25
    p1: float | None = None
    p2: float | None = None
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    out: str = "lsvp-out"


_KEYS = {"experiment", "fixture", "p_list", "times", "grid", "flow", "z_samples", "ode_step",
         "p1", "p2", "tolerances", "out"}


def _line_of(text, key):
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


def _err(text, key, msg):
    return ConfigError(f"{msg} (line {_line_of(text, key)})")


def _number(text, key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise _err(text, key, f"'{key}' must hold finite numbers")
    return float(v)


def _check_p(text, key, p):
    if not (0.0 <= p < 1.0):
        raise _err(text, key, "p must lie in [0,1)")
    return p


def _check_times(text, times):
    if any(b <= a for a, b in zip(times, times[1:])):
        raise _err(text, "times", "times must be strictly increasing")
    if times and times[0] < 0:
        raise _err(text, "times", "times must be nonnegative")
    return times


def _fixture_exists(name):
    return name in zoo.FIXTURES or Path(name).is_file()


def parse_config(text):
    """Validated :class:`ExperimentConfig` from JSON text; unknown keys are rejected."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object (line 1)")
    for key in raw:
        if key not in _KEYS:
            raise _err(text, key, f"unknown key '{key}'")
    for key in ("experiment", "fixture"):
        if key not in raw:
            raise ConfigError(f"missing required key '{key}' (line 1)")
    try:
        experiment = Experiment(raw["experiment"])
    except ValueError:
        raise _err(text, "experiment", f"unknown experiment '{raw['experiment']}'") from None
    fixture = raw["fixture"]
    if not isinstance(fixture, str) or not _fixture_exists(fixture):
        raise _err(text, "fixture", f"unknown fixture '{fixture}'")
    cfg = ExperimentConfig(experiment, fixture)
    if experiment is Experiment.PLimit:
        cfg.p_list = list(DEFAULT_P_LIMIT)
    if experiment is Experiment.VolumeProduct:
        cfg.p_list = [0.0]
    if experiment is Experiment.SantaloCurve:
        cfg.flow = FlowKind.FokkerPlanck
    if "p_list" in raw:
        if not isinstance(raw["p_list"], list) or not raw["p_list"]:
            raise _err(text, "p_list", "'p_list' must be a nonempty list")
        cfg.p_list = [_check_p(text, "p_list", _number(text, "p_list", v)) for v in raw["p_list"]]
    if "times" in raw:
        if not isinstance(raw["times"], list) or not raw["times"]:
            raise _err(text, "times", "'times' must be a nonempty list")
        cfg.times = _check_times(text, [_number(text, "times", v) for v in raw["times"]])
    if "grid" in raw:
        g = raw["grid"]
        if not isinstance(g, dict) or set(g) - {"lo", "hi", "n"}:
            raise _err(text, "grid", "'grid' must be an object with keys lo, hi, n")
        try:
            cfg.grid = GridSpec(_number(text, "grid", g.get("lo", -10.0)), _number(text, "grid", g.get("hi", 10.0)),
                                int(g.get("n", 2001)))
        except (ParameterError, TypeError, ValueError) as exc:
            raise _err(text, "grid", f"invalid grid: {exc}") from None
        cfg.grid_explicit = True
    if "flow" in raw:
        try:
            cfg.flow = FlowKind(raw["flow"])
        except ValueError:
            raise _err(text, "flow", f"unknown flow '{raw['flow']}'") from None
    if "z_samples" in raw:
        zs = raw["z_samples"]
        if not isinstance(zs, list) or not all(isinstance(z, list) for z in zs):
            raise _err(text, "z_samples", "'z_samples' must be a list of vectors")
        cfg.z_samples = [[_number(text, "z_samples", v) for v in z] for z in zs]
    for key in ("ode_step", "p1", "p2"):
        if key in raw:
            setattr(cfg, key, _number(text, key, raw[key]))
    if cfg.ode_step <= 0:
        raise _err(text, "ode_step", "ode_step must be positive")
    if "tolerances" in raw:
        tol = raw["tolerances"]
        if not isinstance(tol, dict):
            raise _err(text, "tolerances", "'tolerances' must be an object")
        for k, v in tol.items():
            if k not in DEFAULT_TOLERANCES:
                raise _err(text, "tolerances", f"unknown tolerance '{k}'")
            cfg.tolerances[k] = _number(text, "tolerances", v)
    if "out" in raw:
        if not isinstance(raw["out"], str):
            raise _err(text, "out", "'out' must be a path string")
        cfg.out = raw["out"]
    return cfg


def load_fixture(cfg):
    """The fixture of ``cfg``: a zoo member (resampled on an explicit 1D grid) or a file."""
    if cfg.fixture in zoo.FIXTURES:
        fx = zoo.get(cfg.fixture)
        if cfg.grid_explicit and fx.dim == 1:
            return fx.build(cfg.grid), fx
        return fx.build(), fx
    return load(cfg.fixture), None


def _enc(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, (np.floating,)):
        return _enc(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_enc(float(x)) for x in v]
    if isinstance(v, dict):
        return {k: _enc(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_enc(x) for x in v]
    return v


def _row(cfg, p=None, t=None, kind=None, s_point=None, log_inf=None, log_mp=None, log_bound=None,
         ratio=None, margins=None, flags=(), verdict="PASS", check=""):
    return {
        "experiment": cfg.experiment.value,
        "fixture": cfg.fixture,
        "p": p,
        "t": t,
        "kind": kind,
        "s_point": None if s_point is None else [float(v) for v in s_point],
        "log_inf": log_inf,
        "log_Mp": log_mp,
        "log_bound": log_bound,
        "ratio_log": ratio,
        "margins": margins or {},
        "flags": list(flags),
        "verdict": verdict,
        "check": check,
    }


def _verdict(ok, flags=()):
    if not ok:
        return "FAIL"
    return "FLAGGED" if flags else "PASS"


def _task_product(cfg, f, fx, p):
    tol = cfg.tolerances["ratio"]
    rep = volume_product(f) if p == 0.0 else mp_product(f, p)
    s = rep.santalo
    ok = rep.ratio_log <= tol
    check = f"ratio_log <= {tol:g}"
    if fx is not None and fx.gaussian:
        ok = ok and abs(rep.ratio_log) <= tol
        check = f"|ratio_log| <= {tol:g}"
    return [_row(cfg, p=p, kind=None if s is None else s.kind.value,
                 s_point=None if s is None or s.point is None else s.point,
                 log_inf=None if s is None else s.log_inf, log_mp=rep.log_Mp,
                 log_bound=rep.log_gaussian_bound, ratio=rep.ratio_log, flags=rep.tail_flags,
                 verdict=_verdict(ok, rep.tail_flags), check=check)], []


def _curve_rows(curve):
    rows = []
    for i, t in enumerate(curve.times[:len(curve.mp_log)]):
        s = curve.santalo_points[i] or []
        rows.append([t, curve.alpha_log[i], curve.mp_log[i]] + list(s))
    return rows


def _task_monotonicity(cfg, f, fx, p):
    slack = cfg.tolerances["step_slack"]
    tol = cfg.tolerances["ratio"]
    curve = monotonicity_sweep(f, p, cfg.flow, cfg.times)
    bound = log_gaussian_bound(ExponentPair.from_p(p), f.dim)
    ok = curve.error is None and curve.steps_ok(slack) and all(v <= bound + tol for v in curve.mp_log)
    flags = sorted({fl for fls in curve.flags for fl in fls})
    if curve.error:
        flags.append("error: " + curve.error)
    rows = []
    for i, t in enumerate(curve.times[:len(curve.mp_log)]):
        rows.append(_row(cfg, p=p, t=t, kind=curve.kinds[i], s_point=curve.santalo_points[i],
                         log_inf=curve.alpha_log[i], log_mp=curve.mp_log[i], log_bound=bound,
                         ratio=curve.mp_log[i] - bound, flags=curve.flags[i], verdict=_verdict(ok),
                         check=f"{cfg.flow.value} curve non-decreasing (slack {slack:g}), below bound + {tol:g}"))
    if not rows:
        rows.append(_row(cfg, p=p, flags=flags, verdict="FAIL", check="curve"))
    return rows, [(f"curve_{cfg.fixture}_{cfg.flow.value}_p{p:g}.csv", f.dim, _curve_rows(curve))]


def _task_plimit(cfg, f, fx, _p):
    tab = p_limit_sweep(f, cfg.p_list)
    ok = tab.decreasing()
    rows = []
    for p, gt, gm, lm in zip(tab.ps, tab.gap_transform, tab.gap_product, tab.log_Mp):
        rows.append(_row(cfg, p=p, log_mp=lm, margins={"gap_transform": gt, "gap_product": gm},
                         verdict=_verdict(ok), check="gap columns strictly decreasing"))
    rows.append(_row(cfg, p=0.0, log_mp=tab.log_M, margins={"limit_log_M": tab.limit_log_M},
                     verdict="PASS", check="volume product and extrapolated limit"))
    return rows, []


def _task_hjb(cfg, f, fx, p):
    zs = cfg.z_samples or [[v] * f.dim for v in (-0.5, 0.0, 0.5)]
    rows = []
    for t in cfg.times:
        if t <= 0:
            continue
        rep = hjb_residual(f, p, t, zs)
        for z, r, b in zip(rep.z, rep.residuals, rep.budgets):
            rows.append(_row(cfg, p=p, t=t, s_point=z, margins={"residual": r, "budget": b},
                             verdict=_verdict(r >= -b), check="residual >= -budget"))
    return rows, []


def _task_hyper(cfg, f, fx, p):
    tol = cfg.tolerances["hypercontract"]
    try:
        rep = hypercontract_check(f, p, cfg.p1, cfg.p2)
    except HypothesisViolated as exc:
        return [_row(cfg, p=p, flags=[str(exc)], verdict="FAIL", check="centering hypothesis")], []
    ok = rep.margin >= -tol
    flags = []
    if not math.isfinite(rep.lhs_log) or not math.isfinite(rep.rhs_log):
        flags.append("norm integral truncated by the grid; widen the window")
    return [_row(cfg, p=p, margins={"lhs_log": rep.lhs_log, "rhs_log": rep.rhs_log, "margin": rep.margin,
                                    "centering": list(rep.centering)},
                 flags=flags, verdict=_verdict(ok, flags), check=f"margin >= -{tol:g}")], []


def _task_bound(cfg, f, fx, p):
    tol = cfg.tolerances["margin"]
    rep = laplace_lp_bound_check(f, p)
    ok = rep.margin >= -tol
    check = f"margin >= -{tol:g}"
    if fx is not None and fx.gaussian:
        ok = abs(rep.margin) <= tol
        check = f"|margin| <= {tol:g}"
    s = rep.santalo
    return [_row(cfg, p=p, kind=s.kind.value, s_point=s.point, log_inf=s.log_inf,
                 margins={"lhs_log": rep.lhs_log, "rhs_log": rep.rhs_log, "margin": rep.margin},
                 verdict=_verdict(ok), check=check)], []


def _task_curve(cfg, f, fx, p):
    try:
        c = santalo_curve(f, p, cfg.times, cfg.ode_step, clock=cfg.flow)
    except PreconditionFailed as exc:
        return [_row(cfg, p=p, flags=[str(exc)], verdict="FAIL", check="attained start point")], []
    rows = []
    for t, s, o in zip(c.times, c.points, c.objective_log):
        rows.append(_row(cfg, p=p, t=t, s_point=s, log_inf=o, margins={"objective_monotone": c.monotone},
                         verdict="PASS", check="curve integrated (monotonicity reported)"))
    curve_rows = [[t, o, math.nan] + list(s) for t, s, o in zip(c.times, c.points, c.objective_log)]
    return rows, [(f"santalo_curve_{cfg.fixture}_p{p:g}.csv", f.dim, curve_rows)]


_TASKS = {
    Experiment.MpProduct: _task_product,
    Experiment.VolumeProduct: _task_product,
    Experiment.Monotonicity: _task_monotonicity,
    Experiment.PLimit: _task_plimit,
    Experiment.Hjb: _task_hjb,
    Experiment.Hypercontract: _task_hyper,
    Experiment.LaplaceBound: _task_bound,
    Experiment.SantaloCurve: _task_curve,
}


def thread_count():
    v = os.environ.get("LSVP_THREADS")
    if v:
        try:
            return max(1, int(v))
        except ValueError:
            pass
    return os.cpu_count() or 1


def execute(cfg, f, fx):
    """Run all tasks of ``cfg``; rows come back in task order whatever the thread count."""
    task = _TASKS[cfg.experiment]
    ps = [None] if cfg.experiment is Experiment.PLimit else cfg.p_list
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(lambda p: task(cfg, f, fx, p), ps))
    rows, curves = [], []
    for r, c in results:
        rows.extend(r)
        curves.extend(c)
    return rows, curves


def _fmt(v):
    return "nan" if v is None else format(float(v), ".17g")


def write_outputs(cfg, rows, curves):
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = json.dumps(_enc(rows), indent=2, sort_keys=True, allow_nan=False) + "\n"
    (out / "report.json").write_text(report)
    meta = {
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "backend": BACKEND,
        "threads": thread_count(),
        "version": __version__,
    }
    (out / "report.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    for name, dim, data in curves:
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "alpha_log", "mp_log"] + [f"s_{k + 1}" for k in range(dim)])
            for r in data:
                w.writerow([_fmt(v) for v in r] + ["nan"] * (3 + dim - len(r)))


def _print_rows(rows, stream):
    for r in rows:
        where = f"p={r['p']}" + ("" if r["t"] is None else f" t={r['t']}")
        extra = f" flags={r['flags']}" if r["flags"] else ""
        stream.write(f"{r['verdict']} {r['experiment']} {r['fixture']} {where}: {r['check']}{extra}\n")


def run(cfg, stream=None):
    """Execute ``cfg``, write the report, print verdicts; return the exit status."""
    stream = stream or sys.stdout
    try:
        f, fx = load_fixture(cfg)
    except (OSError, FormatError) as exc:
        stream.write(f"ERROR reading fixture: {exc}\n")
        return 2
    rows, curves = execute(cfg, f, fx)
    _print_rows(rows, stream)
    try:
        write_outputs(cfg, rows, curves)
    except OSError as exc:
        stream.write(f"ERROR writing outputs: {exc}\n")
        return 2
    return 1 if any(r["verdict"] == "FAIL" for r in rows) else 0


def _apply_overrides(cfg, args):
    if args.experiment:
        try:
            cfg.experiment = Experiment(args.experiment)
        except ValueError:
            raise ConfigError(f"unknown experiment '{args.experiment}'") from None
    if args.fixture:
        if not _fixture_exists(args.fixture):
            raise ConfigError(f"unknown fixture '{args.fixture}'")
        cfg.fixture = args.fixture
    if args.p:
        for p in args.p:
            if not (0.0 <= p < 1.0):
                raise ConfigError("p must lie in [0,1)")
        cfg.p_list = list(args.p)
    if args.t:
        if any(b <= a for a, b in zip(args.t, args.t[1:])):
            raise ConfigError("times must be strictly increasing")
        cfg.times = list(args.t)
    if args.grid_lo is not None or args.grid_hi is not None or args.grid_n is not None:
        g = cfg.grid
        try:
            cfg.grid = GridSpec(args.grid_lo if args.grid_lo is not None else g.lo[0],
                                args.grid_hi if args.grid_hi is not None else g.hi[0],
                                args.grid_n if args.grid_n is not None else g.n[0])
        except ParameterError as exc:
            raise ConfigError(f"invalid grid: {exc}") from None
        cfg.grid_explicit = True
    if args.out:
        cfg.out = args.out
    return cfg


def build_parser():
    ap = argparse.ArgumentParser(prog="lsvp", description="Functional volume product experiments")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment")
    r.add_argument("--config", help="JSON configuration file")
    r.add_argument("--experiment", help="experiment name, overrides the config")
    r.add_argument("--fixture", help="zoo name or gridfn file, overrides the config")
    r.add_argument("--p", type=float, action="append", help="exponent p (repeatable)")
    r.add_argument("--t", type=float, action="append", help="flow time (repeatable)")
    r.add_argument("--grid-lo", type=float)
    r.add_argument("--grid-hi", type=float)
    r.add_argument("--grid-n", type=int)
    r.add_argument("--out", help="output directory")
    z = sub.add_parser("zoo", help="fixture zoo")
    z.add_argument("action", choices=["list"])
    fx = sub.add_parser("fixture", help="fixture files")
    fx.add_argument("action", choices=["export"])
    fx.add_argument("name")
    fx.add_argument("path")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "zoo":
        for name in zoo.names():
            fxt = zoo.get(name)
            w = fxt.window
            box = " x ".join(f"[{a:g}, {b:g}]/{n}" for a, b, n in zip(w.lo, w.hi, w.n))
            print(f"{name:14s} dim={fxt.dim} {box}  {fxt.description}")
        return 0
    if args.command == "fixture":
        try:
            f = zoo.build(args.name)
        except KeyError as exc:
            print(f"error: {exc.args[0]}", file=sys.stderr)
            return 2
        try:
            save(f, args.path)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    try:
        if args.config:
            try:
                text = Path(args.config).read_text()
            except OSError as exc:
                print(f"error: cannot read config: {exc}", file=sys.stderr)
                return 2
            cfg = parse_config(text)
        else:
            if not (args.experiment and args.fixture):
                print("error: need --config or both --experiment and --fixture", file=sys.stderr)
                return 2
            cfg = parse_config(json.dumps({"experiment": args.experiment, "fixture": args.fixture}))
        cfg = _apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
