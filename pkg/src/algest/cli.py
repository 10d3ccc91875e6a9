"""Command-line front end: ``algest {derive,simulate,estimate,sweep,demod}``.

Exit codes: 0 ok, 1 input error, 2 not identifiable, 3 degenerate numerics.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import sympy

from . import __version__
from .compiler import compile_estimator
from .config import ConfigError, load_config, validate_config
from .identifiability import (
    NotIdentifiableError, RankError, build_estimator_system, is_projectively_identifiable,
    to_coefficient_form,
)
from .io_util import atomic_write_json
from .models import (
    CarrierSpec, EstimatorModel, MinimalEquation, TimeOde, builtin_model, carrier_ode,
    carrier_sample, homogenize, to_operational,
)
from .noise import ExperimentConfig, NoiseSpec, SerConfig, gen_noise, ser_experiment, snr_db, sweep
from .opcalc import AnnihilatorModule, ParamField, RatFunc, SPoly
from .runtime import EPS_DIV, NumericalSingularityError, evaluate_plan
from .sampled import Grid, read_csv, write_csv

EXIT_OK, EXIT_INPUT, EXIT_NOT_IDENTIFIABLE, EXIT_NUMERIC = 0, 1, 2, 3


class InputError(Exception):
    pass


class DegenerateError(Exception):
    pass


@dataclass
class Context:
    cfg: dict
    out: Path | None
    quiet: bool

    def say(self, *lines) -> None:
        if not self.quiet:
            for line in lines:
                print(line)

    def path(self, name: str) -> Path | None:
        if self.out is None:
            return None
        prefix = self.cfg.get("output", {}).get("prefix", "")
        return self.out / f"{prefix}{name}"


# -- model construction ---------------------------------------------------------

def _symbols_in(values) -> set[str]:
    names = set()
    for v in values:
        if isinstance(v, str):
            try:
                names |= {str(s) for s in sympy.sympify(v).free_symbols}
            except (sympy.SympifyError, TypeError) as exc:
                raise InputError(f"cannot parse coefficient {v!r}: {exc}") from None
    return names


def _coeff(fld: ParamField, v):
    return fld.parse(v) if isinstance(v, str) else fld.convert(v)


def estimator_model(cfg: dict) -> EstimatorModel:
    m = cfg.get("model")
    if m is None:
        raise InputError("config needs a model section")
    kind = m["kind"]
    if kind in ("amplitude", "phase"):
        if "omega" not in m:
            raise InputError(f"{kind} model needs omega")
        return builtin_model(kind, omega=m["omega"])
    if kind == "frequency":
        return builtin_model(kind)
    if kind == "ode":
        if "terms" not in m:
            raise InputError("ode model needs terms")
        theta = tuple(cfg.get("estimator", {}).get("params", ()))
        if not theta:
            raise InputError("ode model needs estimator.params")
        names = _symbols_in([c for _, _, c in m["terms"]] + list(m.get("initial", []))) | set(theta)
        fld = ParamField(sorted(names))
        try:
            ode = TimeOde(fld, tuple((a, b, _coeff(fld, c)) for a, b, c in m["terms"]),
                          tuple(_coeff(fld, z) for z in m.get("initial", [])))
        except ValueError as exc:
            raise InputError(str(exc)) from None
        return EstimatorModel("ode", ode, theta, dict(m.get("known", {})))
    raise InputError(f"model kind {kind!r} does not define an estimator")


def carrier_from(cfg: dict) -> CarrierSpec:
    m = cfg.get("model", {})
    if m.get("kind") == "carrier":
        c = dict(m.get("carrier", {}))
        if not c:
            raise InputError("carrier model needs a carrier section")
        kind = c.pop("kind")
        try:
            return CarrierSpec(kind, tuple(c.get("amplitudes", ())), tuple(c.get("freqs", ())),
                               tuple(c.get("phases", ())), c.get("omega"))
        except ValueError as exc:
            raise InputError(str(exc)) from None
    model = estimator_model(cfg)
    if model.name == "ode":
        raise InputError("ode models cannot be sampled; use kind 'carrier' or a built-in model")
    truth = m.get("truth")
    missing = [p for p in model.theta if truth is None or p not in truth]
    if missing:
        raise InputError(f"model.truth is missing {missing}")
    return model.carrier(truth)


def _grid(cfg: dict) -> Grid:
    g = cfg.get("grid", {})
    return Grid.over(float(g.get("window", 1.0)), int(g.get("nbar", 10000)))


# -- derive ---------------------------------------------------------------------

def _rational_report(ctx: Context) -> int:
    m = ctx.cfg["model"]
    for key in ("numerator", "denominator"):
        if key not in m:
            raise InputError(f"rational model needs {key}")
    names = _symbols_in(m["numerator"] + m["denominator"] + m.get("multiplier", []))
    if names:
        raise InputError("rational models take numeric coefficients")
    fld = ParamField()
    num = SPoly([_coeff(fld, c) for c in m["numerator"]], fld)
    den = SPoly([_coeff(fld, c) for c in m["denominator"]], fld)
    if den.is_zero() or num.is_zero():
        raise InputError("numerator and denominator must be nonzero")
    mult = SPoly([_coeff(fld, c) for c in m.get("multiplier", [1])], fld)
    xhat = RatFunc(num, den)
    me = MinimalEquation((den * mult,), num * mult)
    cf = to_coefficient_form(me)
    rep = is_projectively_identifiable(cf, AnnihilatorModule.from_rational(xhat),
                                       seed=ctx.cfg.get("seed", 0))
    ctx.say(f"transform: ({num.to_str()}) / ({den.to_str()})",
            f"relation: ({me.qs[0].to_str()}) x = {me.p.to_str()}",
            f"coefficient form: N+1 = {cf.N + 1}, M = {cf.M}",
            f"rank M = {rep.rank} (expected {cf.N + cf.M}): {rep.to_json()['verdict']}")
    body = {"relation": {"q0": me.qs[0].to_str(), "p": me.p.to_str()},
            "coefficient_form": cf.to_json(), "identifiability": rep.to_json(),
            "config": ctx.cfg}
    if ctx.out:
        atomic_write_json(ctx.path("identifiability.json"), body)
    return EXIT_OK if rep.identifiable else EXIT_NOT_IDENTIFIABLE


def _carrier_report(ctx: Context) -> int:
    spec = carrier_from(ctx.cfg)
    ode = carrier_ode(spec)
    rel = to_operational(ode)
    h = homogenize(rel)
    me = MinimalEquation.from_relation(h)
    cf = to_coefficient_form(me)
    rep = is_projectively_identifiable(cf, AnnihilatorModule.from_operator(h), seed=ctx.cfg.get("seed", 0))
    ctx.say(f"operational relation: {rel.to_str()}",
            f"homogenized: [{h.to_str()}] x = 0",
            f"coefficient form: N+1 = {cf.N + 1}, M = {cf.M}",
            f"rank M = {rep.rank}: {rep.to_json()['verdict']}")
    if ctx.out:
        atomic_write_json(ctx.path("identifiability.json"),
                          {"relation": rel.to_str(), "homogenized": h.to_str(),
                           "coefficient_form": cf.to_json(), "identifiability": rep.to_json(),
                           "config": ctx.cfg})
    return EXIT_OK if rep.identifiable else EXIT_NOT_IDENTIFIABLE


def cmd_derive(ctx: Context) -> int:
    kind = ctx.cfg.get("model", {}).get("kind")
    if kind == "rational":
        return _rational_report(ctx)
    if kind == "carrier":
        return _carrier_report(ctx)
    model = estimator_model(ctx.cfg)
    est = ctx.cfg.get("estimator", {})
    theta = tuple(est.get("params", model.theta))
    seed = int(est.get("certify_seed", ctx.cfg.get("seed", 0)))
    rel = to_operational(model.ode, theta)
    ctx.say(f"operational relation: {rel.to_str()}")
    report = {"relation": rel.to_str(), "params": list(theta), "config": ctx.cfg}
    try:
        system = build_estimator_system(rel, theta, multiplier_offset=int(est.get("multiplier_offset", 0)),
                                        seed=seed)
    except NotIdentifiableError as exc:
        report["identifiability"] = {"verdict": "not-identifiable", "reason": str(exc)}
        ctx.say(f"not identifiable: {exc}")
        if ctx.out:
            atomic_write_json(ctx.path("identifiability.json"), report)
        return EXIT_NOT_IDENTIFIABLE
    src = system.relation
    me = MinimalEquation.from_relation(src)
    cf = to_coefficient_form(me)
    rep = is_projectively_identifiable(cf, AnnihilatorModule.from_operator(src.lhs, src.rhs), seed=seed)
    linear = set(theta) <= set(rep.linear_params)
    report.update({"estimation_relation": src.to_str(), "coefficient_form": cf.to_json(),
                   "identifiability": rep.to_json(), "linearly_identifiable": linear,
                   "multipliers": [f"s^-{m}" for m in system.multipliers],
                   "divisor_certificate": system.certificate})
    ctx.say(f"estimation relation: {src.to_str()}",
            f"coefficient form: N+1 = {cf.N + 1}, M = {cf.M}",
            f"rank M = {rep.rank} (expected {cf.N + cf.M}): {rep.to_json()['verdict']}",
            f"parameters {list(theta)} linearly identifiable: {linear}",
            "system:", system.to_str())
    if not (rep.identifiable and linear):
        if ctx.out:
            atomic_write_json(ctx.path("identifiability.json"), report)
        return EXIT_NOT_IDENTIFIABLE
    plan = compile_estimator(system, {k: v for k, v in model.known.items() if k in system.field.names})
    ctx.say("plan:", plan.table(), "divisor: det A(t)")
    if ctx.out:
        atomic_write_json(ctx.path("identifiability.json"), report)
        atomic_write_json(ctx.path("plan.json"), {**plan.to_json(), "config": ctx.cfg})
    return EXIT_OK


# -- simulate / estimate ----------------------------------------------------------

def _noise_spec(cfg: dict) -> NoiseSpec | None:
    n = cfg.get("noise")
    if n is None or n["kind"] == "none":
        return None
    try:
        return NoiseSpec(n["kind"], tuple(tuple(c) for c in n.get("components", ())),
                         float(n.get("amplitude", 0.0)), n.get("dist", "gaussian"), float(n.get("rho", 0.0)))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_simulate(ctx: Context) -> int:
    grid = _grid(ctx.cfg)
    carrier = carrier_from(ctx.cfg)
    clean = carrier_sample(carrier, grid)
    seed = int(ctx.cfg.get("seed", 0))
    spec = _noise_spec(ctx.cfg)
    noise = gen_noise(spec, grid, seed) if spec else None
    meas = clean + noise if noise is not None else clean
    meta = {"config": ctx.cfg, "seed": seed, "kind": "measured"}
    snr = snr_db(clean, noise) if noise is not None else math.inf
    ctx.say(f"{grid.count} samples on [0, {grid.t_end}], SNR = {snr:.3f} dB")
    if ctx.out:
        write_csv(meas, ctx.path("signal.csv"), meta)
        write_csv(clean, ctx.path("clean.csv"), {**meta, "kind": "clean"})
    return EXIT_OK


def cmd_estimate(ctx: Context, signal_path: str | None) -> int:
    path = signal_path or ctx.cfg.get("input", {}).get("signal")
    if not path:
        raise InputError("no signal given (input.signal or --signal)")
    try:
        x, meta = read_csv(path)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read signal: {exc}") from None
    model = estimator_model(ctx.cfg)
    est = ctx.cfg.get("estimator", {})
    theta = tuple(est.get("params", model.theta))
    try:
        system = build_estimator_system(model.relation() if theta == model.theta
                                        else to_operational(model.ode, theta), theta,
                                        multiplier_offset=int(est.get("multiplier_offset", 0)))
    except NotIdentifiableError as exc:
        ctx.say(f"not identifiable: {exc}")
        return EXIT_NOT_IDENTIFIABLE
    plan = compile_estimator(system, model.known)
    g = ctx.cfg.get("grid", {})
    t = float(g["window"]) if "window" in g else x.grid.t_end
    try:
        res = evaluate_plan(plan, x, t, g.get("quadrature", "simpson"), float(g.get("eps_div", EPS_DIV)))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    body = {**res.to_json(), "signal": str(path), "config": ctx.cfg,
            "seed": (meta or {}).get("seed")}
    if ctx.out:
        atomic_write_json(ctx.path("estimate.json"), body)
    if not res.guard_ok:
        ctx.say(f"divisor guard failed at t = {t}: |delta| = {res.divisor:.3e}")
        return EXIT_NUMERIC
    for p in res.params:
        ctx.say(f"{p} = {res.estimates[p]:.12g}")
    return EXIT_OK


# -- sweep / demod ----------------------------------------------------------------

def _experiment(ctx: Context, kind: str) -> dict:
    e = ctx.cfg.get("experiment")
    if e is None or e["kind"] != kind:
        raise InputError(f"config needs an experiment section of kind {kind!r}")
    e = dict(e)
    e.pop("kind")
    return e


def cmd_sweep(ctx: Context) -> int:
    e = _experiment(ctx, "sweep")
    try:
        cfg = ExperimentConfig(**e)
    except (TypeError, ValueError) as exc:
        raise InputError(f"sweep config: {exc}") from None
    rep = sweep(cfg)
    for r in rep.rows:
        ctx.say(f"{r['swept']:>12.6g}  A={r['A']:<10.4g} mean_err={r['mean_err']}  std_err={r['std_err']}"
                f"  erasures={r['erasures']}")
    for k, v in rep.slopes.items():
        if v:
            ctx.say(f"slope[{k}] = {v['slope']:.4f}  CI [{v['ci'][0]:.4f}, {v['ci'][1]:.4f}]")
    if ctx.out:
        rep.write(ctx.path("sweep.csv"), ctx.path("sweep.json"))
    total = sum(r["erasures"] for r in rep.rows)
    if any(r["mean_err"] is None for r in rep.rows) or total * 2 > cfg.trials * len(rep.rows):
        ctx.say("run is dominated by divisor-guard erasures")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_demod(ctx: Context) -> int:
    e = _experiment(ctx, "ser")
    if isinstance(e.get("nbar"), int):
        e["nbar"] = [e["nbar"]]
    try:
        cfg = SerConfig(**e)
    except (TypeError, ValueError) as exc:
        raise InputError(f"ser config: {exc}") from None
    rep = ser_experiment(cfg)
    for r in rep.rows:
        ctx.say(f"SNR {r['snr_db']:>6.1f} dB  Nbar {r['Nbar']:>7d}  SER algebraic {r['ser_algebraic']}"
                f"  correlation {r['ser_correlation']}  erasures {r['erasures']}")
    for s, th in rep.threshold.items():
        ctx.say(f"SNR {s} dB: predicted Nbar threshold for SER < 1%: {th['nbar_threshold']:.0f}")
    if ctx.out:
        rep.write(ctx.path("ser.csv"), ctx.path("ser.json"))
    if any(r["erasures"] * 2 > r["symbols"] for r in rep.rows):
        ctx.say("run is dominated by divisor-guard erasures")
        return EXIT_NUMERIC
    return EXIT_OK


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="algest", description="Algebraic parameter estimation toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "derive": "print relation, identifiability verdict and compiled plan",
        "simulate": "sample a carrier plus noise to CSV",
        "estimate": "estimate parameters from a signal CSV",
        "sweep": "Monte-Carlo error sweep",
        "demod": "symbol-error-rate experiment",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, help=text)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="directory for artifacts")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--trials", type=int, help="trials per cell (symbols for demod)")
        sp.add_argument("--quiet", action="store_true", help="suppress console output")
        if name == "estimate":
            sp.add_argument("--signal", help="signal CSV (overrides input.signal)")
    return p


def _apply_overrides(cfg: dict, args) -> dict:
    cfg = copy.deepcopy(cfg)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        cfg["seed"] = args.seed
        if "experiment" in cfg:
            cfg["experiment"]["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        if "experiment" in cfg:
            key = "symbols" if cfg["experiment"]["kind"] == "ser" else "trials"
            cfg["experiment"][key] = args.trials
    return validate_config(cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        out = Path(args.out) if args.out else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, out, args.quiet)
        if args.command == "derive":
            return cmd_derive(ctx)
        if args.command == "simulate":
            return cmd_simulate(ctx)
        if args.command == "estimate":
            return cmd_estimate(ctx, args.signal)
        if args.command == "sweep":
            return cmd_sweep(ctx)
        return cmd_demod(ctx)
    except (ConfigError, InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NotIdentifiableError, RankError) as exc:
        print(f"not identifiable: {exc}", file=sys.stderr)
        return EXIT_NOT_IDENTIFIABLE
    except (NumericalSingularityError, DegenerateError) as exc:
        print(f"degenerate numerics: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
