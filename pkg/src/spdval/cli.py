"""Command-line front end: ``spdval <command> [options]``.

Every command writes one JSON report (``--out`` or stdout). Exit status is
0 on success, 1 on validation or numerical errors and 2 on configuration or
I/O errors. Reports carry an ``errors`` list and no timestamps, so repeated
runs on the same inputs produce byte-identical files.
"""

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import option_surface as osf
from .distributions import load_distribution
from .errors import ConfigError, SpdvalError
from .metrics import MeasurePair, relative_entropy, symmetric_distance
from .valuation import (
    EPS_QUAD,
    ValuationInputs,
    affine_value,
    convergence_study,
    finite_portfolio_value,
    sharpean_operation,
    value_closed_form,
    write_integrand_csv,
)

log = logging.getLogger("spdval")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}
COMMANDS = ("fit", "spd", "check-arb", "value", "converge", "sharpean", "metrics")


def _clean(obj):
    """Convert to JSON-safe builtins; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def dumps(report):
    # json writes floats with repr, which round-trips exactly
    return json.dumps(_clean(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _sibling(out, suffix):
    if out is None:
        return None
    p = Path(out)
    return p.with_name(p.stem + suffix)


def _parse_ns(text):
    try:
        ns = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--ns must be a comma-separated list of integers: {text!r}") from exc
    if not ns:
        raise ConfigError("--ns is empty")
    return ns


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"{args.command} needs {', '.join(missing)}")


def _context(args):
    return osf.load_context(args.ctx) if args.ctx else None


def _context_summary(ctx):
    out = {"bond_price": ctx.bond_price, "spot": ctx.spot, "t": ctx.t, "T": ctx.T,
           "rate_from_bond": ctx.rate_from_bond}
    if ctx.short_rate is not None:
        out["short_rate"] = ctx.short_rate
    return out


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def load_state_prices(path, ctx):
    """Resolve ``--quotes`` into ``(spd, curve, notes)``.

    Accepts a quotes CSV (``strike, price``; fitted here), an SPD CSV
    (``K, q``), or a JSON file written by ``fit`` or ``spd``.
    """
    path = Path(path)
    notes = {"source": str(path)}
    if path.suffix.lower() == ".json":
        data = _read_json(path)
        if "spd" in data:
            spd = osf.spd_from_dict(data["spd"])
            return spd, spd.curve, notes
        curve_data = data.get("curve", data)
        if "type" not in curve_data:
            raise ConfigError(f"{path}: expected a curve or SPD document")
        curve = osf.curve_from_dict(curve_data)
        return osf.state_price_density(curve), curve, notes
    header, data = osf.read_two_column_csv(path)
    if "strike" in header and "price" in header:
        if ctx is None:
            raise ConfigError("fitting quotes needs --ctx")
        quotes = data[:, ::-1] if header.index("strike") == 1 else data
        curve = osf.fit_call_curve(quotes, ctx)
        notes["max_relative_move"] = curve.max_relative_move
        return osf.state_price_density(curve), curve, notes
    if header[:2] == ["k", "q"]:
        bond = ctx.bond_price if ctx is not None else None
        return osf.StatePriceDensity.from_grid(data[:, 0], data[:, 1], bond), None, notes
    raise ConfigError(f"{path}: header must be 'strike,price' or 'K,q'")


def _spd_checks(spd, curve, ctx, tol_spd):
    tol = spd.eps_spd if tol_spd is None else tol_spd
    bond = spd.bond_price if ctx is None else ctx.bond_price
    recovered = osf.recover_bond(spd)
    spot = osf.recover_spot(spd, curve)
    out = {
        "bond": {"recovered": recovered, "expected": bond,
                 "relative_error": abs(recovered - bond) / bond,
                 "within_tolerance": abs(recovered - bond) <= tol * bond, "tolerance": tol},
        "spot": {"from_integral": spot.from_integral, "from_limit": spot.from_limit},
        "zero_atom": spd.zero_atom,
    }
    if ctx is not None:
        out["spot"]["expected"] = ctx.spot
    if curve is not None:
        out["implied_short_rate"] = osf.implied_short_rate(curve)
        cctx = curve.context
        r_ext = cctx.short_rate if cctx.short_rate is not None else cctx.rate_from_bond
        dm = osf.detect_default_mass(curve, r_ext)
        out["default_mass"] = {"atom_value": dm.atom_value, "probability": dm.probability,
                               "external_rate": r_ext}
    return out


def cmd_fit(args, report):
    _require(args, "quotes", "ctx")
    ctx = _context(args)
    quotes = osf.read_quotes(args.quotes)
    report["context"] = _context_summary(ctx)
    report["arbitrage"] = osf.arbitrage_report(quotes, ctx)
    curve = osf.fit_call_curve(quotes, ctx)
    report["curve"] = curve.to_dict()
    report["checks"] = osf.verify_curve(curve)
    report["max_relative_move"] = curve.max_relative_move
    report["interpolation_residual"] = curve.interpolation_residual
    return 0


def cmd_spd(args, report):
    _require(args, "quotes")
    ctx = _context(args)
    spd, curve, notes = load_state_prices(args.quotes, ctx)
    if ctx is not None:
        report["context"] = _context_summary(ctx)
    report["input"] = notes
    report["checks"] = _spd_checks(spd, curve, ctx, args.tol_spd)
    report["spd"] = spd.to_dict()
    csv_path = _sibling(args.out, ".spd.csv")
    if csv_path is not None:
        osf.write_spd_csv(spd, csv_path)
        report["spd_csv"] = csv_path.name
    return 0


def cmd_check_arb(args, report):
    _require(args, "quotes", "ctx")
    ctx = _context(args)
    res = osf.arbitrage_report(osf.read_quotes(args.quotes), ctx)
    report["context"] = _context_summary(ctx)
    report["arbitrage"] = res
    if not res["ok"]:
        kinds = [k for k in ("butterfly", "monotonicity", "slope_bound", "lower_bound", "upper_bound")
                 if res[k]]
        report["errors"].append({"type": "ArbitrageViolation",
                                 "message": f"violations: {', '.join(kinds)}"})
        return 1
    return 0


def _valuation_inputs(args):
    _require(args, "quotes", "phi1", "phi2")
    ctx = _context(args)
    spd, curve, notes = load_state_prices(args.quotes, ctx)
    phi1 = load_distribution(args.phi1)
    phi2 = load_distribution(args.phi2)
    return ValuationInputs(phi1, phi2, spd, ctx), curve, notes


def cmd_value(args, report):
    inputs, curve, notes = _valuation_inputs(args)
    rtol = args.tol_quad or EPS_QUAD
    if inputs.ctx is not None:
        report["context"] = _context_summary(inputs.ctx)
    report["input"] = notes
    res = value_closed_form(inputs, rtol=rtol)
    report["value"] = res.value
    report["method"] = res.method
    report["n"] = None
    report["diagnostics"] = res.diagnostics
    report["spd_checks"] = _spd_checks(inputs.spd, curve, inputs.ctx, args.tol_spd)
    c = 1.0 if args.scale is None else args.scale
    a = 0.0 if args.shift is None else args.shift
    if args.scale is not None or args.shift is not None:
        transformed = affine_value(inputs, c, a, rtol)
        report["transformed"] = {
            "scale": c, "shift": a, "value": transformed,
            "separation_identity": c * res.value + a * inputs.bond_price,
        }
    if args.n is not None:
        fin = finite_portfolio_value(inputs, args.n)
        report["finite"] = {"n": fin.n, "value": fin.value, "diagnostics": fin.diagnostics,
                            "portfolio": fin.portfolio.to_json()}
    port = _sibling(args.out, ".portfolio.json")
    if port is not None:
        port.write_text(dumps(res.portfolio.to_json()))
        report["portfolio_ref"] = port.name
        integ = _sibling(args.out, ".integrand.csv")
        write_integrand_csv(inputs, integ)
        report["integrand_csv"] = integ.name
        bind = _sibling(args.out, ".binding.csv")
        inputs.binding.to_csv(bind)
        report["binding_csv"] = bind.name
    return 0


def cmd_converge(args, report):
    inputs, _, notes = _valuation_inputs(args)
    ns = _parse_ns(args.ns) if args.ns else [10, 100, 1000, 10000]
    report["input"] = notes
    report.update(convergence_study(inputs, ns))
    return 0


def cmd_sharpean(args, report):
    _require(args, "phi1")
    ctx = _context(args)
    res = sharpean_operation(load_distribution(args.phi1), ctx)
    report.update({"shift": res.shift, "sigma": res.sigma, "score": res.score})
    if ctx is not None:
        report["risk_free_value"] = res.shift * ctx.bond_price
    return 0


def cmd_metrics(args, report):
    _require(args, "phi2")
    if args.quotes is not None:
        ctx = _context(args)
        spd, _, notes = load_state_prices(args.quotes, ctx)
        p = load_distribution(args.phi2)
        q = osf.risk_neutral_measure(spd)
        report["input"] = notes
        report["pair"] = "physical benchmark vs risk-neutral"
    else:
        _require(args, "phi1")
        p = load_distribution(args.phi1)
        q = load_distribution(args.phi2)
        report["pair"] = "phi1 vs phi2"
    pair = MeasurePair(p, q)
    report["common_support"] = list(pair.common_support)
    report["relative_entropy"] = relative_entropy(pair)
    report["kullback_leibler"] = relative_entropy(pair, standard=True)
    report["symmetric_distance"] = symmetric_distance(pair)
    return 0


HANDLERS = {
    "fit": cmd_fit, "spd": cmd_spd, "check-arb": cmd_check_arb, "value": cmd_value,
    "converge": cmd_converge, "sharpean": cmd_sharpean, "metrics": cmd_metrics,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="spdval", description="State-price valuation of cash flows.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--quotes", help="quotes CSV, SPD CSV, or fit/spd JSON")
        p.add_argument("--phi1", help="cash-flow distribution (JSON config or x,phi CSV)")
        p.add_argument("--phi2", help="benchmark distribution (JSON config or x,phi CSV)")
        p.add_argument("--ctx", help="market context JSON")
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--ns", help="comma-separated partition counts")
        p.add_argument("--n", type=int, help="partition count for the finite portfolio")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol-spd", type=float, dest="tol_spd")
        p.add_argument("--tol-quad", type=float, dest="tol_quad")
        p.add_argument("--scale", type=float)
        p.add_argument("--shift", type=float)
    return parser


def _configure_logging():
    level = _LOG_LEVELS.get(os.environ.get("SPDVAL_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def run(args):
    """Execute one command; returns ``(exit_status, report)``."""
    report = {"command": args.command, "seed": args.seed, "errors": []}
    for flag in ("tol_spd", "tol_quad"):
        v = getattr(args, flag)
        if v is not None and not v > 0:
            report["errors"].append({"type": "ConfigError", "message": f"--{flag} must be positive"})
            return 2, report
    try:
        status = HANDLERS[args.command](args, report)
    except ConfigError as exc:
        report["errors"].append({"type": type(exc).__name__, "message": str(exc)})
        status = 2
    except SpdvalError as exc:
        report["errors"].append({"type": type(exc).__name__, "message": str(exc)})
        status = 1
    except OSError as exc:
        report["errors"].append({"type": type(exc).__name__, "message": str(exc)})
        status = 2
    return status, report


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    status, report = run(args)
    for err in report["errors"]:
        log.error("%s: %s", err["type"], err["message"])
    text = dumps(report)
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            log.error("cannot write report: %s", exc)
            return 2
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
