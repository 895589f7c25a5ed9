"""Command-line front end: price, calibrate, validate, smile.

Every command prints a run report as JSON: the echoed command, the inputs
with a digest, the outputs, warnings, and wall time. Volatilities are
decimals (0.1834, not percent), times are in years. Exit codes: 0 ok,
2 validation failure, 3 data failure, 4 oracle comparison failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time

import numpy as np

from .calibration import (
    QuoteStyle,
    calibration_report,
    ingest_quotes,
    regression_pairs,
    smile_curve,
)
from .closedform import bs_fixed_call, bs_floating_call
from .errors import (
    BranchError,
    DegenerateArc,
    DegenerateDesign,
    DegenerateHorizon,
    MissingColumn,
    NonPositivePrice,
    NonPositiveStrike,
    PDFactorizationFailure,
    PoleInInterval,
    SingularDenominator,
    SingularGamma,
    SingularIntegral,
    SingularL,
    UnparseableField,
    UnsupportedContract,
    VanishingPrice,
    VanishingVega,
)
from .mc import (
    ConstantVol,
    FullModel,
    McConfig,
    price_mc,
    reference_full_model,
    simulate_paths,
    stationary_effective_vol,
)
from .model import (
    MarketState,
    ModelParams,
    OptionKind,
    OptionSpec,
    StrikeStyle,
    VolArc,
    arc_from_ou,
    effective_vol,
    validate_params,
)
from .perturbation import first_order_price

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_DATA = 3
EXIT_COMPARISON = 4

_VALIDATION_ERRORS = (
    ValueError,
    OSError,
    DegenerateArc,
    NonPositivePrice,
    NonPositiveStrike,
    UnsupportedContract,
    DegenerateHorizon,
    SingularL,
    SingularGamma,
    SingularIntegral,
    PoleInInterval,
    BranchError,
    VanishingPrice,
    VanishingVega,
    SingularDenominator,
    MissingColumn,
    UnparseableField,
    PDFactorizationFailure,
)
_DATA_ERRORS = (DegenerateDesign,)


def _digest(inputs: dict) -> str:
    canonical = json.dumps(inputs, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _emit(args, command: str, inputs: dict, outputs, warnings: list[str], t0: float) -> None:
    report = {
        "command": command,
        "inputs": inputs,
        "inputs_digest": _digest(inputs),
        "outputs": outputs,
        "warnings": warnings,
        "wall_time_s": round(time.perf_counter() - t0, 6),
    }
    if getattr(args, "json", False):
        print(json.dumps(report, sort_keys=True, separators=(",", ":")))
    else:
        print(json.dumps(report, sort_keys=True, indent=2))


def _add_model_flags(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument("--k", type=float, required=required, default=None if required else 2.0,
                        help="slow-factor mean-reversion speed (1/year)")
    parser.add_argument("--r", type=float, required=required, default=None if required else 0.0264,
                        help="risk-free rate (1/year)")
    parser.add_argument("--z0", type=float, required=required, default=None if required else 0.1834,
                        help="slow-factor initial level (vol units)")
    parser.add_argument("--alpha-prime", dest="alpha_prime", type=float,
                        required=required, default=None if required else 0.20,
                        help="slow-factor long-run level (vol units)")
    parser.add_argument("--epsilon", type=float, default=0.001, help="fast time scale (years)")
    parser.add_argument("--sigma-min", dest="sigma_min", type=float, default=1e-4,
                        help="floor applied to the effective volatility")
    parser.add_argument("--nu", type=float, default=0.0, help="fast-factor volatility scale")
    parser.add_argument("--alpha", type=float, default=0.0, help="fast-factor long-run mean")
    parser.add_argument("--beta", type=float, default=0.0, help="slow-factor vol-of-vol (MC only)")
    parser.add_argument("--rho-xy", dest="rho_xy", type=float, default=0.0)
    parser.add_argument("--rho-xz", dest="rho_xz", type=float, default=0.0)
    parser.add_argument("--rho-yz", dest="rho_yz", type=float, default=0.0)


def _model_from_args(args) -> ModelParams:
    model = ModelParams(
        r=args.r,
        k=args.k,
        alpha_prime=args.alpha_prime,
        z0=args.z0,
        epsilon=args.epsilon,
        nu=args.nu,
        alpha=args.alpha,
        beta=args.beta,
        rho_xy=args.rho_xy,
        rho_xz=args.rho_xz,
        rho_yz=args.rho_yz,
    )
    problems = validate_params(model)
    if problems:
        raise ValueError("; ".join(problems))
    return model


def _model_inputs(args) -> dict:
    return {
        "k": args.k,
        "r": args.r,
        "z0": args.z0,
        "alpha_prime": args.alpha_prime,
        "epsilon": args.epsilon,
        "sigma_min": args.sigma_min,
        "nu": args.nu,
        "alpha": args.alpha,
        "beta": args.beta,
        "rho_xy": args.rho_xy,
        "rho_xz": args.rho_xz,
        "rho_yz": args.rho_yz,
    }


def cmd_price(args) -> int:
    t0 = time.perf_counter()
    model = _model_from_args(args)
    arc = arc_from_ou(model.k, model.alpha_prime, model.z0, sigma_min=args.sigma_min)
    option = OptionSpec(
        style=StrikeStyle(args.style),
        kind=OptionKind(args.kind),
        maturity=args.T,
        strike=args.strike,
    )
    avg = args.avg if args.avg is not None else args.spot
    state = MarketState(t=args.t, x=args.spot, g=avg)
    breakdown = first_order_price(
        option, state, arc, model, v_eps=args.v_eps, gamma_off=args.gamma_off
    )
    inputs = {
        **_model_inputs(args),
        "style": args.style,
        "kind": args.kind,
        "spot": args.spot,
        "avg": avg,
        "strike": args.strike,
        "t": args.t,
        "T": args.T,
        "v_eps": args.v_eps,
        "gamma_off": args.gamma_off,
    }
    outputs = {
        "b0": breakdown.b0,
        "gamma": breakdown.gamma,
        "c0": breakdown.c0,
        "c1": breakdown.c1,
        "price_hat": breakdown.price_hat,
        "m_exponent": breakdown.m_exponent,
        "sigma_bar": effective_vol(arc, args.t),
    }
    _emit(args, "price", inputs, outputs, [], t0)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    t0 = time.perf_counter()
    model = _model_from_args(args)
    arc = arc_from_ou(model.k, model.alpha_prime, model.z0, sigma_min=args.sigma_min)
    ingest = ingest_quotes(args.quotes)
    if args.scatter_out:
        pairs, _ = regression_pairs(ingest.rows, arc, model)
        with open(args.scatter_out, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["x", "y"])
            writer.writerows(pairs)
    report = calibration_report(ingest, arc, model)
    warnings = list(report.pop("warnings"))
    if report["rejects"]:
        warnings.append(f"{len(report['rejects'])} quote(s) rejected; see rejects[]")
    inputs = {**_model_inputs(args), "quotes": str(args.quotes),
              "scatter_out": args.scatter_out}
    _emit(args, "calibrate", inputs, report, warnings, t0)
    return EXIT_OK


def _mc_mean_se(values: np.ndarray, antithetic: bool) -> tuple[float, float]:
    if antithetic:
        pairs = values.shape[0] // 2
        w = 0.5 * (values[:pairs] + values[pairs:])
        return float(w.mean()), float(w.std(ddof=1)) / math.sqrt(pairs)
    return float(values.mean()), float(values.std(ddof=1)) / math.sqrt(values.shape[0])


def cmd_validate(args) -> int:
    t0 = time.perf_counter()
    model = _model_from_args(args)
    arc = arc_from_ou(model.k, model.alpha_prime, model.z0, sigma_min=args.sigma_min)
    cfg = McConfig(
        n_paths=args.paths, n_steps=args.steps, seed=args.seed, antithetic=True
    )
    warnings: list[str] = []
    if args.paths < 1000:
        warnings.append("underpowered: n_paths < 1000, standard errors will be wide")

    sigma = args.sigma
    T = args.T
    state = MarketState(t=0.0, x=args.spot, g=args.spot)
    vol = ConstantVol(sigma)
    comparisons = []

    batch = simulate_paths(model, vol, 0.0, T, args.spot, args.spot, cfg)
    mart, mart_se = _mc_mean_se(np.exp(batch.ln_x), cfg.antithetic)
    disc = math.exp(-model.r * T)
    comparisons.append(("martingale e^{-rT} E[X_T]", args.spot, disc * mart, disc * mart_se))

    floating = OptionSpec(StrikeStyle.FLOATING, OptionKind.CALL, maturity=T)
    est = price_mc(floating, model, vol, state, cfg)
    comparisons.append(
        ("floating ATM call", bs_floating_call(state, sigma, T, model.r), est.price, est.std_error)
    )

    fixed_atm = OptionSpec(StrikeStyle.FIXED, OptionKind.CALL, maturity=T, strike=args.spot)
    est = price_mc(fixed_atm, model, vol, state, cfg)
    comparisons.append(
        ("fixed ATM call", bs_fixed_call(state, sigma, T, args.spot, model.r), est.price, est.std_error)
    )

    tiny = 1e-6 * args.spot
    fixed_tiny = OptionSpec(StrikeStyle.FIXED, OptionKind.CALL, maturity=T, strike=tiny)
    est = price_mc(fixed_tiny, model, vol, state, cfg)
    comparisons.append(
        ("fixed call, K near 0", bs_fixed_call(state, sigma, T, tiny, model.r), est.price, est.std_error)
    )

    rows = []
    all_pass = True
    for name, closed, mc, se in comparisons:
        closed, mc, se = float(closed), float(mc), float(se)
        z = (mc - closed) / se if se > 0 else 0.0
        ok = abs(z) < 3.0
        all_pass &= ok
        rows.append(
            {"name": name, "closed": closed, "mc": mc, "se": se, "z": z, "pass": ok}
        )

    outputs = {"comparisons": rows, "mode": args.mode}
    if args.mode == "full":
        direction = _epsilon_direction(args, cfg)
        outputs["epsilon_direction"] = direction
        all_pass &= direction["pass"]

    inputs = {
        **_model_inputs(args),
        "paths": args.paths,
        "steps": args.steps,
        "seed": args.seed,
        "mode": args.mode,
        "sigma": args.sigma,
        "spot": args.spot,
        "T": args.T,
    }
    _emit(args, "validate", inputs, outputs, warnings, t0)
    return EXIT_OK if all_pass else EXIT_COMPARISON


def _epsilon_direction(args, cfg: McConfig) -> dict:
    """|MC - C0| at the money should be weakly smaller for smaller epsilon.

    The C0 target uses the stationary averaged volatility of the reference
    volatility function on a level arc; a sloped arc would add an
    epsilon-independent gap (the zeroth order freezes the arc at the pricing
    time) that drowns the effect being checked.
    """
    state = MarketState(t=0.0, x=args.spot, g=args.spot)
    T = args.T
    option = OptionSpec(StrikeStyle.FLOATING, OptionKind.CALL, maturity=T)
    results = {}
    for label, eps in (("big", 0.1), ("small", 0.001)):
        model = reference_full_model(eps)
        sig_hom = stationary_effective_vol(model.z0, model.nu)
        flat = VolArc(p_coef=0.0, q_coef=0.0, r_coef=sig_hom, sigma_min=args.sigma_min)
        c0 = float(first_order_price(option, state, flat, model, v_eps=0.0).c0)
        est = price_mc(option, model, FullModel(), state, cfg)
        results[label] = {
            "epsilon": eps,
            "c0": c0,
            "mc": est.price,
            "se": est.std_error,
            "abs_dev": abs(est.price - c0),
        }
    slack = 3.0 * (results["big"]["se"] + results["small"]["se"])
    ok = results["small"]["abs_dev"] <= results["big"]["abs_dev"] + slack
    return {"big": results["big"], "small": results["small"], "slack": slack, "pass": ok}


def cmd_smile(args) -> int:
    t0 = time.perf_counter()
    model = _model_from_args(args)
    arc = arc_from_ou(model.k, model.alpha_prime, model.z0, sigma_min=args.sigma_min)
    try:
        lo, hi, count = args.grid.split(":")
        grid = np.linspace(float(lo), float(hi), int(count))
    except ValueError:
        raise ValueError(f'--grid must look like "lo:hi:n", got {args.grid!r}') from None
    points = smile_curve(
        arc,
        model,
        args.v_eps,
        QuoteStyle(args.style),
        [(args.t, args.T, float(m)) for m in grid],
        spot=args.spot,
    )
    skipped = [p for p in points if p.implied_vol is None]
    warnings = [
        f"moneyness {p.moneyness:g} skipped: {p.note}" for p in skipped
    ]

    def write_rows(handle) -> None:
        writer = csv.writer(handle)
        writer.writerow(["maturity", "moneyness", "implied_vol"])
        for p in points:
            writer.writerow(
                [p.maturity, p.moneyness, "" if p.implied_vol is None else p.implied_vol]
            )

    inputs = {
        **_model_inputs(args),
        "t": args.t,
        "T": args.T,
        "grid": args.grid,
        "style": args.style,
        "v_eps": args.v_eps,
        "spot": args.spot,
        "out": args.out,
    }
    if args.out == "-":
        write_rows(sys.stdout)
        for line in warnings:
            print(line, file=sys.stderr)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            write_rows(handle)
        outputs = {"csv": args.out, "points": len(points), "skipped": len(skipped)}
        _emit(args, "smile", inputs, outputs, warnings, t0)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geoasian",
        description="Geometric Asian option pricing under two-factor stochastic volatility",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="first-order price with component breakdown")
    _add_model_flags(p, required=True)
    p.add_argument("--style", choices=["floating", "fixed"], required=True)
    p.add_argument("--kind", choices=["call", "put"], required=True)
    p.add_argument("--spot", type=float, required=True, help="spot price")
    p.add_argument("--avg", type=float, default=None,
                   help="running geometric average (defaults to spot)")
    p.add_argument("--strike", type=float, default=None, help="fixed strike K")
    p.add_argument("--t", type=float, required=True, help="valuation time (years)")
    p.add_argument("--T", type=float, required=True, help="maturity (years)")
    p.add_argument("--v-eps", dest="v_eps", type=float, default=0.0,
                   help="calibrated group parameter sqrt(eps)*V")
    p.add_argument("--gamma-off", dest="gamma_off", action="store_true",
                   help="pin the modification factor at 1")
    p.add_argument("--json", action="store_true", help="compact single-line JSON")
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("calibrate", help="regress quotes into a_eps and v_eps per cell")
    _add_model_flags(p, required=True)
    p.add_argument("--quotes", required=True, help="quotes CSV path")
    p.add_argument("--scatter-out", dest="scatter_out", default=None,
                   help="write regression (x,y) pairs to this CSV")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="Monte Carlo vs closed-form oracle suite")
    _add_model_flags(p, required=False)
    p.add_argument("--paths", type=int, default=200000)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--mode", choices=["constant", "full"], default="constant",
                   help="constant: closed-form comparisons; full: adds the epsilon sweep")
    p.add_argument("--sigma", type=float, default=0.1834, help="constant-mode volatility")
    p.add_argument("--spot", type=float, default=100.0)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("smile", help="first-order implied-vol curve export")
    _add_model_flags(p, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--grid", default="0.8:1.2:17", help='moneyness grid "lo:hi:n"')
    p.add_argument("--style", choices=[s.value for s in QuoteStyle],
                   default=QuoteStyle.FLOATING_CALL.value)
    p.add_argument("--v-eps", dest="v_eps", type=float, default=0.0)
    p.add_argument("--spot", type=float, default=100.0)
    p.add_argument("--out", default="-", help="smile CSV path ('-' for stdout)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_smile)

    return parser


def _fail(exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        _fail(exc)
        return EXIT_DATA
    except _VALIDATION_ERRORS as exc:
        _fail(exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    raise SystemExit(main())
