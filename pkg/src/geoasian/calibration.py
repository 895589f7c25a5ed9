"""Smile-regression calibration of the group parameter and model smiles.

Each implied-volatility quote contributes one regression point

    y = (I_obs - sigma_bar) * dC0/dsigma
    x = r sigma_bar * (I-weighted u-derivative combination) / D,
    D = (1/(T - t)) [ (1/k) ln((2 - kT)/(2 - kt)) + (T - t)/((2 - kT)(2 - kt)) ],

pooled across maturities into a single OLS line y = a_eps x + d_eps. The
group parameter follows per (t, T) cell from

    v_eps = a_eps * 2 r sigma_bar / D_v,   D_v = (2/(T - t)) [ ... same bracket ],

where the factor sqrt(epsilon) cancels between a = a_eps/sqrt(eps) and
v_eps = sqrt(eps) V. The pair (D, D_v) closes the noise-free round trip
exactly: quotes generated by ``smile_curve`` at a known v_eps regress back
to it. Both x and y are evaluated at the C0 level (gamma included), which
scales them equally and leaves the slope invariant.

Quotes CSV: UTF-8, header required, columns exactly
``t,T,spot,avg,strike,style,implied_vol``; strike empty on floating rows;
style in {floating_call, fixed_put}. Only these two styles are accepted
(the other combinations can have negative vegas).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .closedform import (
    b0_theta,
    bs_fixed_put,
    bs_floating_call,
    greeks_fixed_put,
    greeks_floating_call,
)
from .errors import (
    DegenerateDesign,
    MissingColumn,
    PricingError,
    SingularDenominator,
    UnparseableField,
    VanishingVega,
)
from .model import (
    MarketState,
    ModelParams,
    OptionKind,
    StrikeStyle,
    VolArc,
    effective_vol,
)
from .perturbation import (
    PRICE_FLOOR_FRACTION,
    CorrectionParams,
    c1_fixed,
    c1_floating,
    i_integrals_closed,
    m_exponent,
    modification_factor,
)

VEGA_FLOOR_FRACTION = 1e-10
DENOMINATOR_TOL = 1e-12

CSV_COLUMNS = ("t", "T", "spot", "avg", "strike", "style", "implied_vol")


class QuoteStyle(Enum):
    FLOATING_CALL = "floating_call"
    FIXED_PUT = "fixed_put"


@dataclass(frozen=True)
class QuoteRow:
    """One implied-volatility observation; strike only on fixed_put rows."""

    t: float
    T: float
    spot: float
    avg: float
    strike: float | None
    style: QuoteStyle
    implied_vol: float
    line: int | None = None

    def validate(self) -> list[str]:
        problems: list[str] = []
        if not 0.0 <= self.t < self.T:
            problems.append(f"need 0 <= t < T, got t={self.t}, T={self.T}")
        if not self.spot > 0.0:
            problems.append(f"spot must be > 0, got {self.spot}")
        if not self.avg > 0.0:
            problems.append(f"avg must be > 0, got {self.avg}")
        if not self.implied_vol > 0.0:
            problems.append(f"implied_vol must be > 0, got {self.implied_vol}")
        if self.style is QuoteStyle.FIXED_PUT:
            if self.strike is None or not self.strike > 0.0:
                problems.append(f"fixed_put needs strike > 0, got {self.strike}")
        elif self.strike is not None:
            problems.append("floating_call row must leave strike empty")
        return problems


@dataclass(frozen=True)
class RegressionFit:
    a_eps: float
    d_eps: float
    r_squared: float
    n: int
    se_a_eps: float


@dataclass(frozen=True)
class RejectedRow:
    line: int
    reason: str


@dataclass(frozen=True)
class IngestResult:
    rows: list[QuoteRow]
    rejects: list[RejectedRow]
    warnings: list[str]


@dataclass(frozen=True)
class SmilePoint:
    t: float
    maturity: float
    moneyness: float
    implied_vol: float | None
    note: str | None = None


def _bracket(k: float, t: float, T: float) -> float:
    wt = 2.0 - k * t
    wT = 2.0 - k * T
    if wt * wT <= 0.0 or wT / wt <= 0.0:
        raise SingularDenominator(
            f"bracket undefined: (2 - kT)/(2 - kt) nonpositive at kt={k * t}, kT={k * T}"
        )
    return math.log(wT / wt) / k + (T - t) / (wT * wt)


def regression_denominator(k: float, t: float, T: float) -> float:
    """D of the regressor, (1/(T - t)) times the log-plus-pole bracket."""
    if not T > t:
        raise ValueError(f"need T > t, got t={t}, T={T}")
    d = _bracket(k, t, T) / (T - t)
    if abs(d) < DENOMINATOR_TOL:
        raise SingularDenominator(f"|D| = {abs(d)} below {DENOMINATOR_TOL}")
    return d


def v_denominator(k: float, t: float, T: float) -> float:
    """Denominator of the v_eps map, (2/(T - t)) times the same bracket."""
    if not T > t:
        raise ValueError(f"need T > t, got t={t}, T={T}")
    d = 2.0 * _bracket(k, t, T) / (T - t)
    if abs(d) < DENOMINATOR_TOL:
        raise SingularDenominator(f"|D_v| = {abs(d)} below {DENOMINATOR_TOL}")
    return d


def _c0_pieces(
    style: QuoteStyle,
    state: MarketState,
    sigma: float,
    T: float,
    K: float | None,
    model: ModelParams,
):
    """(greeks of C0, unit correction) at one quote's pricing point."""
    if style is QuoteStyle.FLOATING_CALL:
        theta = b0_theta(
            StrikeStyle.FLOATING, state, sigma, T, model.r, kind=OptionKind.CALL
        )
        b0 = bs_floating_call(state, sigma, T, model.r)
    else:
        theta = b0_theta(
            StrikeStyle.FIXED, state, sigma, T, model.r, K=K, kind=OptionKind.PUT
        )
        b0 = bs_fixed_put(state, sigma, T, K, model.r)
    m = m_exponent(b0, theta, price_floor=PRICE_FLOOR_FRACTION * state.x)
    gamma = modification_factor(model.k, state.t, T, m)
    if style is QuoteStyle.FLOATING_CALL:
        greeks = greeks_floating_call(state, sigma, T, model.r, gamma_factor=gamma)
    else:
        greeks = greeks_fixed_put(state, sigma, T, K, model.r, gamma_factor=gamma)
    ii = i_integrals_closed(model.k, state.t, T)
    unit = CorrectionParams(1.0)
    if style is QuoteStyle.FLOATING_CALL:
        c1_unit = c1_floating(unit, ii, greeks)
    else:
        c1_unit = c1_fixed(unit, ii, greeks)
    return greeks, c1_unit


def regression_row(q: QuoteRow, arc: VolArc, model: ModelParams) -> tuple[float, float]:
    """Map one quote to its (x, y) regression point."""
    problems = q.validate()
    if problems:
        raise ValueError("; ".join(problems))
    sigma = effective_vol(arc, q.t)
    state = MarketState(t=q.t, x=q.spot, g=q.avg)
    greeks, c1_unit = _c0_pieces(q.style, state, sigma, q.T, q.strike, model)
    d = regression_denominator(model.k, q.t, q.T)
    x = model.r * sigma * c1_unit / d
    y = (q.implied_vol - sigma) * greeks.vega
    return x, y


def ols_fit(rows: list[tuple[float, float]]) -> RegressionFit:
    """Ordinary least squares on pooled (x, y) points."""
    n = len(rows)
    if n < 2:
        raise DegenerateDesign(f"need at least 2 rows, got {n}")
    x = np.asarray([p[0] for p in rows], dtype=float)
    y = np.asarray([p[1] for p in rows], dtype=float)
    x_bar = float(x.mean())
    y_bar = float(y.mean())
    dx = x - x_bar
    ss_x = float(dx @ dx)
    if math.sqrt(ss_x / n) <= 1e-12 * (1.0 + abs(x_bar)):
        raise DegenerateDesign("x has (near) zero variance; slope unidentifiable")
    slope = float(dx @ (y - y_bar)) / ss_x
    intercept = y_bar - slope * x_bar
    resid = y - (intercept + slope * x)
    ss_res = float(resid @ resid)
    ss_tot = float((y - y_bar) @ (y - y_bar))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    se = math.sqrt(ss_res / (n - 2) / ss_x) if n > 2 else float("nan")
    return RegressionFit(
        a_eps=slope, d_eps=intercept, r_squared=r_squared, n=n, se_a_eps=se
    )


def v_from_fit(
    fit: RegressionFit,
    epsilon: float,
    r: float,
    sigma: float,
    k: float,
    t: float,
    T: float,
    style: QuoteStyle = QuoteStyle.FLOATING_CALL,
) -> float:
    """v_eps = a_eps 2 r sigma / D_v for one (t, T) cell.

    Equals sqrt(eps) * V with a = a_eps/sqrt(eps) and V = a 2 r sigma / D_v;
    epsilon cancels and is accepted only for interface fidelity. The same map
    applies to both accepted styles.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    if not isinstance(style, QuoteStyle):
        raise ValueError(f"style must be a QuoteStyle, got {style!r}")
    return fit.a_eps * 2.0 * r * sigma / v_denominator(k, t, T)


def ingest_quotes(source) -> IngestResult:
    """Parse and validate a quotes CSV from a path or text stream.

    Structural header problems raise MissingColumn; malformed or invalid rows
    land in rejects with their line number; an empty body yields an EmptyInput
    warning rather than an error.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as handle:
            return ingest_quotes(handle)
    if isinstance(source, (bytes, bytearray)):
        return ingest_quotes(io.StringIO(source.decode("utf-8")))

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingColumn("empty file: header row required") from None
    header = [h.strip() for h in header]
    missing = [c for c in CSV_COLUMNS if c not in header]
    extra = [c for c in header if c not in CSV_COLUMNS]
    if missing or extra:
        raise MissingColumn(
            f"header must be exactly {','.join(CSV_COLUMNS)}; "
            f"missing {missing or 'none'}, unexpected {extra or 'none'}"
        )
    index = {name: header.index(name) for name in CSV_COLUMNS}

    rows: list[QuoteRow] = []
    rejects: list[RejectedRow] = []
    warnings: list[str] = []
    for line_no, record in enumerate(reader, start=2):
        if not record or all(not cell.strip() for cell in record):
            continue
        if len(record) != len(header):
            rejects.append(
                RejectedRow(line_no, f"expected {len(header)} fields, got {len(record)}")
            )
            continue
        try:
            row = _parse_record(record, index, line_no)
        except UnparseableField as exc:
            rejects.append(RejectedRow(line_no, str(exc)))
            continue
        problems = row.validate()
        if problems:
            rejects.append(RejectedRow(line_no, "; ".join(problems)))
            continue
        rows.append(row)
    if not rows and not rejects:
        warnings.append("EmptyInput: no data rows")
    return IngestResult(rows=rows, rejects=rejects, warnings=warnings)


def _parse_record(record: list[str], index: dict[str, int], line_no: int) -> QuoteRow:
    def field(name: str) -> str:
        return record[index[name]].strip()

    def as_float(name: str) -> float:
        raw = field(name)
        try:
            return float(raw)
        except ValueError:
            raise UnparseableField(f"{name}={raw!r} is not a number") from None

    style_raw = field("style")
    try:
        style = QuoteStyle(style_raw)
    except ValueError:
        raise UnparseableField(
            f"style={style_raw!r} not in {{floating_call, fixed_put}}"
        ) from None
    strike_raw = field("strike")
    strike = None
    if strike_raw:
        try:
            strike = float(strike_raw)
        except ValueError:
            raise UnparseableField(f"strike={strike_raw!r} is not a number") from None
    return QuoteRow(
        t=as_float("t"),
        T=as_float("T"),
        spot=as_float("spot"),
        avg=as_float("avg"),
        strike=strike,
        style=style,
        implied_vol=as_float("implied_vol"),
        line=line_no,
    )


def smile_curve(
    arc: VolArc,
    model: ModelParams,
    v_eps: float,
    style: QuoteStyle,
    grid,
    spot: float = 100.0,
) -> list[SmilePoint]:
    """First-order implied vols I = sigma_bar + v_eps c1_unit / vega.

    ``grid`` yields (t, T, moneyness) triples with moneyness = avg/spot;
    fixed_put points are struck at the spot. Inadmissible points (singular
    factors, vanishing vega) are returned flagged instead of raised.
    """
    points: list[SmilePoint] = []
    for t, T, moneyness in grid:
        try:
            sigma = effective_vol(arc, t)
            state = MarketState(t=t, x=spot, g=moneyness * spot)
            strike = None if style is QuoteStyle.FLOATING_CALL else spot
            greeks, c1_unit = _c0_pieces(style, state, sigma, T, strike, model)
            if abs(greeks.vega) < VEGA_FLOOR_FRACTION * spot:
                raise VanishingVega(
                    f"|vega| = {abs(greeks.vega)} below {VEGA_FLOOR_FRACTION * spot}"
                )
            vol = sigma + v_eps * c1_unit / greeks.vega
            points.append(SmilePoint(t, T, moneyness, vol))
        except PricingError as exc:
            points.append(
                SmilePoint(t, T, moneyness, None, note=f"{type(exc).__name__}: {exc}")
            )
    return points


def regression_pairs(
    rows: list[QuoteRow], arc: VolArc, model: ModelParams
) -> tuple[list[tuple[float, float]], list[RejectedRow]]:
    """(x, y) per quote; quotes failing pricing preconditions become rejects."""
    pairs: list[tuple[float, float]] = []
    skipped: list[RejectedRow] = []
    for row in rows:
        try:
            pairs.append(regression_row(row, arc, model))
        except (PricingError, ValueError) as exc:
            skipped.append(
                RejectedRow(row.line or -1, f"{type(exc).__name__}: {exc}")
            )
    return pairs, skipped


def calibration_report(
    ingest: IngestResult, arc: VolArc, model: ModelParams
) -> dict:
    """Full pipeline: regression points, OLS fit, per-cell v_eps, range."""
    pairs, skipped = regression_pairs(ingest.rows, arc, model)
    kept = [
        row
        for row in ingest.rows
        if (row.line or -1) not in {s.line for s in skipped}
    ]
    fit = ols_fit(pairs)
    cells = sorted({(row.t, row.T) for row in kept})
    by_cell = []
    for t, T in cells:
        cell_rows = [row for row in kept if (row.t, row.T) == (t, T)]
        sigma = effective_vol(arc, t)
        v = v_from_fit(
            fit, model.epsilon, model.r, sigma, model.k, t, T, style=cell_rows[0].style
        )
        by_cell.append({"t": t, "T": T, "v_eps": v, "n": len(cell_rows)})
    values = [cell["v_eps"] for cell in by_cell]
    rejects = [
        {"line": rej.line, "reason": rej.reason}
        for rej in (*ingest.rejects, *skipped)
    ]
    return {
        "a_eps": fit.a_eps,
        "d_eps": fit.d_eps,
        "r_squared": fit.r_squared,
        "n": fit.n,
        "se_a_eps": fit.se_a_eps,
        "rejects": rejects,
        "v_eps_by_cell": by_cell,
        "v_eps_range": [min(values), max(values)] if values else None,
        "warnings": list(ingest.warnings),
    }
