"""Black-Scholes closed forms for continuous geometric Asian options.

This is the B0 layer: prices, u-derivatives, vegas, and theta of the
constant-volatility geometric-average option in the (s, u) state,

    s = ln x,   u = t ln(g / x).

Floating call:  B0 = e^s [N(d1) - e^{u/T - Q} N(d2)]
Fixed call:     B0 = e^{s + u/T - Q} N(d1_hat) - K e^{-r(T-t)} N(d2_hat)
Fixed put:      by put-call parity

with the drift adjustment

    Q = (r + sigma^2/2)(T^2 - t^2)/(2T) - sigma^2 (T^3 - t^3)/(6 T^2).

The modification factor gamma multiplies B0 and is independent of (u, sigma),
so Greeks of the modified price are gamma times the B0 Greeks; callers pass
``gamma_factor`` accordingly. ``theta_b0`` is always reported at the plain B0
level because it feeds M = theta/B0, where gamma cancels.

Every derivative formula here is validated against central finite differences
in the test suite; theta defaults to a Richardson-extrapolated finite
difference with the analytic form available for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import erfc

from .errors import DegenerateHorizon, NonPositiveStrike, UnsupportedContract
from .model import MarketState, OptionKind, StrikeStyle

HORIZON_TOL = 1e-9

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _ncdf(x: float) -> float:
    return 0.5 * erfc(-x / _SQRT2)


def _npdf(x: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * x * x)


@dataclass(frozen=True)
class DTermsFloating:
    d1: float
    d2: float
    q_drift: float


@dataclass(frozen=True)
class DTermsFixed:
    d1_hat: float
    d2_hat: float
    q_drift: float


@dataclass(frozen=True)
class GreekSet:
    """u-derivatives and vega of gamma * B0, plus theta of plain B0.

    du1, du2, du3 and vega include the caller's gamma_factor; theta_b0 does
    not (it exists to form M = theta_b0 / b0, which is gamma-free).
    """

    du1: float
    du2: float
    du3: float
    vega: float
    theta_b0: float


def _check_horizon(t: float, T: float) -> None:
    if t > T:
        raise DegenerateHorizon(f"t = {t} exceeds maturity T = {T}")
    if T - t < HORIZON_TOL:
        raise DegenerateHorizon(f"T - t = {T - t} below {HORIZON_TOL}")


def _check_sigma(sigma: float) -> None:
    if not sigma > 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")


def q_drift_term(sigma: float, t: float, T: float, r: float) -> float:
    """Drift adjustment Q entering e^{s + u/T - Q}."""
    return (r + sigma * sigma / 2.0) * (T * T - t * t) / (2.0 * T) - (
        sigma * sigma / (6.0 * T * T)
    ) * (T ** 3 - t ** 3)


def d_terms_floating(
    sigma: float, t: float, T: float, u: float, r: float
) -> DTermsFloating:
    """d1, d2, and Q for the floating-strike call."""
    _check_sigma(sigma)
    _check_horizon(t, T)
    root = math.sqrt((T ** 3 - t ** 3) / 3.0)
    d1 = (-u + (r + sigma * sigma / 2.0) * (T * T - t * t) / 2.0) / (sigma * root)
    d2 = d1 - (sigma / T) * root
    return DTermsFloating(d1=d1, d2=d2, q_drift=q_drift_term(sigma, t, T, r))


def d_terms_fixed(
    sigma: float, t: float, T: float, s: float, u: float, K: float, r: float
) -> DTermsFixed:
    """d1_hat, d2_hat, and Q for the fixed-strike contract."""
    _check_sigma(sigma)
    _check_horizon(t, T)
    if not K > 0.0:
        raise NonPositiveStrike(f"K must be > 0, got {K}")
    tau = T - t
    gap = (sigma / T) * math.sqrt(tau ** 3 / 3.0)
    d2 = (u / T + s - math.log(K) + (r - sigma * sigma / 2.0) * tau * tau / (2.0 * T)) / gap
    return DTermsFixed(d1_hat=d2 + gap, d2_hat=d2, q_drift=q_drift_term(sigma, t, T, r))


# scalar cores, also used by the finite-difference theta (which probes t
# outside the public t >= 0 domain while holding s, u, sigma fixed)


def _b0_floating_call(s: float, u: float, t: float, T: float, sigma: float, r: float) -> float:
    root = math.sqrt((T ** 3 - t ** 3) / 3.0)
    d1 = (-u + (r + sigma * sigma / 2.0) * (T * T - t * t) / 2.0) / (sigma * root)
    d2 = d1 - (sigma / T) * root
    q = q_drift_term(sigma, t, T, r)
    return math.exp(s) * _ncdf(d1) - math.exp(s + u / T - q) * _ncdf(d2)


def _b0_fixed_call(
    s: float, u: float, t: float, T: float, K: float, sigma: float, r: float
) -> float:
    tau = T - t
    gap = (sigma / T) * math.sqrt(tau ** 3 / 3.0)
    d2 = (u / T + s - math.log(K) + (r - sigma * sigma / 2.0) * tau * tau / (2.0 * T)) / gap
    q = q_drift_term(sigma, t, T, r)
    return math.exp(s + u / T - q) * _ncdf(d2 + gap) - K * math.exp(-r * tau) * _ncdf(d2)


def _b0_fixed_put(
    s: float, u: float, t: float, T: float, K: float, sigma: float, r: float
) -> float:
    tau = T - t
    q = q_drift_term(sigma, t, T, r)
    call = _b0_fixed_call(s, u, t, T, K, sigma, r)
    return call - math.exp(s + u / T - q) + K * math.exp(-r * tau)


def _terminal_payoff(
    style: StrikeStyle, kind: OptionKind, s: float, u: float, T: float, K: float | None
) -> float:
    g = math.exp(s + u / T)
    x = math.exp(s)
    if style is StrikeStyle.FLOATING:
        if kind is not OptionKind.CALL:
            raise UnsupportedContract("floating-strike puts are not supported")
        return max(x - g, 0.0)
    assert K is not None
    if kind is OptionKind.CALL:
        return max(g - K, 0.0)
    return max(K - g, 0.0)


def bs_floating_call(state: MarketState, sigma: float, T: float, r: float) -> float:
    """Floating-strike geometric Asian call under constant volatility.

    Within horizon_tol of maturity the terminal payoff
    e^s max(1 - e^{u/T}, 0) is returned instead of the formula.
    """
    _check_sigma(sigma)
    if state.t > T:
        raise DegenerateHorizon(f"t = {state.t} exceeds maturity T = {T}")
    if T - state.t < HORIZON_TOL:
        return _terminal_payoff(StrikeStyle.FLOATING, OptionKind.CALL, state.s, state.u, T, None)
    return _b0_floating_call(state.s, state.u, state.t, T, sigma, r)


def bs_fixed_call(state: MarketState, sigma: float, T: float, K: float, r: float) -> float:
    """Fixed-strike geometric Asian call under constant volatility."""
    _check_sigma(sigma)
    if not K > 0.0:
        raise NonPositiveStrike(f"K must be > 0, got {K}")
    if state.t > T:
        raise DegenerateHorizon(f"t = {state.t} exceeds maturity T = {T}")
    if T - state.t < HORIZON_TOL:
        return _terminal_payoff(StrikeStyle.FIXED, OptionKind.CALL, state.s, state.u, T, K)
    return _b0_fixed_call(state.s, state.u, state.t, T, K, sigma, r)


def bs_fixed_put(state: MarketState, sigma: float, T: float, K: float, r: float) -> float:
    """Fixed-strike geometric Asian put, defined through put-call parity."""
    _check_sigma(sigma)
    if not K > 0.0:
        raise NonPositiveStrike(f"K must be > 0, got {K}")
    if state.t > T:
        raise DegenerateHorizon(f"t = {state.t} exceeds maturity T = {T}")
    if T - state.t < HORIZON_TOL:
        return _terminal_payoff(StrikeStyle.FIXED, OptionKind.PUT, state.s, state.u, T, K)
    return _b0_fixed_put(state.s, state.u, state.t, T, K, sigma, r)


def greeks_floating_call(
    state: MarketState,
    sigma: float,
    T: float,
    r: float,
    gamma_factor: float = 1.0,
) -> GreekSet:
    """u-derivatives and vega of gamma * B0 for the floating call.

    du1 = -gamma (e^{s + u/T - Q}/T) N(d2); the higher derivatives follow the
    recursion with divisor kappa = sigma sqrt((T^3 - t^3)/3), and

    vega = gamma e^{s + u/T - Q} [ sqrt((T^3 - t^3)/3) phi(d2)/T
           + sigma (T - t)^2 (T + 2t) N(d2) / (6 T^2) ].
    """
    d = d_terms_floating(sigma, state.t, T, state.u, r)
    t, u, s = state.t, state.u, state.s
    root = math.sqrt((T ** 3 - t ** 3) / 3.0)
    kappa = sigma * root
    E = math.exp(s + u / T - d.q_drift)
    pdf = _npdf(d.d2)
    du1 = -(E / T) * _ncdf(d.d2)
    du2 = (du1 + E * pdf / kappa) / T
    du3 = (du2 + E * (pdf / (T * kappa) + d.d2 * pdf / (kappa * kappa))) / T
    vega = E * (
        root * pdf / T
        + sigma * (T - t) ** 2 * (T + 2.0 * t) * _ncdf(d.d2) / (6.0 * T * T)
    )
    theta = b0_theta(StrikeStyle.FLOATING, state, sigma, T, r)
    return GreekSet(
        du1=gamma_factor * du1,
        du2=gamma_factor * du2,
        du3=gamma_factor * du3,
        vega=gamma_factor * vega,
        theta_b0=theta,
    )


def _greeks_fixed(
    state: MarketState,
    sigma: float,
    T: float,
    K: float,
    r: float,
    kind: OptionKind,
    gamma_factor: float,
) -> GreekSet:
    d = d_terms_fixed(sigma, state.t, T, state.s, state.u, K, r)
    t, u, s = state.t, state.u, state.s
    tau = T - t
    root = math.sqrt(tau ** 3 / 3.0)
    kappa = sigma * root
    E = math.exp(s + u / T - d.q_drift)
    pdf = _npdf(d.d1_hat)
    dqds = sigma * tau * tau * (T + 2.0 * t) / (6.0 * T * T)
    if kind is OptionKind.CALL:
        du1 = (E / T) * _ncdf(d.d1_hat)
        vega = E * (root * pdf / T - dqds * _ncdf(d.d1_hat))
    else:
        du1 = -(E / T) * _ncdf(-d.d1_hat)
        vega = E * (root * pdf / T + dqds * _ncdf(-d.d1_hat))
    du2 = (du1 + E * pdf / kappa) / T
    du3 = (du2 + E * (pdf / (T * kappa) - d.d1_hat * pdf / (kappa * kappa))) / T
    theta = b0_theta(StrikeStyle.FIXED, state, sigma, T, r, K=K, kind=kind)
    return GreekSet(
        du1=gamma_factor * du1,
        du2=gamma_factor * du2,
        du3=gamma_factor * du3,
        vega=gamma_factor * vega,
        theta_b0=theta,
    )


def greeks_fixed_put(
    state: MarketState,
    sigma: float,
    T: float,
    K: float,
    r: float,
    gamma_factor: float = 1.0,
) -> GreekSet:
    """u-derivatives and vega of gamma * B0 for the fixed-strike put.

    du1 = -gamma (e^{s + u/T - Q}/T) N(-d1_hat); recursion divisor
    kappa = sigma sqrt((T - t)^3 / 3). The put vega is strictly positive.
    """
    return _greeks_fixed(state, sigma, T, K, r, OptionKind.PUT, gamma_factor)


def greeks_fixed_call(
    state: MarketState,
    sigma: float,
    T: float,
    K: float,
    r: float,
    gamma_factor: float = 1.0,
) -> GreekSet:
    """Fixed-strike call Greeks; the call vega can be negative."""
    return _greeks_fixed(state, sigma, T, K, r, OptionKind.CALL, gamma_factor)


def _theta_analytic(
    style: StrikeStyle,
    kind: OptionKind,
    s: float,
    u: float,
    t: float,
    T: float,
    sigma: float,
    r: float,
    K: float | None,
) -> float:
    qdot = -(r + sigma * sigma / 2.0) * t / T + sigma * sigma * t * t / (2.0 * T * T)
    if style is StrikeStyle.FLOATING:
        root = math.sqrt((T ** 3 - t ** 3) / 3.0)
        d1 = (-u + (r + sigma * sigma / 2.0) * (T * T - t * t) / 2.0) / (sigma * root)
        d2 = d1 - (sigma / T) * root
        q = q_drift_term(sigma, t, T, r)
        E = math.exp(s + u / T - q)
        gap_dot = -sigma * t * t / (2.0 * T * root)
        return E * (_npdf(d2) * gap_dot + _ncdf(d2) * qdot)
    assert K is not None
    tau = T - t
    gap = (sigma / T) * math.sqrt(tau ** 3 / 3.0)
    d2 = (u / T + s - math.log(K) + (r - sigma * sigma / 2.0) * tau * tau / (2.0 * T)) / gap
    d1 = d2 + gap
    q = q_drift_term(sigma, t, T, r)
    E = math.exp(s + u / T - q)
    gap_dot = -(sigma / T) * tau * tau / (2.0 * math.sqrt(tau ** 3 / 3.0))
    disc = K * math.exp(-r * tau)
    if kind is OptionKind.CALL:
        return E * (_npdf(d1) * gap_dot - qdot * _ncdf(d1)) - r * disc * _ncdf(d2)
    return r * disc * _ncdf(-d2) + qdot * E * _ncdf(-d1) + E * _npdf(d1) * gap_dot


def b0_theta(
    style: StrikeStyle,
    state: MarketState,
    sigma: float,
    T: float,
    r: float,
    K: float | None = None,
    kind: OptionKind = OptionKind.CALL,
    method: str = "fd",
    fd_step: float | None = None,
) -> float:
    """dB0/dt at fixed (s, u, sigma).

    method "fd" (default) uses a Richardson-extrapolated central difference,
    (4 D(h/2) - D(h))/3 with D(h) = (f(t+h) - f(t-h))/(2h); method "analytic"
    evaluates the differentiated closed form. Both agree to 1e-7 relative at
    interior points. Within 8e-8 of maturity the FD stencil would underflow
    and the analytic form is substituted.
    """
    _check_sigma(sigma)
    _check_horizon(state.t, T)
    if style is StrikeStyle.FLOATING:
        if kind is not OptionKind.CALL:
            raise UnsupportedContract("floating-strike puts are not supported")
        core = lambda tt: _b0_floating_call(state.s, state.u, tt, T, sigma, r)
    else:
        if K is None or not K > 0.0:
            raise NonPositiveStrike(f"fixed style requires K > 0, got {K}")
        if kind is OptionKind.CALL:
            core = lambda tt: _b0_fixed_call(state.s, state.u, tt, T, K, sigma, r)
        else:
            core = lambda tt: _b0_fixed_put(state.s, state.u, tt, T, K, sigma, r)
    if method == "analytic":
        return _theta_analytic(style, kind, state.s, state.u, state.t, T, sigma, r, K)
    if method != "fd":
        raise ValueError(f"unknown theta method {method!r}")
    h = fd_step if fd_step is not None else 1e-5 * max(T, 1.0)
    h = min(h, (T - state.t) / 8.0)
    if h < 1e-8:
        return _theta_analytic(style, kind, state.s, state.u, state.t, T, sigma, r, K)
    t = state.t
    d_h = (core(t + h) - core(t - h)) / (2.0 * h)
    d_h2 = (core(t + h / 2.0) - core(t - h / 2.0)) / h
    return (4.0 * d_h2 - d_h) / 3.0
