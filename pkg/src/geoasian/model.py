"""Model parameters, the quadratic volatility arc, state transform, and the l-factor.

The slow volatility factor is an OU process with speed k and long-run level
alpha_prime started at z0. Its mean path is approximated over the contract
life by the quadratic arc

    sigma_bar(t) = P t^2 + Q t + R,

with P = (z0 - alpha_prime) k^2 / 2, Q = -(z0 - alpha_prime) k, R = z0 (the
second-order Taylor expansion of the mean path at t = 0). Everything downstream
consumes the arc through ``effective_vol``, floored at ``sigma_min``.

The log-spot / log-average state is (s, u) = (ln x, t ln(g/x)); the l-factor
(1 - kt + k^2 t^2 / 2)/(1 - kt) carries the arc's time dependence into the
pricing operator and is singular at kt = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import (
    DegenerateArc,
    NonPositivePrice,
    NonPositiveStrike,
    SingularL,
    UnsupportedContract,
)

SINGULARITY_TOL = 1e-8
SIGMA_MIN_DEFAULT = 1e-4


@dataclass(frozen=True)
class ModelParams:
    """Market and model constants.

    r            risk-free rate (1/year)
    k            slow-factor mean-reversion speed (1/year)
    alpha_prime  slow-factor long-run level (volatility units)
    z0           slow-factor initial level (volatility units)
    epsilon      fast time scale (years, > 0)
    nu           fast-factor volatility scale
    alpha        fast-factor long-run mean
    beta         slow-factor vol-of-vol (Monte Carlo only)
    rho_xy, rho_xz, rho_yz   Brownian correlations
    """

    r: float
    k: float
    alpha_prime: float
    z0: float
    epsilon: float
    nu: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    rho_xy: float = 0.0
    rho_xz: float = 0.0
    rho_yz: float = 0.0


def correlation_pd_margin(rho_xy: float, rho_xz: float, rho_yz: float) -> float:
    """Determinant of the 3x3 correlation matrix; positive iff it is PD."""
    return (
        1.0
        + 2.0 * rho_xy * rho_xz * rho_yz
        - rho_xy * rho_xy
        - rho_xz * rho_xz
        - rho_yz * rho_yz
    )


def validate_params(p: ModelParams) -> list[str]:
    """Return the full list of violated invariants (empty when valid)."""
    problems: list[str] = []
    if not p.r >= 0.0:
        problems.append(f"r must be >= 0, got {p.r}")
    if not p.k > 0.0:
        problems.append(f"k must be > 0, got {p.k}")
    if not p.epsilon > 0.0:
        problems.append(f"epsilon must be > 0, got {p.epsilon}")
    if not p.nu >= 0.0:
        problems.append(f"nu must be >= 0, got {p.nu}")
    if not p.beta >= 0.0:
        problems.append(f"beta must be >= 0, got {p.beta}")
    if p.z0 == p.alpha_prime:
        problems.append("DegenerateArc: z0 must differ from alpha_prime")
    for name, rho in (("rho_xy", p.rho_xy), ("rho_xz", p.rho_xz), ("rho_yz", p.rho_yz)):
        if not abs(rho) < 1.0:
            problems.append(f"{name} must satisfy |rho| < 1, got {rho}")
    if correlation_pd_margin(p.rho_xy, p.rho_xz, p.rho_yz) <= 0.0:
        problems.append("correlation matrix is not positive definite")
    return problems


@dataclass(frozen=True)
class VolArc:
    """Quadratic-arc coefficients and the positive floor applied to the arc."""

    p_coef: float
    q_coef: float
    r_coef: float
    sigma_min: float = SIGMA_MIN_DEFAULT

    def __post_init__(self) -> None:
        if not self.sigma_min > 0.0:
            raise ValueError(f"sigma_min must be > 0, got {self.sigma_min}")


def arc_from_ou(
    k: float,
    alpha_prime: float,
    z0: float,
    sigma_min: float = SIGMA_MIN_DEFAULT,
) -> VolArc:
    """Build the arc from the OU parameters of the slow factor.

    P = (z0 - alpha_prime) k^2 / 2, Q = -(z0 - alpha_prime) k, R = z0.
    Raises DegenerateArc when z0 = alpha_prime (P would vanish).
    """
    if not k > 0.0:
        raise ValueError(f"k must be > 0, got {k}")
    if z0 == alpha_prime:
        raise DegenerateArc(
            f"z0 = alpha_prime = {z0}: arc curvature P vanishes"
        )
    gap = z0 - alpha_prime
    return VolArc(
        p_coef=gap * k * k / 2.0,
        q_coef=-gap * k,
        r_coef=z0,
        sigma_min=sigma_min,
    )


def effective_vol(arc: VolArc, t: float) -> float:
    """Arc volatility at time t, floored at arc.sigma_min."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    value = (arc.p_coef * t + arc.q_coef) * t + arc.r_coef
    return max(arc.sigma_min, value)


def state_transform(x: float, g: float, t: float) -> tuple[float, float]:
    """(s, u) = (ln x, t ln(g/x)); raises NonPositivePrice on bad inputs."""
    if x <= 0.0 or g <= 0.0:
        raise NonPositivePrice(f"spot and average must be > 0, got x={x}, g={g}")
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    return math.log(x), t * (math.log(g) - math.log(x))


@dataclass(frozen=True)
class MarketState:
    """Valuation time, spot, and running geometric average.

    The empty-window convention sets g = x at t = 0, so u = 0 there.
    """

    t: float
    x: float
    g: float

    def __post_init__(self) -> None:
        state_transform(self.x, self.g, self.t)

    @property
    def s(self) -> float:
        return math.log(self.x)

    @property
    def u(self) -> float:
        return self.t * (math.log(self.g) - math.log(self.x))


def l_factor(k: float, t: float) -> float:
    """(1 - kt + k^2 t^2/2)/(1 - kt); raises SingularL within tol of kt = 1."""
    kt = k * t
    if abs(1.0 - kt) <= SINGULARITY_TOL:
        raise SingularL(f"kt = {kt} within {SINGULARITY_TOL} of 1")
    return (1.0 - kt + kt * kt / 2.0) / (1.0 - kt)


def one_plus_l(k: float, t: float) -> float:
    """(2 - kt)^2 / (2 (1 - kt)), the closed form of 1 + l_factor(k, t)."""
    kt = k * t
    if abs(1.0 - kt) <= SINGULARITY_TOL:
        raise SingularL(f"kt = {kt} within {SINGULARITY_TOL} of 1")
    w = 2.0 - kt
    return w * w / (2.0 * (1.0 - kt))


class StrikeStyle(Enum):
    FLOATING = "floating"
    FIXED = "fixed"


class OptionKind(Enum):
    CALL = "call"
    PUT = "put"


@dataclass(frozen=True)
class OptionSpec:
    """Contract description; strike is present iff the style is fixed."""

    style: StrikeStyle
    kind: OptionKind
    maturity: float
    strike: float | None = None

    def __post_init__(self) -> None:
        if not self.maturity > 0.0:
            raise ValueError(f"maturity must be > 0, got {self.maturity}")
        if self.style is StrikeStyle.FIXED:
            if self.strike is None:
                raise NonPositiveStrike("fixed-strike contract requires K")
            if not self.strike > 0.0:
                raise NonPositiveStrike(f"K must be > 0, got {self.strike}")
        elif self.strike is not None:
            raise UnsupportedContract("floating-strike contract takes no K")
