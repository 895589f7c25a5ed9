"""Monte Carlo oracle over the full two-factor SDE system.

State per path is (ln X, Y, Z) stepped over [t, T]:

    d ln X = (r - f^2/2) dt + f dW^x,      f = f(Y, Z)
    dY     = (1/eps)(alpha - Y) dt + (nu sqrt(2)/sqrt(eps)) dW^y
    dZ     = k (alpha' - Z) dt + beta dW^z

ln X uses an Euler step (exact per step under constant volatility); Y and Z
use exact OU transitions, since eps down at 1e-3 makes Euler on Y stiff. The
per-step Gaussian triple is correlated through the Cholesky factor of the
correlation matrix, which couples the exact OU integrals to the X increment
only to O(dt). The geometric average accumulates trapezoidally on ln X and
continues the running average through ln G_T = (t ln g + int_t^T ln X)/T.

Reproducibility contract: draws come from a counter-based Philox stream keyed
by the seed, with path i owning the fixed word block [i L, (i+1) L) (L padded
to a multiple of 4 words, the Philox counter granularity). The path set is
therefore bit-identical for any chunk layout; antithetic runs give pair p the
block of p and mirror it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import PDFactorizationFailure
from .model import (
    MarketState,
    ModelParams,
    OptionKind,
    OptionSpec,
    StrikeStyle,
    correlation_pd_margin,
    validate_params,
)

WORD_BUDGET = 1 << 23  # max random words materialized per chunk


@dataclass(frozen=True)
class McConfig:
    n_paths: int
    n_steps: int
    seed: int
    scheme: str = "euler"
    antithetic: bool = False
    chunk_size: int | None = None

    def __post_init__(self) -> None:
        if self.n_paths < 2:
            raise ValueError(f"n_paths must be >= 2, got {self.n_paths}")
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.scheme != "euler":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic runs need an even n_paths")
        if self.chunk_size is not None and self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")


@dataclass(frozen=True)
class ConstantVol:
    """Constant volatility; sigma = 0 is allowed as the deterministic limit."""

    sigma: float

    def __post_init__(self) -> None:
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class FullModel:
    """Volatility f = clamp(z exp(y - alpha)) driven by the simulated factors."""

    f_min: float = 0.01
    f_max: float = 2.0

    def __post_init__(self) -> None:
        if not 0.0 < self.f_min < self.f_max:
            raise ValueError(
                f"need 0 < f_min < f_max, got ({self.f_min}, {self.f_max})"
            )


VolSpec = ConstantVol | FullModel


@dataclass(frozen=True)
class PathBatch:
    """Terminal per-path state; arrays are indexed by global path id."""

    ln_x: np.ndarray
    ln_g: np.ndarray
    y: np.ndarray | None
    z: np.ndarray | None
    antithetic: bool


@dataclass(frozen=True)
class McEstimate:
    price: float
    std_error: float
    n_paths: int
    n_steps: int
    seed: int


def reference_full_model(epsilon: float) -> ModelParams:
    """Single-correlation reference regime for the oracle direction check.

    Only the spot-fast correlation is active and the slow factor is noiseless
    and nearly level (z0 = alpha_prime exactly is a degenerate arc), so the
    closed-form comparison target stays interpretable while epsilon is swept.
    """
    return ModelParams(
        r=0.0264,
        k=2.0,
        alpha_prime=0.1836,
        z0=0.1834,
        epsilon=epsilon,
        nu=0.3,
        alpha=0.0,
        beta=0.0,
        rho_xy=-0.3,
        rho_xz=0.0,
        rho_yz=0.0,
    )


def stationary_effective_vol(level: float, nu: float) -> float:
    """Averaged volatility sqrt(E[f^2]) for f = z e^{y - alpha} at a fixed z.

    Under the stationary law y - alpha ~ N(0, nu^2) the second moment of the
    exponential is e^{2 nu^2}, so the level picks up a factor e^{nu^2}.  Clamp
    effects are ignored; they are negligible whenever the clamp bounds sit
    several nu away from the level.
    """
    return level * math.exp(nu * nu)


def f_full(y, z, clamp: tuple[float, float] = (0.01, 2.0), alpha: float = 0.0):
    """Bounded exponential-OU volatility min(f_max, max(f_min, z e^{y - alpha}))."""
    f_min, f_max = clamp
    if not 0.0 < f_min < f_max:
        raise ValueError(f"need 0 < f_min < f_max, got {clamp}")
    return np.clip(z * np.exp(y - alpha), f_min, f_max)


def _normals_for_chunk(
    seed: int, lo: int, n_chunk: int, words_per_path: int, n_words: int
) -> np.ndarray:
    """Standard normals for draw-paths [lo, lo + n_chunk), shape (n_chunk, n_words).

    words_per_path is a multiple of 4, so the chunk start lands exactly on a
    Philox counter boundary (advance moves 4 words per tick).
    """
    bitgen = np.random.Philox(key=seed)
    bitgen.advance((lo * words_per_path) // 4)
    raw = bitgen.random_raw(n_chunk * words_per_path)
    uniform = (raw >> np.uint64(11)) * 2.0 ** -53 + 2.0 ** -54
    normals = ndtri(uniform)
    return normals.reshape(n_chunk, words_per_path)[:, :n_words]


def simulate_paths(
    model: ModelParams,
    vol: VolSpec,
    t: float,
    T: float,
    x0: float,
    g0: float,
    cfg: McConfig,
) -> PathBatch:
    """Simulate the SDE system over [t, T] and return terminal path state."""
    problems = validate_params(model)
    pd_problems = [p for p in problems if "positive definite" in p]
    if pd_problems:
        raise PDFactorizationFailure(pd_problems[0])
    if problems:
        raise ValueError("; ".join(problems))
    if not T > t:
        raise ValueError(f"need T > t, got t={t}, T={T}")
    if x0 <= 0.0 or g0 <= 0.0:
        raise ValueError(f"x0 and g0 must be > 0, got {x0}, {g0}")

    full = isinstance(vol, FullModel)
    n_comp = 3 if full else 1
    n_steps = cfg.n_steps
    n_words = n_steps * n_comp
    words_per_path = 4 * ((n_words + 3) // 4)

    if full:
        corr = np.array(
            [
                [1.0, model.rho_xy, model.rho_xz],
                [model.rho_xy, 1.0, model.rho_yz],
                [model.rho_xz, model.rho_yz, 1.0],
            ]
        )
        if correlation_pd_margin(model.rho_xy, model.rho_xz, model.rho_yz) <= 0.0:
            raise PDFactorizationFailure("correlation matrix is not positive definite")
        try:
            chol = np.linalg.cholesky(corr)
        except np.linalg.LinAlgError as exc:
            raise PDFactorizationFailure(str(exc)) from None

    dt = (T - t) / n_steps
    sqrt_dt = math.sqrt(dt)
    r = model.r
    if full:
        ey = math.exp(-dt / model.epsilon)
        sd_y = model.nu * math.sqrt(max(0.0, 1.0 - ey * ey))
        ez = math.exp(-model.k * dt)
        sd_z = model.beta * math.sqrt(max(0.0, (1.0 - ez * ez) / (2.0 * model.k)))
        clamp = (vol.f_min, vol.f_max)

    anti = cfg.antithetic
    draw_paths = cfg.n_paths // 2 if anti else cfg.n_paths
    n_total = cfg.n_paths

    ln_x = np.empty(n_total)
    ln_g = np.empty(n_total)
    y_out = np.empty(n_total) if full else None
    z_out = np.empty(n_total) if full else None

    if cfg.chunk_size is not None:
        chunk = cfg.chunk_size
    else:
        chunk = max(1, min(draw_paths, WORD_BUDGET // words_per_path))

    for lo in range(0, draw_paths, chunk):
        hi = min(lo + chunk, draw_paths)
        nc = hi - lo
        normals = _normals_for_chunk(cfg.seed, lo, nc, words_per_path, n_words)
        normals = normals.reshape(nc, n_steps, n_comp)

        m = 2 * nc if anti else nc
        lnx = np.full(m, math.log(x0))
        integral = np.zeros(m)
        if full:
            y = np.full(m, model.alpha)
            z = np.full(m, model.z0)

        for j in range(n_steps):
            e = normals[:, j, :]
            if anti:
                e = np.concatenate([e, -e], axis=0)
            if full:
                f = f_full(y, z, clamp, model.alpha)
            else:
                f = vol.sigma
            d_lnx = (r - 0.5 * f * f) * dt + f * sqrt_dt * e[:, 0]
            integral += 0.5 * dt * (2.0 * lnx + d_lnx)
            lnx += d_lnx
            if full:
                w_y = chol[1, 0] * e[:, 0] + chol[1, 1] * e[:, 1]
                w_z = chol[2, 0] * e[:, 0] + chol[2, 1] * e[:, 1] + chol[2, 2] * e[:, 2]
                y = model.alpha + (y - model.alpha) * ey + sd_y * w_y
                z = model.alpha_prime + (z - model.alpha_prime) * ez + sd_z * w_z

        g_final = (t * math.log(g0) + integral) / T
        if anti:
            plus = slice(lo, hi)
            minus = slice(draw_paths + lo, draw_paths + hi)
            ln_x[plus], ln_x[minus] = lnx[:nc], lnx[nc:]
            ln_g[plus], ln_g[minus] = g_final[:nc], g_final[nc:]
            if full:
                y_out[plus], y_out[minus] = y[:nc], y[nc:]
                z_out[plus], z_out[minus] = z[:nc], z[nc:]
        else:
            ln_x[lo:hi] = lnx
            ln_g[lo:hi] = g_final
            if full:
                y_out[lo:hi] = y
                z_out[lo:hi] = z

    return PathBatch(ln_x=ln_x, ln_g=ln_g, y=y_out, z=z_out, antithetic=anti)


def _payoffs(spec: OptionSpec, batch: PathBatch) -> np.ndarray:
    x = np.exp(batch.ln_x)
    g = np.exp(batch.ln_g)
    if spec.style is StrikeStyle.FLOATING:
        if spec.kind is OptionKind.CALL:
            return np.maximum(x - g, 0.0)
        return np.maximum(g - x, 0.0)
    if spec.kind is OptionKind.CALL:
        return np.maximum(g - spec.strike, 0.0)
    return np.maximum(spec.strike - g, 0.0)


def price_mc(
    spec: OptionSpec,
    model: ModelParams,
    vol: VolSpec,
    state: MarketState,
    cfg: McConfig,
) -> McEstimate:
    """Discounted mean payoff with its standard error.

    Antithetic pairs are averaged before the standard error is formed, so a
    pair counts once. Floating puts are priced here (the payoff is
    well-defined) even though the analytic layers reject them.
    """
    T = spec.maturity
    if not T > state.t:
        raise ValueError(f"need T > t, got t={state.t}, T={T}")
    batch = simulate_paths(model, vol, state.t, T, state.x, state.g, cfg)
    h = _payoffs(spec, batch)
    disc = math.exp(-model.r * (T - state.t))
    if cfg.antithetic:
        pairs = cfg.n_paths // 2
        w = 0.5 * (h[:pairs] + h[pairs:])
        price = disc * float(w.mean())
        se = disc * float(w.std(ddof=1)) / math.sqrt(pairs)
    else:
        price = disc * float(h.mean())
        se = disc * float(h.std(ddof=1)) / math.sqrt(cfg.n_paths)
    return McEstimate(
        price=price,
        std_error=se,
        n_paths=cfg.n_paths,
        n_steps=cfg.n_steps,
        seed=cfg.seed,
    )
