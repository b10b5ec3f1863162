"""Exact Monte Carlo simulation of cushion, portfolio and state-price paths.

Between jumps the cushion under a constant multiplier is a geometric Brownian
motion, and at a jump of size ``gamma`` it is multiplied by ``1 + m gamma``.
Both pieces are sampled exactly, so the monitoring grid only controls where
values are recorded. Paths are processed in blocks of ``rng.BLOCK_SIZE``; each
block has its own random streams, which makes results independent of the
number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from . import kernels
from .errors import AdmissibilityError, ConfigError
from .market import (
    ConstantJump,
    JumpSpec,
    MarketParams,
    admissible_interval,
    check_multiplier,
    levy_integral,
    sample_jump_size,
)
from .rng import BLOCK_SIZE, blocks, draw_block
from .solver import GirsanovKernel, kernel_from_multiplier, solve_multiplier
from .utility import UtilityParams, envelope_eval, solve_c_hat, utility_eval

# perturbed jump sizes are kept strictly above -1
GAMMA_FLOOR = -1.0 + 1e-12

SizeSampler = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``n_grid`` is the number of monitoring steps, so the recorded grid has
    ``n_grid + 1`` points including ``t = 0``.
    """

    n_paths: int = 10_000
    T: float = 10.0
    n_grid: int = 2500
    seed: int = 0
    c0: float = 20.0
    G: float = 100.0
    workers: int = 1

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ConfigError(f"n_paths must be a positive integer, got {self.n_paths}")
        if int(self.n_grid) != self.n_grid or self.n_grid < 1:
            raise ConfigError(f"n_grid must be a positive integer, got {self.n_grid}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise ConfigError(f"horizon T must be positive, got {self.T}")
        if not (math.isfinite(self.c0) and self.c0 > 0):
            raise ConfigError(f"initial cushion c0 must be positive, got {self.c0}")
        if not (math.isfinite(self.G) and self.G >= 0):
            raise ConfigError(f"guarantee G must be non-negative, got {self.G}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be at least 1, got {self.workers}")

    @classmethod
    def from_wealth(cls, v0: float, protection: float, r: float, **kw) -> "SimConfig":
        """Build from initial wealth and a protection level ``G = protection * v0``."""
        if not 0.0 < protection <= 1.0:
            raise ConfigError(f"protection must lie in (0, 1], got {protection}")
        T = kw.get("T", cls.T)
        G = protection * v0
        return cls(c0=v0 - G * math.exp(-r * T), G=G, **kw)

    def v0(self, r: float) -> float:
        return self.c0 + self.G * math.exp(-r * self.T)

    def grid(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_grid + 1)

    def floor(self, r: float) -> np.ndarray:
        return self.G * np.exp(-r * (self.T - self.grid()))


@dataclass
class PathBundle:
    """Simulated paths on the monitoring grid.

    Jump data is stored flat: path ``i`` owns ``jump_times[ptr[i]:ptr[i+1]]``.
    ``lock_time`` is set for classic CPPI runs (NaN where no lock occurred).
    """

    t: np.ndarray
    C: np.ndarray
    V: np.ndarray
    F: np.ndarray
    ptr: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    W: Optional[np.ndarray] = None
    Z: Optional[np.ndarray] = None
    H: Optional[np.ndarray] = None
    lock_time: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return self.C.shape[0]

    @property
    def C_T(self) -> np.ndarray:
        return self.C[:, -1]


@dataclass(frozen=True)
class GapRiskEstimate:
    """``probability`` is P(C_T <= 0); ``breach_probability`` counts any crossing of zero."""

    probability: float
    stderr: float
    n_paths: int
    sigma_gamma: float
    breach_probability: float = 0.0
    truncated_fraction: float = 0.0


@dataclass(frozen=True)
class QuantileBands:
    t: np.ndarray
    levels: tuple
    values: np.ndarray  # (len(levels), len(t))
    floor: np.ndarray


def _brownian(t: np.ndarray, z: np.ndarray) -> np.ndarray:
    W = np.zeros((z.shape[0], len(t)))
    np.cumsum(z * np.sqrt(np.diff(t)), axis=1, out=W[:, 1:])
    return W


def _jump_factors(m, gamma):
    f = 1.0 + m * gamma
    with np.errstate(divide="ignore"):
        return f, np.log(np.abs(f)), f < 0.0


def _run_blocks(fn, cfg: SimConfig):
    jobs = list(blocks(cfg.n_paths))
    if cfg.workers == 1 or len(jobs) == 1:
        return [fn(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _merge(parts: list[dict]) -> dict:
    out = {}
    offsets = np.cumsum([0] + [int(p["ptr"][-1]) for p in parts[:-1]])
    out["ptr"] = np.concatenate([parts[0]["ptr"][:1]] + [p["ptr"][1:] + o for p, o in zip(parts, offsets)])
    for key in parts[0]:
        if key == "ptr":
            continue
        if parts[0][key] is None:
            out[key] = None
        else:
            out[key] = np.concatenate([p[key] for p in parts])
    return out


def _simulate(
    mkt: MarketParams,
    spec: JumpSpec,
    m: float,
    cfg: SimConfig,
    *,
    kernel: Optional[GirsanovKernel] = None,
    sizes: Optional[SizeSampler] = None,
    classic: bool = False,
    keep_W: bool = False,
    backend: Optional[str] = None,
) -> PathBundle:
    t = cfg.grid()
    r, sigma = mkt.r, mkt.sigma
    a = r + m * mkt.excess_return - 0.5 * m * m * sigma * sigma
    b = m * sigma
    sampler = sizes or (lambda u: sample_jump_size(spec, u))
    if kernel is not None:
        kappa = kernel.jump_compensator(spec) if spec.lam > 0 else 0.0
        a_z = -0.5 * kernel.theta_D**2 + kappa

    def one_block(block, start, stop):
        d = draw_block(cfg.seed, block, stop - start, spec.lam, cfg.T, cfg.n_grid, bridge=classic)
        W = _brownian(t, d.grid_z)
        gamma = np.asarray(sampler(d.size_u), dtype=float).reshape(d.size_u.shape)
        f, log_abs, neg = _jump_factors(m, gamma)
        C = kernels.levy_exp_grid(t, W, d.ptr, d.jump_times, log_abs, neg, a, b, cfg.c0, backend=backend)
        part = {"C": C, "ptr": d.ptr, "jump_times": d.jump_times, "jump_sizes": gamma,
                "W": W if keep_W else None, "Z": None, "lock_time": None}
        if kernel is not None:
            part["Z"] = kernels.levy_exp_grid(
                t, W, d.ptr, d.jump_times, kernel.log_theta_J(gamma), np.zeros(len(gamma), bool),
                a_z, kernel.theta_D, 1.0, backend=backend,
            )
        if classic:
            part["V"], part["lock_time"] = _cash_lock(mkt, cfg, t, W, d, f, log_abs, a, b, C, backend)
        return part

    merged = _merge(_run_blocks(one_block, cfg))
    F = cfg.G * np.exp(-r * (cfg.T - t))
    C = merged["C"]
    if classic:
        V = merged["V"]
        C = V - F
    else:
        V = C + F
    Z = merged["Z"]
    return PathBundle(
        t=t, C=C, V=V, F=F, ptr=merged["ptr"], jump_times=merged["jump_times"],
        jump_sizes=merged["jump_sizes"], W=merged["W"], Z=Z,
        H=None if Z is None else Z * np.exp(-r * t), lock_time=merged["lock_time"],
    )


def _cash_lock(mkt, cfg, t, W, d, f, log_abs, a, b, C, backend):
    """Portfolio values after switching to the money market at the first breach."""
    r = mkt.r
    F = cfg.G * np.exp(-r * (cfg.T - t))
    V = C + F
    lock_time = np.full(d.n_paths, np.nan)
    first = kernels.first_breach(d.ptr, f, backend=backend)
    hit = np.flatnonzero(first >= 0)
    if len(hit) == 0:
        return V, lock_time
    W_tau = kernels.bridge_at_jumps(t, W, d.ptr, d.jump_times, d.bridge_z, backend=backend)
    j = first[hit]
    tau = d.jump_times[j]
    cs = np.concatenate(([0.0], np.cumsum(log_abs)))
    before = cs[j] - cs[d.ptr[hit]]
    c_minus = cfg.c0 * np.exp(a * tau + b * W_tau[j] + before)
    v_tau = c_minus * f[j] + cfg.G * np.exp(-r * (cfg.T - tau))
    after = t[None, :] >= tau[:, None]
    locked = v_tau[:, None] * np.exp(r * (t[None, :] - tau[:, None]))
    V[hit] = np.where(after, locked, V[hit])
    lock_time[hit] = tau
    return V, lock_time


def simulate_cushion_paths(
    mkt: MarketParams,
    spec: JumpSpec,
    m: float,
    cfg: SimConfig,
    *,
    allow_gap: bool = False,
    sizes: Optional[SizeSampler] = None,
    keep_W: bool = False,
    backend: Optional[str] = None,
) -> PathBundle:
    """Cushion paths under the constant multiplier ``m``.

    Unless ``allow_gap`` is set, ``m`` must keep every jump factor positive.
    In gap mode the exposure stays proportional to a negative cushion.
    """
    if not allow_gap:
        check_multiplier(spec, m)
    bundle = _simulate(mkt, spec, m, cfg, sizes=sizes, keep_W=keep_W, backend=backend)
    if not allow_gap and sizes is not None and np.any(1.0 + m * bundle.jump_sizes <= 0.0):
        raise AdmissibilityError("custom jump sizes push the cushion through zero; pass allow_gap=True")
    return bundle


def simulate_cppi_classic(
    mkt: MarketParams,
    spec: JumpSpec,
    m: float,
    cfg: SimConfig,
    *,
    sizes: Optional[SizeSampler] = None,
    backend: Optional[str] = None,
) -> PathBundle:
    """Classic CPPI with exposure ``m * max(C, 0)``: after the first floor breach
    the whole portfolio sits in the money market until maturity."""
    return _simulate(mkt, spec, m, cfg, sizes=sizes, classic=True, backend=backend)


def perturbed_sizes(spec_base: ConstantJump, sigma_gamma: float, law: str = "additive") -> SizeSampler:
    """Jump sizes ``gamma_tilde + sigma_gamma * eps`` (or multiplicative in ``1 + gamma`` for ``law='log'``)."""
    g = spec_base.gamma_tilde
    if law == "additive":
        return lambda u: np.maximum(g + sigma_gamma * special.ndtri(u), GAMMA_FLOOR)
    if law == "log":
        return lambda u: np.expm1(math.log1p(g) + sigma_gamma * special.ndtri(u))
    raise ValueError(f"unknown perturbation law {law!r}")


def gap_probability(
    mkt: MarketParams,
    spec_base: ConstantJump,
    m: float,
    cfg: SimConfig,
    sigma_gamma: float,
    *,
    law: str = "additive",
) -> GapRiskEstimate:
    """Probability that the terminal cushion is non-positive when jump sizes are perturbed.

    Only the jump factors matter: the diffusion part never changes sign, so
    ``C_T <= 0`` exactly when an odd number of factors is negative (or one is
    zero).
    """
    if sigma_gamma < 0:
        raise ConfigError(f"sigma_gamma must be non-negative, got {sigma_gamma}")
    sampler = perturbed_sizes(spec_base, sigma_gamma, law)
    g = spec_base.gamma_tilde

    def one_block(block, start, stop):
        n = stop - start
        d = draw_block(cfg.seed, block, n, spec_base.lam, cfg.T, 1)
        gamma = sampler(d.size_u)
        f = 1.0 + m * gamma
        owner = np.repeat(np.arange(n), np.diff(d.ptr))
        n_neg = np.bincount(owner, weights=(f < 0.0), minlength=n)
        n_zero = np.bincount(owner, weights=(f == 0.0), minlength=n)
        gap = (n_neg % 2 == 1) | (n_zero > 0)
        breach = (n_neg + n_zero) > 0
        truncated = int(np.count_nonzero(g + sigma_gamma * special.ndtri(d.size_u) < GAMMA_FLOOR)) if law == "additive" else 0
        return int(gap.sum()), int(breach.sum()), truncated, len(gamma)

    parts = _run_blocks(one_block, cfg)
    n = cfg.n_paths
    gaps = sum(p[0] for p in parts)
    breaches = sum(p[1] for p in parts)
    n_jumps = sum(p[3] for p in parts)
    p_hat = gaps / n
    return GapRiskEstimate(
        probability=p_hat,
        stderr=math.sqrt(p_hat * (1.0 - p_hat) / n),
        n_paths=n,
        sigma_gamma=sigma_gamma,
        breach_probability=breaches / n,
        truncated_fraction=sum(p[2] for p in parts) / n_jumps if n_jumps else 0.0,
    )


def quantile_bands(bundle: PathBundle, levels: Sequence[float] = (0.0, 0.5, 0.99)) -> QuantileBands:
    """Per-time empirical quantiles of the portfolio value; level 0 is the path-wise minimum."""
    levels = tuple(float(q) for q in levels)
    if any(not 0.0 <= q <= 1.0 for q in levels):
        raise ValueError("quantile levels must lie in [0, 1]")
    values = np.quantile(bundle.V, levels, axis=0)
    return QuantileBands(t=bundle.t, levels=levels, values=np.atleast_2d(values), floor=bundle.F)


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    if n < 2:
        return float(x.mean()), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(n))


def expected_utility(bundle_or_CT, params: UtilityParams, use_envelope: bool = False, env=None) -> tuple[float, float]:
    """Sample mean and standard error of the (concavified) utility of the terminal cushion."""
    C_T = bundle_or_CT.C_T if isinstance(bundle_or_CT, PathBundle) else np.asarray(bundle_or_CT, dtype=float)
    if np.any(C_T < -params.G):
        raise AdmissibilityError(f"{int(np.sum(C_T < -params.G))} terminal cushions below -G")
    if use_envelope:
        u = envelope_eval(C_T, env or solve_c_hat(params), params)
    else:
        u = utility_eval(C_T, params)
    mean, se = _mean_stderr(np.atleast_1d(u))
    if np.all(C_T == C_T[0]):
        se = 0.0
    return mean, se


def state_price_paths(
    kernel: GirsanovKernel,
    mkt: MarketParams,
    spec: JumpSpec,
    cfg: SimConfig,
    *,
    m: Optional[float] = None,
    backend: Optional[str] = None,
) -> PathBundle:
    """Density ``Z`` and state prices ``H = Z exp(-r t)`` on the same draws as the cushion.

    The cushion is simulated with multiplier ``m`` (default: the kernel's own).
    """
    m = kernel.m if m is None else m
    return _simulate(mkt, spec, m, cfg, kernel=kernel, backend=backend)


def dual_decay_rate(kernel: GirsanovKernel, mkt: MarketParams, spec: JumpSpec) -> float:
    """Rate ``rho`` with ``D(t) / D(0) = exp(-rho t)`` for a constant kernel."""
    d1 = kernel.delta1
    q = (1.0 - d1) / d1
    rate = q * mkt.r + 0.5 * (1.0 - d1) / d1**2 * kernel.theta_D**2
    if spec.lam > 0:
        m = kernel.m

        def h(g):
            tj = (1.0 + g * m) ** (-d1)
            return -q * (1.0 - tj) + tj ** (-q) - 1.0

        rate += levy_integral(spec, h)
    return rate


def duality_identity_check(
    kernel: GirsanovKernel,
    mkt: MarketParams,
    spec: JumpSpec,
    m_hat: float,
    cfg: SimConfig,
    *,
    bundle: Optional[PathBundle] = None,
) -> float:
    """Largest relative gap between ``C_t`` and ``c0 H_t^(-1/delta1) D(t)/D(0)`` over paths and grid."""
    if bundle is None or bundle.H is None:
        bundle = state_price_paths(kernel, mkt, spec, cfg, m=m_hat)
    rho = dual_decay_rate(kernel, mkt, spec)
    d1 = kernel.delta1
    rhs = cfg.c0 * bundle.H ** (-1.0 / d1) * np.exp(-rho * bundle.t)[None, :]
    return float(np.max(np.abs(bundle.C - rhs) / np.abs(bundle.C)))


def terminal_utility_scan(
    mkt: MarketParams,
    spec: JumpSpec,
    params: UtilityParams,
    multipliers: Sequence[float],
    cfg: SimConfig,
    *,
    use_envelope: bool = False,
) -> np.ndarray:
    """Expected utility of ``C_T`` for each multiplier, all on common random numbers.

    Returns an array of shape ``(len(multipliers), 2)`` holding estimate and
    standard error.
    """
    ms = np.asarray(multipliers, dtype=float)
    for m in ms:
        check_multiplier(spec, m)
    env = solve_c_hat(params) if use_envelope else None
    T, r, sigma = cfg.T, mkt.r, mkt.sigma

    def one_block(block, start, stop):
        n = stop - start
        d = draw_block(cfg.seed, block, n, spec.lam, T, 1)
        W_T = d.grid_z[:, 0] * math.sqrt(T)
        gamma = sample_jump_size(spec, d.size_u)
        owner = np.repeat(np.arange(n), np.diff(d.ptr))
        out = np.empty((len(ms), n))
        for i, m in enumerate(ms):
            a = r + m * mkt.excess_return - 0.5 * m * m * sigma * sigma
            s = np.bincount(owner, weights=np.log1p(m * gamma), minlength=n)
            C_T = cfg.c0 * np.exp(a * T + m * sigma * W_T + s)
            out[i] = envelope_eval(C_T, env, params) if use_envelope else utility_eval(C_T, params)
        return out

    u = np.concatenate(_run_blocks(one_block, cfg), axis=1)
    se = u.std(axis=1, ddof=1) / math.sqrt(u.shape[1]) if u.shape[1] > 1 else np.zeros(len(ms))
    return np.column_stack([u.mean(axis=1), se])


def multiplier_grid(spec: JumpSpec, m_hat: float, n: int = 41, half_width: float = 5.0) -> np.ndarray:
    """Evenly spaced multipliers covering the admissible interval around ``m_hat``.

    Bounded intervals are covered whole. For the half-line of the constant
    law the grid is ``m_hat +- half_width`` clipped inside the interval.
    """
    lo, hi = admissible_interval(spec)
    if math.isfinite(lo) and math.isfinite(hi):
        return np.linspace(lo, hi, n)
    left = max(m_hat - half_width, lo)
    right = m_hat + half_width
    if math.isfinite(hi):
        right = min(right, hi - 1e-6 * max(1.0, abs(hi)))
    return np.linspace(left, right, n)


def value_function_mc(
    mkt: MarketParams,
    spec: JumpSpec,
    params: UtilityParams,
    t: float,
    c: float,
    cfg: SimConfig,
    *,
    m: Optional[float] = None,
) -> tuple[float, float]:
    """``E[U_con(C_T) | C_t = c]`` under the optimal multiplier, with its standard error."""
    env = solve_c_hat(params)
    if not 0.0 <= t <= cfg.T:
        raise ConfigError(f"t must lie in [0, T], got {t}")
    if t == cfg.T:
        return float(envelope_eval(c, env, params)), 0.0
    if m is None:
        m = solve_multiplier(mkt, spec, params.delta1).m_hat
    sub = replace(cfg, T=cfg.T - t, c0=c, n_grid=1)
    res = terminal_utility_scan(mkt, spec, params, [m], sub, use_envelope=True)
    return float(res[0, 0]), float(res[0, 1])


__all__ = [
    "BLOCK_SIZE",
    "GapRiskEstimate",
    "PathBundle",
    "QuantileBands",
    "SimConfig",
    "dual_decay_rate",
    "duality_identity_check",
    "expected_utility",
    "gap_probability",
    "kernel_from_multiplier",
    "multiplier_grid",
    "perturbed_sizes",
    "quantile_bands",
    "simulate_cppi_classic",
    "simulate_cushion_paths",
    "state_price_paths",
    "terminal_utility_scan",
    "value_function_mc",
]
