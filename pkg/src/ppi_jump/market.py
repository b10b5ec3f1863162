"""Market parameters, jump-size laws and the Levy-measure integrals built on them.

Jump sizes are relative price changes ``gamma`` with ``gamma > -1``. For the
Kou and Merton laws the jump is parameterised through its log factor ``Y``,
``gamma = exp(Y) - 1``, so every integral against the Levy measure is written
as ``lam * E[h(exp(Y) - 1)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate, special

from .errors import DomainError, QuadratureError

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 200

# Merton log-jump integration window, in standard deviations.
MERTON_NSIGMA = 10.0


@dataclass(frozen=True)
class MarketParams:
    """Money market rate and risky-asset drift/volatility (all per annum)."""

    mu: float
    sigma: float
    r: float = 0.035

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if not self.r >= 0:
            raise DomainError(f"r must be non-negative, got {self.r}")
        if not math.isfinite(self.mu):
            raise DomainError("mu must be finite")

    @classmethod
    def from_excess(cls, excess: float, sigma: float, r: float = 0.035) -> "MarketParams":
        return cls(mu=excess + r, sigma=sigma, r=r)

    @property
    def excess_return(self) -> float:
        return self.mu - self.r


@dataclass(frozen=True)
class ConstantJump:
    """Every jump moves the price by the same relative amount ``gamma_tilde``.

    ``lam = 0`` is accepted and means a pure diffusion market.
    """

    gamma_tilde: float
    lam: float

    def __post_init__(self):
        if not -1.0 < self.gamma_tilde < 0.0:
            raise DomainError(f"gamma_tilde must lie in (-1, 0), got {self.gamma_tilde}")
        if not self.lam >= 0:
            raise DomainError(f"lam must be non-negative, got {self.lam}")


@dataclass(frozen=True)
class KouJump:
    """Asymmetric double-exponential log jumps."""

    lam: float
    p: float
    eta_plus: float
    eta_minus: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise DomainError(f"lam must be non-negative, got {self.lam}")
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if not self.eta_plus > 1.0:
            raise DomainError(f"eta_plus must exceed 1, got {self.eta_plus}")
        if not self.eta_minus > 0.0:
            raise DomainError(f"eta_minus must be positive, got {self.eta_minus}")


@dataclass(frozen=True)
class MertonJump:
    """Gaussian log jumps with mean ``mu_j`` and standard deviation ``sigma_j``."""

    lam: float
    mu_j: float
    sigma_j: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise DomainError(f"lam must be non-negative, got {self.lam}")
        if not self.sigma_j > 0:
            raise DomainError(f"sigma_j must be positive, got {self.sigma_j}")


JumpSpec = Union[ConstantJump, KouJump, MertonJump]


@dataclass(frozen=True)
class JumpBounds:
    phi1: float
    phi2: float

    def __post_init__(self):
        if self.phi1 > self.phi2 or self.phi1 < -1.0:
            raise DomainError(f"invalid jump bounds ({self.phi1}, {self.phi2})")


def jump_bounds(spec: JumpSpec) -> JumpBounds:
    """Infimum and supremum of the jump sizes charged by the Levy measure."""
    if isinstance(spec, ConstantJump):
        return JumpBounds(spec.gamma_tilde, spec.gamma_tilde)
    return JumpBounds(-1.0, math.inf)


def admissible_interval(spec: JumpSpec) -> tuple[float, float]:
    """Multipliers ``m`` for which ``1 + m * gamma > 0`` on the jump support.

    Kou and Merton return the closed interval ``[0, 1]``; the constant law
    returns the open half line ``(-inf, -1/gamma_tilde)``. With no jumps the
    whole real line is admissible.
    """
    if spec.lam == 0:
        return -math.inf, math.inf
    if isinstance(spec, ConstantJump):
        # phi2 is treated as 0 for a purely negative constant jump
        return -math.inf, -1.0 / spec.gamma_tilde
    return 0.0, 1.0


def check_multiplier(spec: JumpSpec, m: float) -> None:
    lo, hi = admissible_interval(spec)
    if isinstance(spec, ConstantJump):
        ok = spec.lam == 0 or 1.0 + spec.gamma_tilde * m > 0.0
    else:
        ok = lo <= m <= hi
    if not (ok and math.isfinite(m)):
        raise DomainError(f"multiplier {m} outside the admissible interval ({lo}, {hi})")


def _quad(fn, a, b, epsabs, epsrel):
    val, err, info = integrate.quad(
        fn, a, b, epsabs=epsabs, epsrel=epsrel, limit=QUAD_LIMIT, full_output=1
    )[:3]
    if not math.isfinite(val) or err > 10.0 * max(epsabs, epsrel * abs(val)):
        raise QuadratureError(f"quadrature did not converge: value={val}, error={err}")
    return val


def levy_integral(
    spec: JumpSpec,
    h: Callable[[float], float],
    *,
    h_log: Optional[Callable[[float], float]] = None,
    epsabs: float = QUAD_EPSABS,
    epsrel: float = QUAD_EPSREL,
) -> float:
    """Integral of ``h(gamma)`` against the Levy measure ``nu(dy) = lam f(y) dy``.

    ``h`` is called with scalar jump sizes. The Kou branches are mapped to
    ``u = eta * |y|`` so both pieces become integrals against ``exp(-u)`` on
    ``[0, inf)``; the Merton law is integrated in standardised units over
    ``mu_j +/- 10 sigma_j``. When ``h_log`` is given it is used for the
    log-jump laws and receives the log jump ``y`` instead of ``gamma``, which
    avoids the rounding of ``1 + gamma`` to zero far in the lower tail.
    """
    if spec.lam == 0:
        return 0.0
    if isinstance(spec, ConstantJump):
        return spec.lam * h(spec.gamma_tilde)

    if h_log is None:
        h_log = lambda y: h(math.expm1(y))  # noqa: E731

    if isinstance(spec, KouJump):
        ep, em = spec.eta_plus, spec.eta_minus

        def up(u):
            w = math.exp(-u)
            if w == 0.0:
                return 0.0
            return h_log(u / ep) * w

        def down(u):
            w = math.exp(-u)
            if w == 0.0:
                return 0.0
            return h_log(-u / em) * w

        total = spec.p * _quad(up, 0.0, math.inf, epsabs, epsrel)
        total += (1.0 - spec.p) * _quad(down, 0.0, math.inf, epsabs, epsrel)
        return spec.lam * total

    if isinstance(spec, MertonJump):
        mj, sj = spec.mu_j, spec.sigma_j
        c = 1.0 / math.sqrt(2.0 * math.pi)

        def dens(z):
            return h_log(mj + sj * z) * c * math.exp(-0.5 * z * z)

        # split at the mode so each piece is monotone in its Gaussian weight
        total = _quad(dens, -MERTON_NSIGMA, 0.0, epsabs, epsrel)
        total += _quad(dens, 0.0, MERTON_NSIGMA, epsabs, epsrel)
        return spec.lam * total

    raise TypeError(f"unknown jump spec {spec!r}")


def log_jump_factor(m: float, y: float) -> float:
    """``log(1 + m (e^y - 1))``, accurate for ``0 <= m <= 1`` even when ``e^y`` underflows."""
    if m == 0.0:
        return 0.0
    if m == 1.0:
        return y
    if 0.0 < m < 1.0:
        a, b = math.log1p(-m), math.log(m) + y
        hi, lo = (a, b) if a > b else (b, a)
        return hi + math.log1p(math.exp(lo - hi))
    return math.log1p(m * math.expm1(y))


def levy_drift_integral(spec: JumpSpec, m: float, delta1: float, **quad_kw) -> float:
    """``int gamma (1 + gamma m)^(-delta1) nu(dy)``, the jump part of the optimality condition."""
    check_multiplier(spec, m)
    if isinstance(spec, ConstantJump):
        if spec.lam == 0:
            return 0.0
        g = spec.gamma_tilde
        return spec.lam * g * (1.0 + g * m) ** (-delta1)
    return levy_integral(
        spec,
        lambda g: g * (1.0 + g * m) ** (-delta1),
        h_log=lambda y: math.expm1(y) * math.exp(-delta1 * log_jump_factor(m, y)),
        **quad_kw,
    )


def levy_drift_derivative(spec: JumpSpec, m: float, delta1: float, **quad_kw) -> float:
    """Derivative in ``m`` of :func:`levy_drift_integral`."""
    check_multiplier(spec, m)
    return levy_integral(
        spec,
        lambda g: -delta1 * g * g * (1.0 + g * m) ** (-delta1 - 1.0),
        h_log=lambda y: -delta1 * math.expm1(y) ** 2 * math.exp((-delta1 - 1.0) * log_jump_factor(m, y)),
        **quad_kw,
    )


def jump_mean(spec: JumpSpec) -> float:
    """``int gamma nu(dy) = lam * E[gamma]`` in closed form."""
    if isinstance(spec, ConstantJump):
        return spec.lam * spec.gamma_tilde
    if isinstance(spec, KouJump):
        p, ep, em = spec.p, spec.eta_plus, spec.eta_minus
        if ep <= 1.0:
            raise DomainError("E[exp(Y)] is infinite for eta_plus <= 1")
        return spec.lam * (p * ep / (ep - 1.0) + (1.0 - p) * em / (em + 1.0) - 1.0)
    if isinstance(spec, MertonJump):
        return spec.lam * math.expm1(spec.mu_j + 0.5 * spec.sigma_j**2)
    raise TypeError(f"unknown jump spec {spec!r}")


def sample_jump_size(spec: JumpSpec, u):
    """Map uniforms in (0, 1) to jump sizes ``gamma``.

    Kou uses the inverse CDF of the log jump, decreasing in ``u``: ``u <= p``
    gives an upward jump (``u == p`` maps to ``Y = 0``) and ``u > p`` a
    downward one. Merton uses ``Y = mu_j + sigma_j * Phi^{-1}(u)``.
    """
    u = np.asarray(u, dtype=float)
    if isinstance(spec, ConstantJump):
        out = np.full(u.shape, spec.gamma_tilde)
    elif isinstance(spec, KouJump):
        p = spec.p
        up = u <= p
        y = np.empty(u.shape)
        with np.errstate(divide="ignore"):
            y[up] = -np.log(u[up] / p) / spec.eta_plus
            y[~up] = np.log1p(-(u[~up] - p) / (1.0 - p)) / spec.eta_minus
        out = np.expm1(y)
    elif isinstance(spec, MertonJump):
        out = np.expm1(spec.mu_j + spec.sigma_j * special.ndtri(u))
    else:
        raise TypeError(f"unknown jump spec {spec!r}")
    return out[()] if out.ndim == 0 else out
