"""Optimal constant multiplier under jump-diffusion dynamics.

The multiplier solves ``g(m) = 0`` with

    g(m) = mu - r - delta1 sigma^2 m + int gamma (1 + gamma m)^(-delta1) nu(dy),

which is strictly decreasing on the admissible interval. The worst-case
Girsanov kernel follows from the multiplier as ``theta_D = -delta1 sigma m``
and ``theta_J(gamma) = (1 + gamma m)^(-delta1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError, DomainError, NoSolutionError
from .market import (
    ConstantJump,
    JumpSpec,
    KouJump,
    MarketParams,
    MertonJump,
    admissible_interval,
    jump_bounds,
    levy_drift_derivative,
    levy_drift_integral,
    levy_integral,
)

ROOT_TOL = 1e-10
MAX_ITER = 200
EXPANSION_CAP = 1e6


@dataclass(frozen=True)
class GirsanovKernel:
    """Constant market prices of risk; the jump part is ``(1 + gamma m)^(-delta1)``."""

    theta_D: float
    m: float
    delta1: float

    def theta_J(self, gamma):
        base = 1.0 + np.asarray(gamma, dtype=float) * self.m
        if np.any(base <= 0.0):
            raise DomainError("jump kernel undefined where 1 + gamma m <= 0")
        out = base ** (-self.delta1)
        return out[()] if out.ndim == 0 else out

    def log_theta_J(self, gamma):
        base = 1.0 + np.asarray(gamma, dtype=float) * self.m
        if np.any(base <= 0.0):
            raise DomainError("jump kernel undefined where 1 + gamma m <= 0")
        out = -self.delta1 * np.log(base)
        return out[()] if out.ndim == 0 else out

    def jump_compensator(self, spec: JumpSpec) -> float:
        """``int (1 - theta_J) nu(dy)``, the drift correction in the density."""
        m, d1 = self.m, self.delta1
        return levy_integral(spec, lambda g: 1.0 - (1.0 + g * m) ** (-d1))


@dataclass
class ExistenceReport:
    """Evaluation of the two sign conditions that guarantee a unique root.

    ``gate1`` is ``g`` at the ``-1/phi2`` end of the interval (must be >= 0),
    ``gate2`` is ``g`` at the ``-1/phi1`` end (must be <= 0). Infinite
    endpoints are reported through their limits.
    """

    case: str
    bracket: tuple[float, float]
    gate1: float
    gate2: float
    gate1_quadrature: Optional[float] = None
    gate2_quadrature: Optional[float] = None
    printed_gate1: Optional[float] = None
    printed_gate2: Optional[float] = None
    notes: list[str] = field(default_factory=list)

    @property
    def gate1_pass(self) -> bool:
        return self.gate1 >= 0.0

    @property
    def gate2_pass(self) -> bool:
        return self.gate2 <= 0.0

    @property
    def passed(self) -> bool:
        return self.gate1_pass and self.gate2_pass


@dataclass
class MultiplierSolution:
    m_hat: float
    kernel: GirsanovKernel
    bracket: tuple[float, float]
    g_residual: float
    existence_report: ExistenceReport
    iterations: int = 0


def g_eval(mkt: MarketParams, spec: JumpSpec, delta1: float, m: float) -> float:
    """Left-hand side of the first-order condition for the multiplier."""
    return mkt.excess_return - delta1 * mkt.sigma**2 * m + levy_drift_integral(spec, m, delta1)


def g_prime(mkt: MarketParams, spec: JumpSpec, delta1: float, m: float) -> float:
    return -delta1 * mkt.sigma**2 + levy_drift_derivative(spec, m, delta1)


def kou_gates(mkt: MarketParams, spec: KouJump, delta1: float) -> tuple[float, float]:
    """Closed forms of ``g(0)`` and ``g(1)`` for double-exponential log jumps."""
    lam, p, ep, em = spec.lam, spec.p, spec.eta_plus, spec.eta_minus
    g0 = mkt.excess_return - p * lam / (1.0 - ep) - (1.0 - p) * lam / (1.0 + em)
    if em <= delta1:
        # the downward branch of g(1) diverges to -inf
        return g0, -math.inf
    g1 = (
        mkt.excess_return
        - delta1 * mkt.sigma**2
        - lam * p * ep / ((1.0 - delta1 - ep) * (delta1 + ep))
        + lam * (1.0 - p) * em / ((1.0 - delta1 + em) * (delta1 - em))
    )
    return g0, g1


def merton_gates(mkt: MarketParams, spec: MertonJump, delta1: float, drift: float) -> tuple[float, float]:
    """Closed forms of ``g(0)`` and ``g(1)`` for Gaussian log jumps, with ``drift`` in place of ``mu - r``."""
    lam, mj, sj = spec.lam, spec.mu_j, spec.sigma_j
    g0 = drift + lam * math.expm1(mj + 0.5 * sj**2)
    g1 = (
        drift
        - mkt.sigma**2 * delta1
        + lam
        * (
            math.exp((1.0 - delta1) * mj + 0.5 * (1.0 - delta1) ** 2 * sj**2)
            - math.exp(-delta1 * mj + 0.5 * delta1**2 * sj**2)
        )
    )
    return g0, g1


def existence_check(mkt: MarketParams, spec: JumpSpec, delta1: float) -> ExistenceReport:
    lo, hi = admissible_interval(spec)
    if spec.lam == 0:
        return ExistenceReport(
            case="diffusion-only", bracket=(lo, hi), gate1=math.inf, gate2=-math.inf,
            notes=["no jumps: g is linear with negative slope"],
        )

    bounds = jump_bounds(spec)
    if isinstance(spec, ConstantJump):
        # g -> +inf as m -> -inf and g -> -inf as m -> -1/gamma_tilde
        return ExistenceReport(
            case="i", bracket=(lo, hi), gate1=math.inf, gate2=-math.inf,
            notes=[f"phi1 = {bounds.phi1}, phi2 treated as 0; existence is unconditional"],
        )

    q0 = g_eval(mkt, spec, delta1, 0.0)
    q1 = g_eval(mkt, spec, delta1, 1.0)
    if isinstance(spec, KouJump):
        g0, g1 = kou_gates(mkt, spec, delta1)
        return ExistenceReport(
            case="iii", bracket=(lo, hi), gate1=g0, gate2=g1,
            gate1_quadrature=q0, gate2_quadrature=q1,
            notes=["phi1 = -1, phi2 = +inf; search interval [0, 1]"],
        )
    g0, g1 = merton_gates(mkt, spec, delta1, mkt.excess_return)
    p0, p1 = merton_gates(mkt, spec, delta1, mkt.mu)
    return ExistenceReport(
        case="iii", bracket=(lo, hi), gate1=g0, gate2=g1,
        gate1_quadrature=q0, gate2_quadrature=q1,
        printed_gate1=p0, printed_gate2=p1,
        notes=[
            "phi1 = -1, phi2 = +inf; search interval [0, 1]",
            "printed_gate* use mu in place of mu - r",
        ],
    )


def _initial_bracket(g, lo: float, hi: float) -> tuple[float, float, float, float, int]:
    """Finite sign-change bracket inside the admissible interval ``(lo, hi)``."""
    n = 0
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi, g(lo), g(hi), n
    g0 = g(0.0)
    if g0 == 0.0:
        return 0.0, 0.0, g0, g0, n
    if g0 < 0.0:
        # root lies to the left of 0
        if math.isfinite(lo):
            return lo, 0.0, g(lo), g0, n
        step, right, g_right = 1.0, 0.0, g0
        while True:
            left = -step
            g_left = g(left)
            n += 1
            if g_left >= 0.0:
                return left, right, g_left, g_right, n
            right, g_right = left, g_left
            step *= 2.0
            if step > EXPANSION_CAP:
                raise ConvergenceError("no sign change found before |m| = 1e6")
    # root lies to the right of 0
    left, g_left = 0.0, g0
    if math.isfinite(hi):
        gap = hi
        while True:
            gap *= 0.5
            right = hi - gap
            g_right = g(right)
            n += 1
            if g_right <= 0.0:
                return left, right, g_left, g_right, n
            left, g_left = right, g_right
            if gap < 1e-15 * max(1.0, abs(hi)):
                raise ConvergenceError(
                    f"root lies closer to the endpoint {hi:.17g} than double precision resolves"
                )
    step = 1.0
    while True:
        right = step
        g_right = g(right)
        n += 1
        if g_right <= 0.0:
            return left, right, g_left, g_right, n
        left, g_left = right, g_right
        step *= 2.0
        if step > EXPANSION_CAP:
            raise ConvergenceError("no sign change found before |m| = 1e6")


def solve_multiplier(
    mkt: MarketParams,
    spec: JumpSpec,
    delta1: float,
    *,
    tol: float = ROOT_TOL,
    max_iter: int = MAX_ITER,
) -> MultiplierSolution:
    """Unique root of ``g`` by bisection with safeguarded Newton steps."""
    if not 0.0 < delta1 < 1.0:
        raise DomainError(f"delta1 must lie in (0, 1), got {delta1}")
    report = existence_check(mkt, spec, delta1)
    if not report.passed:
        raise NoSolutionError(
            f"existence gates fail: g at -1/phi2 side = {report.gate1:.6g} (needs >= 0), "
            f"g at -1/phi1 side = {report.gate2:.6g} (needs <= 0)"
        )

    g = lambda m: g_eval(mkt, spec, delta1, m)  # noqa: E731
    lo, hi = report.bracket
    a, b, ga, gb, n = _initial_bracket(g, lo, hi)

    if ga == 0.0 or a == b:
        x, gx = a, ga
    elif gb == 0.0:
        x, gx = b, gb
    else:
        x = 0.5 * (a + b)
        gx = g(x)
        for _ in range(max_iter):
            n += 1
            if abs(gx) < tol:
                break
            # g is decreasing: positive values lie left of the root
            if gx > 0.0:
                a = x
            else:
                b = x
            d = g_prime(mkt, spec, delta1, x)
            step = x - gx / d if d != 0.0 else math.nan
            x = step if a < step < b else 0.5 * (a + b)
            gx = g(x)
            if b - a <= 4.0 * math.ulp(max(abs(a), abs(b))):
                break
        if abs(gx) >= tol:
            raise ConvergenceError(
                f"|g(m)| = {abs(gx):.3e} after {n} iterations; g jumps across adjacent doubles near m = {x:.17g}"
            )

    kernel = kernel_from_multiplier(x, mkt.sigma, delta1)
    return MultiplierSolution(
        m_hat=x, kernel=kernel, bracket=report.bracket, g_residual=abs(gx),
        existence_report=report, iterations=n,
    )


def kernel_from_multiplier(m: float, sigma: float, delta1: float, spec: Optional[JumpSpec] = None) -> GirsanovKernel:
    """Kernel ``theta_D = -delta1 sigma m``; checks jump positivity on ``spec``'s support when given."""
    if spec is not None and spec.lam > 0:
        if isinstance(spec, ConstantJump):
            ok = 1.0 + spec.gamma_tilde * m > 0.0
        else:
            ok = 0.0 <= m <= 1.0
        if not ok:
            raise DomainError(f"theta_J not positive on the jump support for m = {m}")
    return GirsanovKernel(theta_D=-delta1 * sigma * m, m=m, delta1=delta1)


def no_arbitrage_residual(kernel: GirsanovKernel, mkt: MarketParams, spec: JumpSpec) -> float:
    """``mu - r + sigma theta_D + int gamma theta_J(gamma) nu(dy)``; zero for an equivalent martingale measure."""
    m, d1 = kernel.m, kernel.delta1
    if isinstance(spec, ConstantJump):
        jump = spec.lam * spec.gamma_tilde * float(kernel.theta_J(spec.gamma_tilde)) if spec.lam else 0.0
    else:
        jump = levy_integral(spec, lambda g: g * (1.0 + g * m) ** (-d1))
    return mkt.excess_return + mkt.sigma * kernel.theta_D + jump
