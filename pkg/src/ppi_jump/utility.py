"""S-shaped utility of the terminal cushion and its concave envelope."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

TANGENCY_TOL = 1e-12
MAX_ITER = 200


@dataclass(frozen=True)
class UtilityParams:
    """Gain exponent ``delta1``, loss exponent ``delta2``, loss aversion and guarantee ``G``."""

    delta1: float
    delta2: float = 0.5
    lambda_tilde: float = 2.25
    G: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.delta1 < 1.0:
            raise DomainError(f"delta1 must lie in (0, 1), got {self.delta1}")
        if not 0.0 < self.delta2 < 1.0:
            raise DomainError(f"delta2 must lie in (0, 1), got {self.delta2}")
        bound = (1.0 - self.delta2) / (1.0 - self.delta1)
        if not self.lambda_tilde > bound:
            raise DomainError(f"lambda_tilde must exceed {bound:.6g}, got {self.lambda_tilde}")
        if not self.G >= 0:
            raise DomainError(f"G must be non-negative, got {self.G}")


@dataclass(frozen=True)
class ConcaveEnvelope:
    """Tangency point and the linear piece of the concave envelope.

    The line is stored as its slope and left anchor ``(-G, U(-G))``.
    """

    c_hat: float
    k: float
    x_left: float
    u_left: float

    @property
    def intercept(self) -> float:
        """Value of the linear piece at ``x = 0``."""
        return self.u_left - self.k * self.x_left


def utility_eval(x, params: UtilityParams):
    """S-shaped utility on ``[-G, inf)`` with reference point zero."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -params.G):
        raise DomainError(f"cushion below -G = {-params.G}")
    d1, d2 = params.delta1, params.delta2
    with np.errstate(invalid="ignore"):
        gain = np.maximum(xa, 0.0) ** (1.0 - d1) / (1.0 - d1)
        loss = -params.lambda_tilde * np.maximum(-xa, 0.0) ** (1.0 - d2) / (1.0 - d2)
    out = np.where(xa >= 0.0, gain, loss)
    return out[()] if out.ndim == 0 else out


def tangency_function(x: float, params: UtilityParams) -> float:
    """Zero of this function on ``(0, inf)`` is the tangency point ``c_hat``."""
    d1, d2, G = params.delta1, params.delta2, params.G
    return (
        d1 / (1.0 - d1) * x ** (1.0 - d1)
        - G / x**d1
        + params.lambda_tilde * G ** (1.0 - d2) / (1.0 - d2)
    )


def _tangency_derivative(x: float, params: UtilityParams) -> float:
    d1, G = params.delta1, params.G
    return d1 * x ** (-d1) + d1 * G * x ** (-d1 - 1.0)


def solve_c_hat(params: UtilityParams, *, tol: float = TANGENCY_TOL, max_iter: int = MAX_ITER) -> ConcaveEnvelope:
    """Locate the tangency point by doubling/halving from ``G``, then bisection with Newton steps."""
    if not params.G > 0:
        raise DomainError("the tangency point is defined for G > 0 only")
    f = lambda x: tangency_function(x, params)  # noqa: E731

    lo = hi = params.G
    f_lo = f_hi = f(lo)
    n = 0
    while f_lo > 0.0:
        hi, f_hi = lo, f_lo
        lo *= 0.5
        f_lo = f(lo)
        n += 1
        if n > 2000:
            raise ConvergenceError("could not bracket c_hat from below")
    while f_hi < 0.0:
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = f(hi)
        n += 1
        if n > 2000:
            raise ConvergenceError("could not bracket c_hat from above")

    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = f(x)
        if abs(fx) < tol:
            break
        if fx < 0.0:
            lo = x
        else:
            hi = x
        step = x - fx / _tangency_derivative(x, params)
        x = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4.0 * math.ulp(x):
            break
    fx = f(x)
    if abs(fx) >= tol:
        raise ConvergenceError(f"tangency residual {fx:.3e} above tolerance {tol:.1e}")

    u_left = float(utility_eval(-params.G, params))
    return ConcaveEnvelope(c_hat=x, k=x ** (-params.delta1), x_left=-params.G, u_left=u_left)


def envelope_eval(x, env: ConcaveEnvelope, params: UtilityParams):
    """Concave envelope: the tangent line on ``[-G, c_hat)``, the utility beyond."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -params.G):
        raise DomainError(f"cushion below -G = {-params.G}")
    line = env.u_left + env.k * (xa - env.x_left)
    upper = utility_eval(np.maximum(xa, env.c_hat), params)
    out = np.where(xa >= env.c_hat, upper, line)
    return out[()] if out.ndim == 0 else out
