import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ppi_jump.errors import DomainError
from ppi_jump.utility import (
    UtilityParams,
    _tangency_derivative,
    envelope_eval,
    solve_c_hat,
    tangency_function,
    utility_eval,
)

CURVED = UtilityParams(delta1=0.3, delta2=0.5, lambda_tilde=2.25, G=100.0)


def bisection_oracle(params, tol=1e-13):
    """Plain bisection on the tangency function, independent of the solver."""
    lo, hi = 1e-300, 1.0
    while tangency_function(hi, params) < 0:
        hi *= 10.0
    # geometric bisection until the bracket is within a factor of two
    while hi > 2.0 * lo:
        mid = math.sqrt(lo * hi)
        if tangency_function(mid, params) < 0:
            lo = mid
        else:
            hi = mid
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if tangency_function(mid, params) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol * hi:
            break
    return 0.5 * (lo + hi)


def test_utility_examples():
    p = CURVED
    assert utility_eval(0.0, p) == 0.0
    assert utility_eval(1.0, p) == pytest.approx(1 / 0.7, rel=1e-15)
    assert utility_eval(-1.0, p) == pytest.approx(-4.5, rel=1e-15)
    with pytest.raises(DomainError):
        utility_eval(-100.5, p)


def test_parameter_validation():
    with pytest.raises(DomainError):
        UtilityParams(delta1=0.0)
    with pytest.raises(DomainError):
        UtilityParams(delta1=0.3, delta2=1.0)
    # loss aversion must exceed (1 - delta2) / (1 - delta1)
    with pytest.raises(DomainError):
        UtilityParams(delta1=0.5, delta2=0.2, lambda_tilde=1.5)
    with pytest.raises(DomainError):
        UtilityParams(delta1=0.3, G=-1)


def test_tangency_point_matches_oracle():
    env = solve_c_hat(CURVED)
    assert abs(tangency_function(env.c_hat, CURVED)) < 1e-12
    assert env.c_hat == pytest.approx(bisection_oracle(CURVED), abs=1e-10)


def test_bracket_property():
    c = solve_c_hat(CURVED).c_hat
    assert tangency_function(c / 2, CURVED) < 0 < tangency_function(2 * c, CURVED)


def test_tangency_conditions():
    p, env = CURVED, solve_c_hat(CURVED)
    # slope is the derivative of the gain branch at c_hat
    assert env.k == pytest.approx(env.c_hat ** -p.delta1, rel=1e-10)
    # the line through (-G, U(-G)) reaches U(c_hat) at c_hat
    chord = (utility_eval(env.c_hat, p) - env.u_left) / (env.c_hat + p.G)
    assert chord == pytest.approx(env.k, rel=1e-10)
    assert env.u_left == pytest.approx(-2.25 * 100**0.5 / 0.5)
    assert env.intercept == pytest.approx(env.u_left + env.k * p.G)


def test_envelope_endpoints():
    p, env = CURVED, solve_c_hat(CURVED)
    assert envelope_eval(-p.G, env, p) == pytest.approx(utility_eval(-p.G, p), abs=1e-10)
    line_at_c = env.u_left + env.k * (env.c_hat + p.G)
    assert line_at_c == pytest.approx(float(utility_eval(env.c_hat, p)), abs=1e-10)
    assert envelope_eval(env.c_hat / 2, env, p) > utility_eval(env.c_hat / 2, p)
    with pytest.raises(DomainError):
        envelope_eval(-p.G - 1, env, p)


def test_dominance_and_concavity_on_dense_grid():
    p, env = CURVED, solve_c_hat(CURVED)
    x = np.linspace(-p.G, 3 * env.c_hat, 10_000)
    u, e = utility_eval(x, p), envelope_eval(x, env, p)
    assert np.all(e >= u - 1e-10)
    assert np.all(np.abs(e[x >= env.c_hat] - u[x >= env.c_hat]) <= 1e-10)
    assert np.all(np.diff(e, 2) <= 1e-12)


def test_f_strictly_increasing():
    xs = np.logspace(-6, 6, 200)
    assert all(_tangency_derivative(x, CURVED) > 0 for x in xs)
    vals = [tangency_function(x, CURVED) for x in xs]
    assert np.all(np.diff(vals) > 0)


def test_small_guarantee_sends_c_hat_to_zero():
    cs = [solve_c_hat(UtilityParams(0.3, 0.5, 2.25, G)).c_hat for G in (1.0, 1e-2, 1e-4)]
    assert cs[0] > cs[1] > cs[2] > 0
    assert cs[2] < 1e-3


@settings(max_examples=40, deadline=None)
@given(
    d1=st.floats(0.05, 0.95),
    d2=st.floats(0.05, 0.95),
    extra=st.floats(0.01, 5.0),
    G=st.floats(1.0, 1e4),
)
def test_random_parameters(d1, d2, extra, G):
    lam = (1 - d2) / (1 - d1) + extra
    p = UtilityParams(d1, d2, lam, G)
    env = solve_c_hat(p)
    assert env.c_hat > 0
    assert abs(tangency_function(env.c_hat, p)) < 1e-12 * max(1.0, lam * G ** (1 - d2) / (1 - d2))
    assert env.c_hat == pytest.approx(bisection_oracle(p), rel=1e-9)
    x = np.linspace(-G, 3 * env.c_hat, 2001)
    assert np.all(envelope_eval(x, env, p) >= utility_eval(x, p) - 1e-9 * max(1.0, abs(env.u_left)))
