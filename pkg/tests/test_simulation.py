import math
from dataclasses import replace

import numpy as np
import pytest

from ppi_jump.errors import AdmissibilityError, ConfigError, DomainError
from ppi_jump.market import ConstantJump, MarketParams
from ppi_jump.simulation import (
    SimConfig,
    dual_decay_rate,
    duality_identity_check,
    expected_utility,
    gap_probability,
    multiplier_grid,
    perturbed_sizes,
    quantile_bands,
    simulate_cppi_classic,
    simulate_cushion_paths,
    state_price_paths,
    terminal_utility_scan,
    value_function_mc,
)
from ppi_jump.solver import kernel_from_multiplier, solve_multiplier
from ppi_jump.utility import UtilityParams, envelope_eval, solve_c_hat, utility_eval

from conftest import CONSTANT, DELTA1, KOU_SOLVABLE, MERTON

SMALL = SimConfig(n_paths=500, T=2.0, n_grid=50, seed=7)
UTIL = UtilityParams(delta1=DELTA1)


class TestConfig:
    def test_validation(self):
        for kw in (dict(n_paths=0), dict(n_grid=0), dict(T=0.0), dict(c0=0.0), dict(G=-1.0),
                   dict(seed=-1), dict(workers=0), dict(n_paths=2.5)):
            with pytest.raises(ConfigError):
                SimConfig(**kw)

    def test_from_wealth(self):
        cfg = SimConfig.from_wealth(100.0, 0.9, 0.035, T=10.0)
        assert cfg.G == pytest.approx(90.0)
        assert cfg.v0(0.035) == pytest.approx(100.0)
        with pytest.raises(ConfigError):
            SimConfig.from_wealth(100.0, 1.2, 0.035)


class TestCushionPaths:
    def test_zero_multiplier_is_money_market(self, solvable_model):
        mkt, spec = solvable_model
        b = simulate_cushion_paths(mkt, spec, 0.0, SMALL)
        expect = np.broadcast_to(SMALL.c0 * np.exp(mkt.r * b.t), b.C.shape)
        np.testing.assert_allclose(b.C, expect, rtol=1e-15, atol=0)

    def test_deterministic_ode_case(self):
        mkt = MarketParams.from_excess(0.1, 1e-300)
        b = simulate_cushion_paths(mkt, ConstantJump(-0.1, 0.0), 2.0, SMALL)
        expect = SMALL.c0 * np.exp((mkt.r + 2.0 * 0.1) * SMALL.T)
        np.testing.assert_allclose(b.C_T, expect, rtol=1e-14)

    def test_portfolio_equals_cushion_plus_floor(self):
        mkt, spec = CONSTANT
        b = simulate_cushion_paths(mkt, spec, -2.0, SMALL)
        assert np.array_equal(b.V, b.C + b.F[None, :])
        np.testing.assert_allclose(b.V - b.C, np.broadcast_to(b.F, b.V.shape), rtol=1e-12)
        assert b.F[-1] == SMALL.G

    def test_inadmissible_multiplier_rejected(self):
        mkt, spec = MERTON
        with pytest.raises(DomainError):
            simulate_cushion_paths(mkt, spec, 1.5, SMALL)
        b = simulate_cushion_paths(mkt, spec, 3.0, SMALL, allow_gap=True)
        assert b.C.min() < 0  # the cushion crosses zero and keeps going

    def test_exact_lognormal_terminal_law(self):
        mkt = MarketParams.from_excess(0.2, 0.3)
        m, T = 1.7, 2.0
        cfg = SimConfig(n_paths=100_000, T=T, n_grid=1, seed=3)
        logc = np.log(simulate_cushion_paths(mkt, ConstantJump(-0.03, 0.0), m, cfg).C_T / cfg.c0)
        mean = (mkt.r + m * 0.2 - 0.5 * m * m * 0.09) * T
        var = m * m * 0.09 * T
        n = len(logc)
        assert abs(logc.mean() - mean) < 4 * math.sqrt(var / n)
        assert abs(logc.var() - var) < 4 * var * math.sqrt(2 / (n - 1))

    def test_jump_count_law(self):
        mkt, spec = MERTON
        cfg = SimConfig(n_paths=20_000, T=1.5, n_grid=1, seed=4)
        b = simulate_cushion_paths(mkt, spec, 0.3, cfg)
        rate = b.ptr[-1] / (cfg.T * cfg.n_paths)
        assert abs(rate - spec.lam) < 4 * math.sqrt(spec.lam / (cfg.T * cfg.n_paths))

    def test_reproducible_across_workers_and_sizes(self):
        mkt, spec = KOU_SOLVABLE
        cfg = SimConfig(n_paths=9000, T=1.0, n_grid=5, seed=11)
        one = simulate_cushion_paths(mkt, spec, 0.5, cfg)
        many = simulate_cushion_paths(mkt, spec, 0.5, replace(cfg, workers=3))
        assert np.array_equal(one.C, many.C)
        assert np.array_equal(one.ptr, many.ptr)
        part = simulate_cushion_paths(mkt, spec, 0.5, replace(cfg, n_paths=5000))
        assert np.array_equal(part.C, one.C[:5000])

    def test_backends_agree(self):
        from ppi_jump import kernels

        if "cython" not in kernels.BACKENDS:
            pytest.skip("compiled extension not built")
        mkt, spec = CONSTANT
        a = simulate_cushion_paths(mkt, spec, -2.18, SMALL, backend="python")
        b = simulate_cushion_paths(mkt, spec, -2.18, SMALL, backend="cython")
        np.testing.assert_allclose(a.C, b.C, rtol=1e-13)


class TestClassicCPPI:
    def test_no_breach_matches_cushion_paths(self):
        mkt, spec = MERTON
        a = simulate_cushion_paths(mkt, spec, 0.5, SMALL)
        b = simulate_cppi_classic(mkt, spec, 0.5, SMALL)
        assert np.all(np.isnan(b.lock_time))
        np.testing.assert_allclose(a.V, b.V, rtol=1e-14)

    def test_large_jump_locks_into_money_market(self):
        mkt = MarketParams.from_excess(0.05, 0.2)
        spec = ConstantJump(-0.15, 1.0)
        assert 1 + 10 * -0.15 == pytest.approx(-0.5)
        cfg = SimConfig(n_paths=400, T=3.0, n_grid=30, seed=2)
        b = simulate_cppi_classic(mkt, spec, 10.0, cfg)
        locked = ~np.isnan(b.lock_time)
        has_jump = np.diff(b.ptr) > 0
        assert np.array_equal(locked, has_jump)
        first_jump = b.jump_times[b.ptr[:-1][has_jump]]
        np.testing.assert_array_equal(b.lock_time[locked], first_jump)
        for i in np.flatnonzero(locked)[:50]:
            after = b.t >= b.lock_time[i]
            v = b.V[i, after]
            # after the lock the value only earns the money-market rate
            np.testing.assert_allclose(v[1:] / v[:-1], np.exp(mkt.r * np.diff(b.t[after])), rtol=1e-12)
            assert v[0] <= b.F[after][0] * math.exp(mkt.r * (b.t[after][0] - b.lock_time[i])) + 1e-9

    def test_lock_value_from_pre_jump_cushion(self):
        # with zero volatility the pre-jump cushion is known exactly
        mkt = MarketParams.from_excess(0.05, 1e-300)
        cfg = SimConfig(n_paths=50, T=2.0, n_grid=4, seed=8)
        m = 10.0
        b = simulate_cppi_classic(mkt, ConstantJump(-0.15, 2.0), m, cfg)
        a = mkt.r + m * 0.05
        for i in np.flatnonzero(~np.isnan(b.lock_time)):
            tau = b.lock_time[i]
            c_minus = cfg.c0 * math.exp(a * tau)
            v_tau = c_minus * (1 - 1.5) + cfg.G * math.exp(-mkt.r * (cfg.T - tau))
            assert b.V[i, -1] == pytest.approx(v_tau * math.exp(mkt.r * (cfg.T - tau)), rel=1e-12)


class TestGapRisk:
    def test_unperturbed_model_has_no_gap(self):
        mkt, spec = CONSTANT
        m = solve_multiplier(mkt, spec, DELTA1).m_hat
        est = gap_probability(mkt, spec, m, SimConfig(n_paths=20_000, T=10.0, n_grid=1), 0.0)
        assert est.probability == 0.0 and est.stderr == 0.0

    def test_sign_parity(self):
        mkt, spec = CONSTANT
        m = solve_multiplier(mkt, spec, DELTA1).m_hat
        cfg = SimConfig(n_paths=3000, T=5.0, n_grid=1, seed=5)
        est = gap_probability(mkt, spec, m, cfg, 0.3)
        b = simulate_cushion_paths(mkt, spec, m, cfg, allow_gap=True, sizes=perturbed_sizes(spec, 0.3))
        assert est.probability == np.mean(b.C_T <= 0)
        assert est.stderr == pytest.approx(math.sqrt(est.probability * (1 - est.probability) / 3000))
        assert est.breach_probability >= est.probability

    def test_truncation_reported(self):
        mkt, spec = CONSTANT
        est = gap_probability(mkt, spec, -2.18, SimConfig(n_paths=2000, T=5.0, n_grid=1), 0.6)
        assert 0 < est.truncated_fraction < 0.2

    def test_custom_sizes_need_gap_mode(self):
        mkt, spec = CONSTANT
        with pytest.raises(AdmissibilityError):
            simulate_cushion_paths(mkt, spec, -2.18, SimConfig(n_paths=2000, T=10, n_grid=1),
                                   sizes=perturbed_sizes(spec, 0.3))


class TestBandsAndUtility:
    def test_degenerate_bands(self):
        mkt, spec = CONSTANT
        b = simulate_cushion_paths(mkt, spec, 0.0, SMALL)
        bands = quantile_bands(b, (0.0, 0.5, 0.99))
        for row in bands.values:
            np.testing.assert_allclose(row, b.V[0], rtol=1e-15)
        assert np.array_equal(bands.floor, b.F)

    def test_lowest_band_is_minimum(self):
        mkt, spec = MERTON
        b = simulate_cushion_paths(mkt, spec, 0.33, SMALL)
        bands = quantile_bands(b, (0.0, 1.0))
        assert np.array_equal(bands.values[0], b.V.min(axis=0))
        assert np.array_equal(bands.values[1], b.V.max(axis=0))

    def test_expected_utility_deterministic(self):
        mkt, spec = CONSTANT
        b = simulate_cushion_paths(mkt, spec, 0.0, SMALL)
        est, se = expected_utility(b, UTIL)
        assert est == pytest.approx(float(utility_eval(SMALL.c0 * math.exp(mkt.r * SMALL.T), UTIL)), rel=1e-14)
        assert se == 0.0

    def test_envelope_equals_utility_above_tangency(self):
        env = solve_c_hat(UTIL)
        c = np.linspace(env.c_hat, 5 * env.c_hat, 50)
        assert expected_utility(c, UTIL, use_envelope=True)[0] == pytest.approx(expected_utility(c, UTIL)[0], rel=1e-12)

    def test_admissibility(self):
        with pytest.raises(AdmissibilityError):
            expected_utility(np.array([1.0, -150.0]), UTIL)

    def test_grid_scan_matches_path_simulation(self):
        mkt, spec = MERTON
        cfg = SimConfig(n_paths=3000, T=1.0, n_grid=1, seed=9)
        scan = terminal_utility_scan(mkt, spec, UTIL, [0.2, 0.6], cfg)
        for i, m in enumerate((0.2, 0.6)):
            b = simulate_cushion_paths(mkt, spec, m, cfg)
            assert scan[i, 0] == pytest.approx(expected_utility(b, UTIL)[0], rel=1e-12)

    def test_multiplier_grid(self):
        g = multiplier_grid(MERTON[1], 0.33)
        assert len(g) == 41 and g[0] == 0.0 and g[-1] == 1.0
        g = multiplier_grid(CONSTANT[1], -2.18)
        assert g[0] == pytest.approx(-7.18) and g[-1] == pytest.approx(2.82)
        g = multiplier_grid(ConstantJump(-0.5, 1.0), 1.0)
        assert g[-1] < 2.0


class TestDuality:
    def test_identity_kernel_density_is_one(self):
        mkt, spec = MERTON
        k = kernel_from_multiplier(0.0, mkt.sigma, DELTA1)
        b = state_price_paths(k, mkt, spec, SMALL, m=0.3)
        np.testing.assert_allclose(b.Z, 1.0, rtol=1e-14)
        np.testing.assert_allclose(b.H[:, -1], math.exp(-mkt.r * SMALL.T), rtol=1e-14)

    def test_initial_values(self, solvable_model):
        mkt, spec = solvable_model
        sol = solve_multiplier(mkt, spec, DELTA1)
        b = state_price_paths(sol.kernel, mkt, spec, SMALL)
        assert np.all(b.Z[:, 0] == 1.0) and np.all(b.H[:, 0] == 1.0)
        assert np.all(b.C[:, 0] == SMALL.c0)

    def test_identity_diffusion_only(self):
        mkt = MarketParams.from_excess(0.2, 0.3)
        spec = ConstantJump(-0.03, 0.0)
        sol = solve_multiplier(mkt, spec, DELTA1)
        cfg = SimConfig(n_paths=1000, T=5.0, n_grid=100, seed=1)
        assert duality_identity_check(sol.kernel, mkt, spec, sol.m_hat, cfg) < 1e-9

    def test_identity_fails_away_from_root(self):
        mkt, spec = CONSTANT
        k = kernel_from_multiplier(-1.0, mkt.sigma, DELTA1)
        err = duality_identity_check(k, mkt, spec, -1.0, SimConfig(n_paths=50, T=2.0, n_grid=4))
        assert err > 1e-3

    def test_decay_rate_diffusion_closed_form(self):
        mkt = MarketParams.from_excess(0.2, 0.3)
        k = kernel_from_multiplier(0.2 / 0.054, 0.3, 0.6)
        q = 0.4 / 0.6
        assert dual_decay_rate(k, mkt, ConstantJump(-0.03, 0.0)) == pytest.approx(
            q * mkt.r + 0.5 * 0.4 / 0.36 * k.theta_D**2, rel=1e-15
        )


class TestValueFunction:
    def test_terminal_condition(self):
        mkt, spec = CONSTANT
        env = solve_c_hat(UTIL)
        v, se = value_function_mc(mkt, spec, UTIL, SMALL.T, 7.0, SMALL)
        assert v == float(envelope_eval(7.0, env, UTIL)) and se == 0.0

    def test_monotone_in_cushion_and_time_to_maturity(self):
        mkt, spec = CONSTANT
        cfg = SimConfig(n_paths=20_000, T=5.0, n_grid=1, seed=12)
        m = solve_multiplier(mkt, spec, DELTA1).m_hat
        cs = [5.0, 20.0, 80.0]
        for t in (0.0, 2.5):
            vals = [value_function_mc(mkt, spec, UTIL, t, c, cfg, m=m)[0] for c in cs]
            assert vals[0] < vals[1] < vals[2]
        by_t = [value_function_mc(mkt, spec, UTIL, t, 20.0, cfg, m=m)[0] for t in (0.0, 2.5, 4.5)]
        assert by_t[0] > by_t[1] > by_t[2]

    def test_bad_time(self):
        with pytest.raises(ConfigError):
            value_function_mc(*CONSTANT, UTIL, 6.0, 1.0, SMALL)
