"""Command-line front end.

Exit codes: 0 success, 2 failed existence gate or verification check,
3 convergence failure, 4 bad input data or configuration.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import config as config_mod
from .backtest import backtest_cppi, load_prices
from .errors import (
    AdmissibilityError,
    ConfigError,
    ConvergenceError,
    DataError,
    DomainError,
    NoSolutionError,
    QuadratureError,
)
from .simulation import (
    duality_identity_check,
    gap_probability,
    multiplier_grid,
    quantile_bands,
    simulate_cushion_paths,
    state_price_paths,
    terminal_utility_scan,
)
from .solver import MultiplierSolution, existence_check, no_arbitrage_residual, solve_multiplier
from .utility import envelope_eval, solve_c_hat, utility_eval

EXIT_OK, EXIT_GATE, EXIT_CONVERGENCE, EXIT_DATA = 0, 2, 3, 4


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.10g" % x
    return str(x)


class Output:
    """CSV rows go to ``--out`` or stdout; human summaries go to stderr."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self._fh = None

    def __enter__(self):
        if self.path:
            try:
                self._fh = open(self.path, "w", newline="")
            except OSError as exc:
                raise DataError(f"{self.path}: cannot write output ({exc.strerror})") from None
            fh = self._fh
        else:
            fh = sys.stdout
        self.writer = csv.writer(fh, lineterminator="\n")
        return self

    def __exit__(self, *exc):
        if self._fh is not None:
            self._fh.close()

    def row(self, *values):
        self.writer.writerow([fmt(v) for v in values])

    @staticmethod
    def note(msg: str):
        print(msg, file=sys.stderr)


def _solve(cfg) -> MultiplierSolution:
    return solve_multiplier(cfg.market(), cfg.jump(), cfg["utility.delta1"])


# subcommands


def cmd_solve(cfg, out: Output) -> int:
    mkt, spec, d1 = cfg.market(), cfg.jump(), cfg["utility.delta1"]
    report = existence_check(mkt, spec, d1)
    out.row("key", "value")
    out.row("model", cfg["model"])
    out.row("case", report.case)
    out.row("bracket_lo", report.bracket[0])
    out.row("bracket_hi", report.bracket[1])
    out.row("gate1", report.gate1)
    out.row("gate2", report.gate2)
    for name in ("gate1_quadrature", "gate2_quadrature", "printed_gate1", "printed_gate2"):
        val = getattr(report, name)
        if val is not None:
            out.row(name, val)
    out.row("gates_passed", report.passed)
    for note in report.notes:
        out.note(f"note: {note}")
    try:
        t0 = time.perf_counter()
        sol = solve_multiplier(mkt, spec, d1)
        elapsed = time.perf_counter() - t0
    except NoSolutionError as exc:
        out.note(f"no solution: {exc}")
        return EXIT_GATE
    out.row("m_hat", sol.m_hat)
    out.row("theta_D", sol.kernel.theta_D)
    out.row("g_residual", sol.g_residual)
    out.row("iterations", sol.iterations)
    out.note(f"m_hat = {sol.m_hat:.6f} on ({report.bracket[0]:.6g}, {report.bracket[1]:.6g}) in {elapsed * 1e3:.2f} ms")
    return EXIT_OK


def cmd_sweep(cfg, out: Output) -> int:
    res = cfg.resolved()
    param = res["sweep.param"]
    values = np.linspace(res["sweep.start"], res["sweep.stop"], res["sweep.steps"])
    key = {"excess": "market.excess", "sigma": "market.sigma", "r": "market.r", "delta1": "utility.delta1"}.get(
        param, f"jump.{param}"
    )
    out.row("param", "value", "m_hat", "theta_D", "gate1", "gate2")
    n_fail = 0
    for v in values:
        point = config_mod.ExperimentConfig(dict(res.values))
        point.values[key] = float(v)
        try:
            mkt, spec, d1 = point.market(), point.jump(), point["utility.delta1"]
            if not 0.0 < d1 < 1.0:
                raise ConfigError(f"delta1 must lie in (0, 1), got {d1}")
        except ConfigError as exc:
            raise ConfigError(f"sweep value {param} = {v:.10g}: {exc}") from None
        report = existence_check(mkt, spec, d1)
        gates = ("pass" if report.gate1_pass else "fail", "pass" if report.gate2_pass else "fail")
        if report.passed:
            sol = solve_multiplier(mkt, spec, d1)
            out.row(param, float(v), sol.m_hat, sol.kernel.theta_D, *gates)
        else:
            n_fail += 1
            out.row(param, float(v), None, None, *gates)
    out.note(f"swept {param} over {len(values)} points; {n_fail} failed the existence gates")
    return EXIT_OK


def cmd_simulate(cfg, out: Output) -> int:
    mkt, spec = cfg.market(), cfg.jump()
    m = cfg["sim.m"]
    if m is None:
        m = _solve(cfg).m_hat
    sim = cfg.sim()
    bundle = simulate_cushion_paths(mkt, spec, m, sim)
    bands = quantile_bands(bundle, cfg["sim.levels"])
    names = [f"q{100 * q:g}" for q in bands.levels]
    out.row("t", *names, "floor")
    for k, t in enumerate(bands.t):
        out.row(float(t), *bands.values[:, k], float(bands.floor[k]))
    above = bool(np.all(bands.values[0, 1:] > bands.floor[1:])) if bands.levels[0] == 0.0 else None
    out.note(f"m = {m:.6f}; min cushion over paths and grid = {bundle.C.min():.6g}")
    if above is not None:
        out.note(f"lowest band above the floor at every t > 0: {above}")
    return EXIT_OK


def cmd_gap(cfg, out: Output) -> int:
    if cfg["model"] != "constant":
        raise ConfigError("gap risk is defined for the constant-jump base model; set model = constant")
    mkt, spec = cfg.market(), cfg.jump()
    m = _solve(cfg).m_hat
    out.row("T", "sigma_gamma", "prob", "stderr")
    t0 = time.perf_counter()
    for T in cfg["gap.T"]:
        sim = cfg.sim(n_paths=cfg["gap.paths"], T=T, n_grid=1)
        for s in cfg["gap.sigma"]:
            est = gap_probability(mkt, spec, m, sim, s, law=cfg["gap.law"])
            out.row(T, s, est.probability, est.stderr)
    out.note(f"m_hat = {m:.6f}; {cfg['gap.paths']} paths per cell in {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


def cmd_verify(cfg, out: Output) -> int:
    mkt, spec, params = cfg.market(), cfg.jump(), cfg.utility()
    sol = _solve(cfg)
    m, kernel = sol.m_hat, sol.kernel
    rows = []

    rows.append(("g_residual", sol.g_residual, 1e-10, sol.g_residual < 1e-10))
    na = abs(no_arbitrage_residual(kernel, mkt, spec))
    rows.append(("no_arbitrage_residual", na, 1e-8, na < 1e-8))

    paths = cfg.sim(n_grid=cfg["verify.identity_grid"])
    min_c = float(simulate_cushion_paths(mkt, spec, m, paths).C.min())
    rows.append(("min_cushion", min_c, 0.0, min_c > 0.0))

    ident = cfg.sim(n_paths=cfg["verify.identity_paths"], n_grid=cfg["verify.identity_grid"])
    err = duality_identity_check(kernel, mkt, spec, m, ident)
    rows.append(("duality_identity_max_rel_err", err, 1e-8, err < 1e-8))

    mc = cfg.sim(n_paths=cfg["verify.paths"], T=cfg["verify.T"], n_grid=1)
    b = state_price_paths(kernel, mkt, spec, mc)
    Z_T = b.Z[:, -1]
    z_score = abs(Z_T.mean() - 1.0) / (Z_T.std(ddof=1) / math.sqrt(len(Z_T)))
    rows.append(("martingale_z_score", z_score, 3.0, z_score < 3.0))
    budget = abs(np.mean(b.H[:, -1] * b.C_T) / mc.c0 - 1.0)
    rows.append(("budget_rel_err", budget, 0.01, budget < 0.01))

    grid = multiplier_grid(spec, m, cfg["verify.grid_points"])
    eu = terminal_utility_scan(mkt, spec, params, grid, mc)
    step = grid[1] - grid[0]
    best = grid[int(np.argmax(eu[:, 0]))]
    steps_off = abs(best - m) / step
    rows.append(("grid_argmax_steps_from_m_hat", steps_off, 1.0, steps_off <= 1.0))

    out.row("check", "value", "threshold", "passed")
    for r in rows:
        out.row(*r)
    failed = [r[0] for r in rows if not r[3]]
    out.note(f"m_hat = {m:.6f}; failed checks: {', '.join(failed) if failed else 'none'}")
    return EXIT_GATE if failed else EXIT_OK


def cmd_backtest(cfg, out: Output) -> int:
    path = cfg["backtest.prices"]
    if path is None:
        raise DataError("backtest needs a price file: set backtest.prices = PATH")
    prices = load_prices(path)
    res = backtest_cppi(
        prices, cfg["backtest.m"], cfg["market.r"], cfg["backtest.protection"], v0=cfg["backtest.v0"],
        compounding=cfg["backtest.compounding"], rebalance_every=cfg["backtest.rebalance_every"],
    )
    out.row("date", "price", "value", "floor", "exposure", "locked")
    for k, d in enumerate(res.dates):
        locked = res.lock_index is not None and k >= res.lock_index
        out.row(d.isoformat(), res.price[k], res.V[k], res.F[k], res.exposure[k], locked)
    if res.lock_date is None:
        out.note(f"no cash-lock; final value {res.V[-1]:.4f} vs floor {res.F[-1]:.4f}")
    else:
        out.note(f"cash-lock on {res.lock_date.isoformat()}; final value {res.V[-1]:.4f} vs guarantee {res.F[-1]:.4f}")
    return EXIT_OK


def cmd_concavify(cfg, out: Output) -> int:
    params = cfg.utility()
    env = solve_c_hat(params)
    x_max = cfg["concavify.x_max"] or 3.0 * env.c_hat
    x = np.linspace(-params.G, x_max, cfg["concavify.points"])
    u, e = utility_eval(x, params), envelope_eval(x, env, params)
    out.row("x", "utility", "envelope")
    for row in zip(x, u, e):
        out.row(*row)
    out.note(f"c_hat = {env.c_hat:.10g}; k = {env.k:.10g}; line through ({env.x_left:.10g}, {env.u_left:.10g})")
    return EXIT_OK


COMMANDS = {
    "solve": (cmd_solve, "optimal multiplier and existence report", None),
    "sweep": (cmd_sweep, "optimal multiplier over one parameter axis", None),
    "simulate": (cmd_simulate, "quantile bands of portfolio paths against the floor", "sim.paths"),
    "gap": (cmd_gap, "gap-risk matrix under perturbed jump sizes", "gap.paths"),
    "verify": (cmd_verify, "martingale, budget, duality and optimality checks", "verify.paths"),
    "backtest": (cmd_backtest, "historical CPPI run on a price CSV", None),
    "concavify": (cmd_concavify, "tangency point and concave envelope on a grid", None),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--set", metavar="K=V", action="append", default=[], dest="overrides",
                        help="override one config key (repeatable)")
    common.add_argument("--seed", type=int, help="shorthand for --set sim.seed=N")
    common.add_argument("--paths", type=int, help="number of Monte Carlo paths for this command")
    common.add_argument("--out", metavar="PATH", help="write CSV here instead of stdout")
    common.add_argument("--dump-config", action="store_true", help="print the resolved config and exit")

    parser = argparse.ArgumentParser(prog="ppi-jump", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text, _) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    fn, _, paths_key = COMMANDS[args.command]
    try:
        overrides = list(args.overrides)
        if args.seed is not None:
            overrides.append(f"sim.seed={args.seed}")
        if args.paths is not None:
            overrides.append(f"{paths_key or 'sim.paths'}={args.paths}")
        cfg = config_mod.load(args.config, overrides)
        if args.dump_config:
            text = cfg.dump()
            if args.out:
                with open(args.out, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        cfg = cfg.resolved()
        with Output(args.out) as out:
            return fn(cfg, out)
    except NoSolutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATE
    except AdmissibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATE
    except (ConvergenceError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except (ConfigError, DataError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
