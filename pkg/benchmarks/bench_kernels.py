"""Time the compiled path kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--paths 4096] [--grid 2500] [--repeat 5]

Both backends run on identical inputs; the script also checks that their
outputs agree before reporting timings.
"""

import argparse
import math
import time

import numpy as np

from ppi_jump import kernels
from ppi_jump.market import KouJump, MarketParams, sample_jump_size
from ppi_jump.rng import draw_block
from ppi_jump.simulation import SimConfig, simulate_cushion_paths


def best_of(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=4096)
    ap.add_argument("--grid", type=int, default=2500)
    ap.add_argument("--T", type=float, default=10.0)
    ap.add_argument("--lam", type=float, default=20.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if "cython" not in kernels.BACKENDS:
        raise SystemExit("compiled extension is not built; run 'pip install -e . --no-build-isolation'")

    spec = KouJump(lam=args.lam, p=0.28, eta_plus=64.94, eta_minus=49.02)
    m = 0.8
    d = draw_block(0, 0, args.paths, spec.lam, args.T, args.grid, bridge=True)
    t = np.linspace(0.0, args.T, args.grid + 1)
    W = np.zeros((args.paths, args.grid + 1))
    W[:, 1:] = np.cumsum(d.grid_z * math.sqrt(args.T / args.grid), axis=1)
    f = 1.0 + m * sample_jump_size(spec, d.size_u)
    log_abs, neg = np.log(np.abs(f)), f < 0

    cases = {
        "levy_exp_grid": lambda be: kernels.levy_exp_grid(t, W, d.ptr, d.jump_times, log_abs, neg, 0.05, 0.2, 20.0,
                                                          backend=be),
        "bridge_at_jumps": lambda be: kernels.bridge_at_jumps(t, W, d.ptr, d.jump_times, d.bridge_z, backend=be),
        "first_breach": lambda be: kernels.first_breach(d.ptr, f, backend=be),
    }
    print(f"{args.paths} paths x {args.grid} steps, {len(d.jump_times)} jumps, best of {args.repeat}")
    print(f"{'kernel':<18}{'python [ms]':>12}{'cython [ms]':>13}{'speedup':>9}")
    for name, fn in cases.items():
        a, b = fn("python"), fn("cython")
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14), name
        tp, tc = best_of(lambda: fn("python"), args.repeat), best_of(lambda: fn("cython"), args.repeat)
        print(f"{name:<18}{1e3 * tp:>12.2f}{1e3 * tc:>13.2f}{tp / tc:>8.1f}x")

    # end to end: full cushion simulation
    mkt = MarketParams.from_excess(0.24, 0.26)
    cfg = SimConfig(n_paths=args.paths, T=args.T, n_grid=args.grid, seed=0)
    tp = best_of(lambda: simulate_cushion_paths(mkt, spec, m, cfg, backend="python"), max(1, args.repeat // 2))
    tc = best_of(lambda: simulate_cushion_paths(mkt, spec, m, cfg, backend="cython"), max(1, args.repeat // 2))
    print(f"{'simulate (total)':<18}{1e3 * tp:>12.2f}{1e3 * tc:>13.2f}{tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
