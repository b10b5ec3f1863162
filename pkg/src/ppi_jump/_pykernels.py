"""NumPy implementations of the path kernels.

These mirror ``_ckernels.pyx`` operation for operation so both backends agree
to rounding in ``exp``.
"""

import numpy as np


def _owners(ptr):
    return np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))


def levy_exp_grid(t, W, ptr, jump_times, log_abs, neg, a, b, x0):
    """Grid values of ``x0 * sign * exp(a t + b W_t + sum of log|factor| over jumps <= t)``.

    ``neg`` flags jumps whose factor is negative; the sign flips once per
    flagged jump.
    """
    P, K = W.shape
    expo = a * t[None, :] + b * W
    out_sign = None
    if len(jump_times):
        owner = _owners(ptr)
        bucket = np.searchsorted(t, jump_times, side="left")
        flat = owner * K + bucket
        summed = np.bincount(flat, weights=log_abs, minlength=P * K).reshape(P, K)
        expo = expo + np.cumsum(summed, axis=1)
        if np.any(neg):
            flips = np.bincount(flat, weights=neg.astype(float), minlength=P * K).reshape(P, K)
            out_sign = np.cumsum(flips, axis=1) % 2.0
    out = x0 * np.exp(expo)
    if out_sign is not None:
        out[out_sign == 1.0] *= -1.0
    return out


def bridge_at_jumps(t, W, ptr, jump_times, z):
    """Brownian values at the jump times, bridged between grid points.

    Jumps sharing a grid interval are filled in time order, each conditioned
    on the previous jump and the right grid point.
    """
    n = len(jump_times)
    out = np.empty(n)
    if n == 0:
        return out
    owner = _owners(ptr)
    k = np.searchsorted(t, jump_times, side="left")
    at_zero = k == 0
    k = np.maximum(k, 1)

    same_interval = np.zeros(n, dtype=bool)
    same_interval[1:] = (owner[1:] == owner[:-1]) & (k[1:] == k[:-1])
    # rank of each jump inside its (path, interval) group
    starts = np.flatnonzero(~same_interval)
    group_start = np.repeat(starts, np.diff(np.append(starts, n)))
    rank = np.arange(n) - group_start

    t_right = t[k]
    w_right = W[owner, k]
    for r in range(int(rank.max()) + 1):
        sel = rank == r
        if r == 0:
            s = t[k[sel] - 1]
            w_s = W[owner[sel], k[sel] - 1]
        else:
            prev = np.flatnonzero(sel) - 1
            s = jump_times[prev]
            w_s = out[prev]
        tau = jump_times[sel]
        span = t_right[sel] - s
        frac = (tau - s) / span
        var = (tau - s) * (t_right[sel] - tau) / span
        out[sel] = w_s + frac * (w_right[sel] - w_s) + np.sqrt(var) * z[sel]
    out[at_zero] = 0.0
    return out


def first_breach(ptr, factors):
    """Index of the first jump per path with a non-positive factor, or -1."""
    P = len(ptr) - 1
    out = np.full(P, -1, dtype=np.int64)
    bad = np.flatnonzero(factors <= 0.0)
    if len(bad):
        owner = _owners(ptr)[bad]
        uniq, first = np.unique(owner, return_index=True)
        out[uniq] = bad[first]
    return out
