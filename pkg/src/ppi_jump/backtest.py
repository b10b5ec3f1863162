"""Historical CPPI backtest on a daily close series."""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DataError

DAY_COUNT = 365.0


@dataclass
class PriceSeries:
    dates: list[dt.date]
    close: np.ndarray

    def __len__(self) -> int:
        return len(self.dates)


@dataclass
class BacktestResult:
    """Portfolio, floor and exposure per date; ``lock_index`` is the first date with V <= F."""

    dates: list[dt.date]
    price: np.ndarray
    V: np.ndarray
    F: np.ndarray
    exposure: np.ndarray
    lock_index: Optional[int]

    @property
    def lock_date(self) -> Optional[dt.date]:
        return None if self.lock_index is None else self.dates[self.lock_index]

    @property
    def cushion(self) -> np.ndarray:
        return self.V - self.F


def load_prices(path) -> PriceSeries:
    """Read a ``date,close`` CSV with ISO dates in strictly increasing order."""
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise DataError(f"{path}: cannot open price file ({exc.strerror})") from None
    dates, close = [], []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["date", "close"]:
            raise DataError(f"{path}:1: expected header 'date,close', got {header!r}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            try:
                d = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise DataError(f"{path}:{line}: bad ISO date {row[0]!r}") from None
            try:
                c = float(row[1])
            except ValueError:
                raise DataError(f"{path}:{line}: bad close {row[1]!r}") from None
            if not (math.isfinite(c) and c > 0):
                raise DataError(f"{path}:{line}: close must be positive, got {row[1]!r}")
            if dates and d <= dates[-1]:
                raise DataError(f"{path}:{line}: date {d} does not increase on {dates[-1]}")
            dates.append(d)
            close.append(c)
    if len(dates) < 2:
        raise DataError(f"{path}: need at least two prices, got {len(dates)}")
    return PriceSeries(dates, np.asarray(close))


def money_market(dates: Sequence[dt.date], r: float, compounding: str = "simple") -> np.ndarray:
    """Money-market account on ``dates`` starting at 1, ACT/365."""
    days = np.diff([d.toordinal() for d in dates]).astype(float)
    if compounding == "simple":
        growth = 1.0 + r * days / DAY_COUNT
    elif compounding == "continuous":
        growth = np.exp(r * days / DAY_COUNT)
    else:
        raise ValueError(f"unknown compounding {compounding!r}")
    return np.concatenate(([1.0], np.cumprod(growth)))


def backtest_cppi(
    prices: PriceSeries,
    m: float,
    r: float,
    protection: float = 0.9,
    *,
    v0: float = 100.0,
    compounding: str = "simple",
    rebalance_every: int = 1,
) -> BacktestResult:
    """Self-financing CPPI with risky exposure ``m * max(V - F, 0)``.

    The guarantee is ``protection * v0`` at the last date and the floor is its
    money-market discounted value. Positions are reset every
    ``rebalance_every`` observations and held in between. Once ``V <= F`` the
    exposure is zero and the portfolio grows with the money market, exactly
    like the floor, so the breach is permanent.
    """
    if not 0.0 < protection <= 1.0:
        raise DataError(f"protection must lie in (0, 1], got {protection}")
    if rebalance_every < 1:
        raise DataError(f"rebalance_every must be at least 1, got {rebalance_every}")
    S = prices.close
    B = money_market(prices.dates, r, compounding)
    F = protection * v0 * B / B[-1]
    n = len(S)
    V = np.empty(n)
    expo = np.zeros(n)
    V[0] = v0
    units_s = units_b = 0.0
    lock = None
    for k in range(n):
        if k > 0:
            V[k] = units_s * S[k] + units_b * B[k]
        if lock is None and V[k] <= F[k]:
            lock = k
        if lock is not None:
            # cash-lock: everything in the money market until the end
            units_s, units_b = 0.0, V[k] / B[k]
        elif k % rebalance_every == 0:
            e = m * max(V[k] - F[k], 0.0)
            units_s, units_b = e / S[k], (V[k] - e) / B[k]
        expo[k] = units_s * S[k]
    return BacktestResult(dates=list(prices.dates), price=S, V=V, F=F, exposure=expo, lock_index=lock)
