"""Reproducible random draws for the path simulator.

Paths are grouped into fixed-size blocks. Each (seed, block, kind) triple owns
an independent Philox stream, and draws inside a block are laid out path by
path, so a given path index always sees the same numbers no matter how many
paths are requested or how blocks are spread over workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

BLOCK_SIZE = 4096

COUNTS, TIMES, SIZES, GRID, BRIDGE = range(5)

# shift so uniforms land in the open interval (0, 1)
_HALF_ULP = 2.0**-54


def stream(seed: int, block: int, kind: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(block), int(kind)))
    return np.random.Generator(np.random.Philox(ss))


def open_uniform(gen: np.random.Generator, n: int) -> np.ndarray:
    return gen.random(n) + _HALF_ULP


@dataclass
class BlockDraws:
    """Random inputs for one block of paths.

    Jumps are stored flat, sorted by (path, time); path ``i`` owns entries
    ``ptr[i]:ptr[i + 1]``.
    """

    ptr: np.ndarray
    jump_times: np.ndarray
    size_u: np.ndarray
    grid_z: np.ndarray
    bridge_z: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return self.grid_z.shape[0]


def draw_block(
    seed: int,
    block: int,
    n_paths: int,
    lam: float,
    T: float,
    n_grid: int,
    *,
    bridge: bool = False,
) -> BlockDraws:
    counts = stream(seed, block, COUNTS).poisson(lam * T, n_paths) if lam > 0 else np.zeros(n_paths, np.int64)
    ptr = np.zeros(n_paths + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    n_jumps = int(ptr[-1])

    times = open_uniform(stream(seed, block, TIMES), n_jumps) * T
    owner = np.repeat(np.arange(n_paths), counts)
    times = times[np.lexsort((times, owner))]

    size_u = open_uniform(stream(seed, block, SIZES), n_jumps)
    grid_z = stream(seed, block, GRID).standard_normal((n_paths, n_grid))
    bridge_z = stream(seed, block, BRIDGE).standard_normal(n_jumps) if bridge else None
    return BlockDraws(ptr=ptr, jump_times=times, size_u=size_u, grid_z=grid_z, bridge_z=bridge_z)


def blocks(n_paths: int, block_size: int = BLOCK_SIZE):
    """Yield ``(block_index, start, stop)`` covering ``range(n_paths)``."""
    for b, start in enumerate(range(0, n_paths, block_size)):
        yield b, start, min(start + block_size, n_paths)
