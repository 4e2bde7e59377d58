"""Reproducible random streams keyed by (base seed, path index, role).

Each role gets its own ``SeedSequence`` child, so paths never share state and
results do not depend on the order in which paths are run.
"""

from __future__ import annotations

import numpy as np

ROLES = ("B1", "B2", "B3", "B4", "jump_times", "jump_marks")
_ROLE_INDEX = {name: k for k, name in enumerate(ROLES)}

MAX_SEED = 2 ** 64 - 1


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def stream(seed: int, path: int, role: str) -> np.random.Generator:
    if role not in _ROLE_INDEX:
        raise KeyError(f"unknown stream role {role!r}; expected one of {ROLES}")
    if path < 0:
        raise ValueError("path index must be >= 0")
    ss = np.random.SeedSequence(entropy=check_seed(seed),
                                spawn_key=(int(path), _ROLE_INDEX[role]))
    return np.random.Generator(np.random.PCG64(ss))


def poisson_times(gen: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Event times of a homogeneous Poisson process on ``(0, horizon]``."""
    if rate <= 0:
        return np.zeros(0)
    chunk = int(rate * horizon + 6 * np.sqrt(rate * horizon) + 16)
    times = []
    last = 0.0
    while True:
        gaps = gen.exponential(1.0 / rate, size=chunk)
        block = last + np.cumsum(gaps)
        keep = block[block <= horizon]
        times.append(keep)
        if keep.size < block.size:
            break
        last = block[-1]
    return np.concatenate(times)
