"""Deterministic seeded task execution.

Every stochastic routine derives one RNG stream per task from
(seed, *task index) and reduces results in task order, so a fixed seed gives
bit-identical output at any worker count.  Workers > 1 fan the tasks out to a
process pool; the default is sequential.
"""

from __future__ import annotations

from multiprocessing import get_context
from typing import Callable, Sequence

import numpy as np

__all__ = ["stream", "run_tasks"]


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the task identified by ``key``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(key)))


def _call(packed):
    fn, arg = packed
    return fn(arg)


def run_tasks(fn: Callable, args: Sequence, workers: int = 1) -> list:
    """Ordered map of ``fn`` over ``args``; parallel only when workers > 1."""
    if workers <= 1 or len(args) <= 1:
        return [fn(a) for a in args]
    with get_context("fork").Pool(processes=min(workers, len(args))) as pool:
        return pool.map(_call, [(fn, a) for a in args])
