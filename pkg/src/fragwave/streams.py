"""Counter-based per-trial random streams and order-preserving trial fan-out.

Trial ``i`` of a run seeded with ``master_seed`` always draws from
``Philox(key = master_seed * 2**64 + i)``, so a trial's randomness does not
depend on which worker runs it or on how many workers there are.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .errors import ValidationError

DEFAULT_SEED = 0xF4A6
_BUFFER = 256


def check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def trial_generator(master_seed: int, trial_index: int) -> np.random.Generator:
    key = (check_seed(master_seed) << 64) | int(trial_index)
    return np.random.Generator(np.random.Philox(key=key))


class UniformStream:
    """Buffered scalar uniforms; scalar ``Generator.random()`` calls are slow."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, gen: np.random.Generator):
        self._gen = gen
        self._buf = gen.random(_BUFFER).tolist()
        self._pos = 0

    def random(self) -> float:
        if self._pos == _BUFFER:
            self._buf = self._gen.random(_BUFFER).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def exponential(self, rate: float) -> float:
        return -math.log1p(-self.random()) / rate


def trial_stream(master_seed: int, trial_index: int) -> UniformStream:
    return UniformStream(trial_generator(master_seed, trial_index))


def map_trials(func, n_trials: int, args: tuple = (), workers: int = 1, chunk: int = 250):
    """Evaluate ``func(start, stop, *args)`` over consecutive trial ranges.

    ``func`` returns a list with one entry per trial.  The concatenated list is
    in trial order regardless of ``workers``.
    """
    bounds = [(s, min(s + chunk, n_trials)) for s in range(0, n_trials, chunk)]
    if workers is None or workers <= 1 or len(bounds) == 1:
        out = []
        for s, e in bounds:
            out.extend(func(s, e, *args))
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, s, e, *args) for s, e in bounds]
        out = []
        for fut in futures:
            out.extend(fut.result())
    return out
