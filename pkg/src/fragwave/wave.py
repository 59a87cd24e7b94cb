"""Gridded candidate travelling waves.

A :class:`WaveGrid` stores ``f(0), f(dx), ..., f(x_max)``.  It is evaluated with
``f = 1`` on the negative half-line, linear interpolation on the grid, and
``f = 0`` beyond ``x_max``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

TAIL_TOL = 1e-4
_SNAP = 1e-9


@dataclass(frozen=True)
class WaveGrid:
    dx: float
    values: np.ndarray
    tail_tol: float = TAIL_TOL
    _list: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if self.dx <= 0 or values.ndim != 1 or len(values) < 2:
            raise ValidationError("a wave grid needs dx > 0 and at least two values")
        if np.any(values < 0.0) or np.any(values > 1.0) or not np.all(np.isfinite(values)):
            raise ValidationError("wave values must lie in [0, 1]")
        if np.any(np.diff(values) > 0.0):
            raise ValidationError("wave values must be nonincreasing")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_list", values.tolist())

    @classmethod
    def constant(cls, value: float, dx: float, x_max: float) -> "WaveGrid":
        n = int(round(x_max / dx)) + 1
        return cls(dx, np.full(n, float(value)))

    @classmethod
    def from_function(cls, func, dx: float, x_max: float) -> "WaveGrid":
        n = int(round(x_max / dx)) + 1
        return cls(dx, np.array([func(i * dx) for i in range(n)], dtype=float))

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(len(self.values))

    @property
    def x_max(self) -> float:
        return self.dx * (len(self.values) - 1)

    def is_decayed(self) -> bool:
        return self.values[-1] < self.tail_tol

    def __call__(self, x):
        return eval_wave(self, x)


def lookup(vals: list, t: float, left: bool = False) -> float:
    """Value of a gridded wave at fractional node index ``t``.

    ``vals`` may be a partially filled list (used while marching); ``t`` must
    not exceed ``len(vals) - 1`` by more than the snapping tolerance unless the
    zero tail is intended.
    """
    if t < _SNAP:
        if t <= -_SNAP or left:
            return 1.0
        return vals[0]
    i = int(t)
    r = t - i
    if r > 1.0 - _SNAP:
        i += 1
        r = 0.0
    elif r < _SNAP:
        r = 0.0
    n = len(vals)
    if r == 0.0:
        return vals[i] if i < n else 0.0
    if i >= n - 1:
        return 0.0
    return vals[i] + r * (vals[i + 1] - vals[i])


def eval_wave(f: WaveGrid, x: float, left: bool = False) -> float:
    """Evaluate ``f`` at ``x``.

    With ``left=True`` the left limit is returned at ``x = 0`` (which is 1); this
    is the only point where the two one-sided limits of a wave differ.
    """
    return lookup(f._list, x / f.dx, left)


def eval_wave_array(f: WaveGrid, x) -> np.ndarray:
    """Vectorised :func:`eval_wave` (right-continuous at 0)."""
    x = np.asarray(x, dtype=float)
    t = x / f.dx
    out = np.interp(x, f.x, f.values)
    out = np.where(t <= -_SNAP, 1.0, out)
    return np.where(t >= len(f.values) - 1 + _SNAP, 0.0, out)


def node_index(f: WaveGrid, x: float) -> int | None:
    """Index of the grid node at ``x``, or None if ``x`` is not on a node."""
    t = x / f.dx
    i = int(round(t))
    if abs(t - i) < _SNAP and 0 <= i < len(f.values):
        return i
    return None
