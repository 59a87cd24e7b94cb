"""One-sided FKPP travelling waves for killed fragmentations.

The wave equation ``c f'(x) + L f(x) = 0`` on ``x > 0`` with ``f = 1`` on
``x < 0`` only looks to the left: every argument ``x + ln s`` of ``L`` is
strictly smaller than ``x``.  So ``f' = -L f / c`` can be marched forward from
``f(0) = theta``, and ``theta`` is found by bisection on whether the trajectory
dives below zero or turns back up.

For a finite atomic measure the wave jumps at 0, so ``f'`` has jumps at the
jump sizes ``-ln s`` and ``f''`` at their pairwise sums.  Residuals at those
nodes use one-sided differences against the matching one-sided ``L``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dislocation import DislocationMeasure, critical_speed, total_rate
from .errors import NumericalError, SubcriticalSpeedError, ValidationError
from .simulator import ExtinctionEstimate, estimate_extinction
from .streams import DEFAULT_SEED
from .wave import TAIL_TOL, WaveGrid, eval_wave, lookup

LN2 = math.log(2.0)
PLATEAU_TOL = 1e-4
RESIDUAL_TOL = 1e-3
GRID_TOL = 0.02
_ALIGN_TOL = 1e-9


class Shot(enum.Enum):
    BELOW_ZERO = "below_zero"
    PLATEAU = "plateau"
    DECAYED = "decayed"


@dataclass(frozen=True)
class ShootResult:
    theta: float
    values: np.ndarray
    classification: Shot
    direction: int  # -1 dived below 0, +1 turned up, 0 reached x_max
    dx: float

    @property
    def x_stop(self) -> float:
        return self.dx * (len(self.values) - 1)


@dataclass(frozen=True)
class ResidualReport:
    x: np.ndarray
    residual: np.ndarray
    max_abs_residual: float
    dx: float
    kink_nodes: tuple = ()
    norm: str = "max over interior nodes; one-sided differences at kink nodes"


def apply_L(nu: DislocationMeasure, f: WaveGrid, x: float, left: bool = False) -> float:
    """``L f(x) = sum_i w_i (prod_n f(x + ln s_in) - f(x))``.

    ``left=True`` takes left limits where an argument lands exactly on 0.
    """
    if x < 0:
        raise ValidationError("L f(x) is defined for x >= 0")
    fx = eval_wave(f, x)
    out = 0.0
    for atom, logs in zip(nu.atoms, nu.log_sizes):
        prod = 1.0
        for ls in logs:
            prod *= eval_wave(f, x + ls, left)
        out += atom.weight * (prod - fx)
    return out


def jump_sizes(nu: DislocationMeasure) -> list[float]:
    ys = sorted({-ls for logs in nu.log_sizes for ls in logs})
    out = []
    for y in ys:
        if not out or y - out[-1] > 1e-12:
            out.append(y)
    return out


def is_aligned(nu: DislocationMeasure, dx: float) -> bool:
    return all(abs(y / dx - round(y / dx)) < _ALIGN_TOL * max(1.0, y / dx) for y in jump_sizes(nu))


def default_x_max(nu: DislocationMeasure, c: float) -> float:
    # perturbations of the march grow like exp(nu(S) x / c); 8 e-folds of that scale
    return max(8.0 * c / total_rate(nu), 2.0 * max(jump_sizes(nu)))


def default_dx(nu: DislocationMeasure, x_max: float) -> float:
    if is_aligned(nu, LN2):
        return LN2 / 64
    return x_max / 4096


def kink_points(nu: DislocationMeasure) -> list[float]:
    """Where ``f'`` jumps (the jump sizes) and where ``f''`` jumps (their pairwise sums)."""
    ys = jump_sizes(nu)
    return sorted(set(ys) | {a + b for a in ys for b in ys})


def stencil_map(nu: DislocationMeasure, dx: float, n: int) -> dict[int, str]:
    """Difference stencil for nodes next to a kink; nodes not listed use central differences.

    ``"both"``: the kink sits on the node, so both one-sided residuals are taken.
    ``"forward"`` / ``"backward"``: the kink lies in the cell behind / ahead of the
    node, so the difference is taken on the other side.
    """
    out: dict[int, str] = {}
    for p in kink_points(nu):
        t = p / dx
        k = round(t)
        if abs(t - k) < 1e-6:
            if 0 < k < n:
                out[int(k)] = "both"
            continue
        i = math.floor(t)
        for node, side in ((i, "backward"), (i + 1, "forward")):
            if not 0 < node < n or out.get(node) == "both":
                continue
            # kinks on both sides of a node within one cell: no clean stencil left
            out[node] = side if out.get(node, side) == side else "central"
    return out


def kink_nodes(nu: DislocationMeasure, dx: float, n: int) -> list[int]:
    """Nodes whose difference stencils would straddle a kink."""
    return sorted(stencil_map(nu, dx, n))


class _Marcher:
    """Right-hand side ``g(x) = (nu(S) f(x) - sum_i w_i prod_n f(x - y_in)) / c`` on a grid."""

    def __init__(self, nu, c, dx):
        self.c = c
        self.m = total_rate(nu)
        self.terms = [(a.weight, [-ls / dx for ls in logs]) for a, logs in zip(nu.atoms, nu.log_sizes)]

    def rhs(self, vals, k, left):
        acc = self.m * vals[k]
        for w, offsets in self.terms:
            prod = 1.0
            for d in offsets:
                prod *= lookup(vals, k - d, left)
            acc -= w * prod
        return acc / self.c


def shoot(nu: DislocationMeasure, c: float, theta: float, dx: float, x_max: float,
          tail_tol: float = TAIL_TOL, plateau_tol: float = PLATEAU_TOL,
          corrector_steps: int = 2) -> ShootResult:
    """March ``f' = -L f / c`` from ``f(0) = theta`` with Heun's predictor-corrector.

    The march stops as soon as ``f`` goes negative, increases, or flattens
    (``f' >= -plateau_tol f (1 - f)``) while still above ``tail_tol``.  The
    classification is DECAYED if ``f`` fell below ``tail_tol`` before that,
    otherwise BELOW_ZERO or PLATEAU; ``direction`` records which way the
    trajectory finally went, which is what bisection uses.
    """
    if not 0.0 < theta < 1.0:
        raise ValidationError(f"theta must lie in (0, 1), got {theta!r}")
    n = int(round(x_max / dx)) + 1
    march = _Marcher(nu, c, dx)
    vals = [float(theta)]
    decayed = theta < tail_tol
    direction = 0
    half = 0.5 * dx
    for k in range(n - 1):
        g0 = march.rhs(vals, k, False)
        vals.append(vals[k] + dx * g0)
        for _ in range(corrector_steps):
            vals[k + 1] = vals[k] + half * (g0 + march.rhs(vals, k + 1, True))
        f_new = vals[k + 1]
        if f_new < 0.0:
            direction = -1
            break
        # turned back up, or went flat; the flatness test is relative to f (1 - f), since the
        # true wave is itself nearly flat where f is close to 1 or close to 0
        if f_new > vals[k] or (f_new >= tail_tol
                               and (f_new - vals[k]) / dx >= -plateau_tol * f_new * (1.0 - f_new)):
            direction = 1
            break
        if f_new < tail_tol:
            decayed = True
    if decayed:
        cls = Shot.DECAYED
    elif direction < 0:
        cls = Shot.BELOW_ZERO
    else:
        cls = Shot.PLATEAU
    return ShootResult(float(theta), np.array(vals), cls, direction, dx)


def _to_wave(shot: ShootResult, n: int, tail_tol: float) -> WaveGrid:
    vals = shot.values.copy()
    if shot.direction != 0:
        # drop the divergent final node; everything after it is the zero tail
        vals = vals[:-1]
    out = np.zeros(n)
    out[: len(vals)] = vals
    out = np.clip(np.minimum.accumulate(out), 0.0, 1.0)
    return WaveGrid(shot.dx, out, tail_tol)


_MAX_DOUBLINGS = 6
_THETA_FLOOR = 1e-9
_THETA_CEIL_GAP = 1e-13


class _Undecided(NumericalError):
    """Some probes reached x_max without choosing a direction."""


def _probe_thetas():
    return [0.1 * k for k in range(1, 10)]


def solve_wave(nu: DislocationMeasure, c: float, dx: float | None = None,
               x_max: float | None = None, tol: float = RESIDUAL_TOL,
               tail_tol: float = TAIL_TOL, plateau_tol: float = PLATEAU_TOL):
    """Solve for the one-sided travelling wave at speed ``c``.

    Returns ``(wave, report)``.  Raises :class:`SubcriticalSpeedError` when
    ``c <= c_pbar`` and :class:`NumericalError` when no decaying trajectory is
    bracketed or the residual exceeds ``tol``.  Without an explicit ``x_max``
    the domain is doubled (up to 6 times) while probe trajectories are still
    undecided at its end, which happens close to the critical speed.
    """
    c_bar = critical_speed(nu)
    if not c > c_bar:
        raise SubcriticalSpeedError(
            f"subcritical speed: c = {c:g} <= c_pbar = {c_bar:.6g}; no travelling wave exists")
    auto = x_max is None
    if auto:
        x_max = default_x_max(nu, c)
    if dx is None:
        dx = default_dx(nu, x_max)
    if not dx > 0 or not x_max > dx:
        raise ValidationError("solve_wave needs 0 < dx < x_max")
    for attempt in range(_MAX_DOUBLINGS + 1):
        n = int(round(x_max / dx)) + 1
        try:
            wave = _solve_on_grid(nu, c, dx, n, tail_tol, plateau_tol)
            break
        except _Undecided as exc:
            if not auto or attempt == _MAX_DOUBLINGS:
                raise NumericalError(f"{exc}; trajectories undecided at x_max = {x_max:g}, "
                                     "increase x_max") from None
            x_max *= 2.0
    report = residual_report(nu, c, wave)
    if report.max_abs_residual > tol:
        raise NumericalError(
            f"residual {report.max_abs_residual:.3e} exceeds tolerance {tol:g}; refine dx or align the grid")
    return wave, report


def _solve_on_grid(nu, c, dx, n, tail_tol, plateau_tol) -> WaveGrid:
    def fire(theta):
        return shoot(nu, c, theta, dx, (n - 1) * dx, tail_tol, plateau_tol)

    lo, hi = _bracket(fire)
    best = None
    for _ in range(200):
        mid = 0.5 * (lo.theta + hi.theta)
        if mid <= lo.theta or mid >= hi.theta:
            break
        s = fire(mid)
        if s.direction == lo.direction:
            lo = s
        elif s.direction == hi.direction:
            hi = s
        else:
            best = s
            break
    if best is None:
        best = max((lo, hi), key=lambda s: (s.classification is Shot.DECAYED, len(s.values)))
    if best.classification is not Shot.DECAYED:
        if best.direction == 0:
            raise _Undecided(f"bisection failed: trajectory (theta = {best.theta:.12g}) "
                             "neither decayed nor left the grid")
        raise NumericalError(
            f"bisection failed: best trajectory (theta = {best.theta:.12g}) is {best.classification.value}")
    return _to_wave(best, n, tail_tol)


def _bracket(fire):
    """Find adjacent probes whose trajectories leave in opposite directions.

    The orientation (which side dives) is read off the probes, not assumed.
    When all probes agree the probe set is extended towards 0 and 1.
    """
    shots = [fire(t) for t in _probe_thetas()]
    # near the critical speed 1 - theta becomes tiny, so the upper end is pushed much further
    while len({s.direction for s in shots}) == 1 and shots[0].direction != 0:
        low, high = shots[0].theta / 10, 1.0 - (1.0 - shots[-1].theta) / 10
        if low < _THETA_FLOOR and 1.0 - high < _THETA_CEIL_GAP:
            break
        if low >= _THETA_FLOOR:
            shots.insert(0, fire(low))
        if 1.0 - high >= _THETA_CEIL_GAP:
            shots.append(fire(high))
    for a, b in zip(shots, shots[1:]):
        if a.direction != b.direction and a.direction != 0 and b.direction != 0:
            return a, b
    dirs = ", ".join(f"{s.theta:.3g}:{s.direction:+d}" for s in shots)
    kind = _Undecided if any(s.direction == 0 for s in shots) else NumericalError
    raise kind(f"bisection failed: no change of direction among probes ({dirs})")


def residual_at(nu, c, f: WaveGrid, i: int, stencils=None) -> float:
    vals = f.values
    n = len(vals)
    if not 1 <= i <= n - 2:
        raise ValidationError("residuals are only defined at interior nodes")
    dx = f.dx
    x = i * dx
    if stencils is None:
        stencils = stencil_map(nu, dx, n)
    kind = stencils.get(i, "central")
    fwd = backward = None
    if kind in ("both", "forward") and i <= n - 3:
        fwd = (-3 * vals[i] + 4 * vals[i + 1] - vals[i + 2]) / (2 * dx)
    if kind in ("both", "backward") and i >= 2:
        backward = (3 * vals[i] - 4 * vals[i - 1] + vals[i - 2]) / (2 * dx)
    if kind == "both" and fwd is not None and backward is not None:
        r_plus = c * fwd + apply_L(nu, f, x, left=False)
        r_minus = c * backward + apply_L(nu, f, x, left=True)
        return r_plus if abs(r_plus) >= abs(r_minus) else r_minus
    if kind == "forward" and fwd is not None:
        return c * fwd + apply_L(nu, f, x)
    if kind == "backward" and backward is not None:
        return c * backward + apply_L(nu, f, x)
    return c * (vals[i + 1] - vals[i - 1]) / (2 * dx) + apply_L(nu, f, x)


def residual(nu: DislocationMeasure, c: float, f: WaveGrid, x: float) -> float:
    """``c f'(x) + L f(x)`` at an interior grid node ``x``."""
    t = x / f.dx
    i = int(round(t))
    if abs(t - i) > 1e-9:
        raise ValidationError(f"x = {x} is not a grid node")
    return residual_at(nu, c, f, i)


def residual_report(nu: DislocationMeasure, c: float, f: WaveGrid) -> ResidualReport:
    n = len(f.values)
    stencils = stencil_map(nu, f.dx, n)
    idx = np.arange(1, n - 1)
    r = np.array([residual_at(nu, c, f, int(i), stencils) for i in idx])
    return ResidualReport(idx * f.dx, r, float(np.max(np.abs(r))) if len(r) else 0.0, f.dx,
                          tuple(sorted(stencils)))


def max_second_difference(nu: DislocationMeasure, f: WaveGrid) -> float:
    """``max |f(x+dx) - 2 f(x) + f(x-dx)| / dx^2`` away from kink nodes and the tail cut."""
    v = f.values
    d2 = np.abs(v[2:] - 2 * v[1:-1] + v[:-2]) / f.dx ** 2
    skip = set()
    for k in kink_nodes(nu, f.dx, len(v)):
        skip.add(k)
    mask = np.array([(i not in skip) and v[i + 1] > 0.0 for i in range(1, len(v) - 1)])
    return float(d2[mask].max()) if mask.any() else 0.0


@dataclass(frozen=True)
class CrossRow:
    x: float
    f_solver: float
    phi_mc: float
    se: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class CrossValidation:
    c: float
    rows: tuple
    estimates: tuple = field(repr=False, default=())

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def cross_validate(nu: DislocationMeasure, c: float, points: Sequence[float],
                   n_trials: int = 4000, horizon: float = 50.0, block_cap: int = 500,
                   master_seed: int = DEFAULT_SEED, grid_tol: float = GRID_TOL,
                   wave: WaveGrid | None = None, workers: int = 1) -> CrossValidation:
    """Compare the solved wave with Monte Carlo extinction probabilities.

    A point passes when ``|f(x) - phi_mc(x)| <= 3 SE + grid_tol``.  At ``x = 0``
    the right limit ``f(0+)`` is used.
    """
    if wave is None:
        wave, _ = solve_wave(nu, c)
    rows, ests = [], []
    for x in points:
        est = estimate_extinction(nu, x, c, horizon, block_cap, n_trials, master_seed, workers)
        fx = eval_wave(wave, x)
        tol = 3 * est.std_error + grid_tol
        rows.append(CrossRow(float(x), fx, est.point, est.std_error, tol, abs(fx - est.point) <= tol))
        ests.append(est)
    return CrossValidation(float(c), tuple(rows), tuple(ests))


def phase_scan(nu: DislocationMeasure, x: float, c_values: Sequence[float], n_trials: int = 1000,
               horizon: float = 50.0, block_cap: int = 500, master_seed: int = DEFAULT_SEED,
               workers: int = 1) -> list[tuple[float, ExtinctionEstimate]]:
    """Extinction probability estimates ``phi_hat(x)`` along a list of speeds."""
    return [(float(c), estimate_extinction(nu, x, c, horizon, block_cap, n_trials, master_seed, workers))
            for c in c_values]
