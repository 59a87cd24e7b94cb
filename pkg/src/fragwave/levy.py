"""The tagged fragment as a spectrally negative Levy process.

Following one fragment chosen by size-biased picking, ``xi(t) = -ln|B(t)|`` is a
compound Poisson subordinator (jump ``-ln s`` at rate ``w * s``) killed at rate
``Phi(0)``.  ``X(t) = c t - xi(t)`` then has bounded variation and its scale
function ``W`` solves a renewal (Volterra) equation with a step-function kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .dislocation import DislocationMeasure, killing_rate, phi, phi_prime
from .errors import NumericalError, ValidationError
from .simulator import EstimateCI
from .streams import DEFAULT_SEED, check_seed, map_trials, trial_stream

_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class SubordinatorLaw:
    """Jump sizes ``y > 0`` (ascending) with their rates, plus the killing rate."""

    sizes: np.ndarray
    rates: np.ndarray
    killing: float

    @property
    def jump_rate(self) -> float:
        return float(self.rates.sum())

    def laplace_exponent(self, p):
        """``k + sum r (1 - exp(-p y))``; equals ``Phi(p)``."""
        p = np.asarray(p, dtype=float)
        terms = self.rates * -np.expm1(-np.multiply.outer(p, self.sizes))
        return self.killing + terms.sum(axis=-1)

    def tail(self, z: float) -> float:
        """``H(z) = k + (rate of jumps larger than z)``, right-continuous."""
        return self.killing + float(self.rates[self.sizes > z].sum())


def tagged_law(nu: DislocationMeasure) -> SubordinatorLaw:
    pairs = {}
    for atom in nu.atoms:
        for s in atom.fragments:
            y = -math.log(s)
            key = next((k for k in pairs if abs(k - y) <= _MERGE_TOL * max(1.0, y)), y)
            pairs[key] = pairs.get(key, 0.0) + atom.weight * s
    sizes = np.array(sorted(pairs))
    rates = np.array([pairs[y] for y in sizes])
    return SubordinatorLaw(sizes, rates, killing_rate(nu))


def laplace_exponent_psi(nu: DislocationMeasure, c: float, beta):
    """``psi(beta) = c beta - Phi(beta)``, the Laplace exponent of ``X(1)``."""
    if np.any(np.asarray(beta) < 0):
        raise ValidationError("psi is evaluated for beta >= 0 only")
    return c * beta - phi(nu, beta)


def psi_largest_root(nu: DislocationMeasure, c: float) -> float:
    """``Psi(0)``: the largest zero of ``psi`` on ``[0, inf)``."""
    psi = lambda b: c * b - phi(nu, b)
    # psi is convex; its minimiser is where Phi'(b) = c
    if phi_prime(nu, 0.0) <= c:
        b_min = 0.0
    else:
        hi = 1.0
        while phi_prime(nu, hi) > c:
            hi *= 2.0
        b_min = brentq(lambda b: phi_prime(nu, b) - c, 0.0, hi)
    if psi(b_min) >= 0.0:
        # only possible when psi(0) = 0 and psi is increasing from 0
        return b_min
    hi = max(1.0, 2 * b_min)
    while psi(hi) <= 0.0:
        hi *= 2.0
    return brentq(psi, b_min, hi, xtol=1e-14)


@dataclass(frozen=True)
class ScaleTable:
    c: float
    dx: float
    values: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(len(self.values))

    @property
    def x_max(self) -> float:
        return self.dx * (len(self.values) - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.x_max * (1 + 1e-12)):
            raise ValidationError(f"scale table covers [0, {self.x_max}], got {x}")
        out = np.interp(x, self.x, self.values)
        return float(out) if out.ndim == 0 else out


def _integral(W, I, dx, z, n):
    """Exact integral of the piecewise-linear W over [0, z] for z <= x_n.

    Returns ``(known, coef)`` with the integral equal to ``known + coef * W[n]``
    (``coef`` is nonzero only when ``z`` falls in the last, still unknown, cell).
    """
    if z <= 0.0:
        return 0.0, 0.0
    t = z / dx
    i = int(t)
    if t - i < 1e-12:
        return I[i], 0.0
    if i >= n:
        i = n - 1
    s = z - i * dx
    a = s * s / (2.0 * dx)
    if i == n - 1:
        return I[i] + s * W[i] - a * W[i], a
    return I[i] + s * W[i] + a * (W[i + 1] - W[i]), 0.0


def scale_function(nu: DislocationMeasure, c: float, x_max: float = 10.0,
                   dx: float = 2.0 ** -8) -> ScaleTable:
    """Scale function ``W`` on ``[0, x_max]``.

    Solves ``c W(x) = 1 + int_0^x H(x - y) W(y) dy`` by forward substitution,
    integrating the step kernel exactly against piecewise-linear ``W``
    (trapezoidal in the cumulative integral).  ``W(0) = 1/c`` is the first node.
    """
    if not c > 0 or not dx > 0 or not x_max > 0:
        raise ValidationError("scale_function needs c > 0, dx > 0 and x_max > 0")
    law = tagged_law(nu)
    n_nodes = int(math.ceil(x_max / dx - 1e-9)) + 1
    W = np.zeros(n_nodes)
    I = np.zeros(n_nodes)
    W[0] = 1.0 / c
    total = law.killing + law.jump_rate
    ys, rs = law.sizes.tolist(), law.rates.tolist()
    for n in range(1, n_nodes):
        xn = n * dx
        rhs = 1.0 + total * (I[n - 1] + 0.5 * dx * W[n - 1])
        lhs = c - total * 0.5 * dx
        for y, r in zip(ys, rs):
            known, coef = _integral(W, I, dx, xn - y, n)
            rhs -= r * known
            lhs += r * coef
        W[n] = rhs / lhs
        I[n] = I[n - 1] + 0.5 * dx * (W[n - 1] + W[n])
    if np.any(np.diff(W) <= 0.0):
        raise NumericalError("scale function lost monotonicity; reduce dx")
    return ScaleTable(float(c), float(dx), W)


def laplace_transform(table: ScaleTable, beta: float, growth: float = 0.0) -> float:
    """``int_0^inf exp(-beta x) W(x) dx`` from the table.

    The table part is integrated exactly for piecewise-linear ``W``; beyond
    ``x_max``, ``W`` is continued as ``W(x_max) exp(growth (x - x_max))``.
    """
    x, w = table.x, table.values
    h = table.dx
    a, b = x[:-1], x[1:]
    wa, wb = w[:-1], w[1:]
    slope = (wb - wa) / h
    ea, eb = np.exp(-beta * a), np.exp(-beta * b)
    # int_a^b e^{-beta x} (wa + slope (x - a)) dx
    part = (wa * ea - wb * eb) / beta + slope * (ea - eb) / beta ** 2
    tail = w[-1] * math.exp(-beta * x[-1]) / (beta - growth)
    return float(part.sum() + tail)


def two_sided_exit(nu: DislocationMeasure, c: float, x: float, h: float,
                   table: ScaleTable | None = None, dx: float = 2.0 ** -8) -> float:
    """``P_x(reach x + h before going below 0 or being killed) = W(x) / W(x + h)``."""
    if x < 0 or h < 0:
        raise ValidationError("two_sided_exit needs x >= 0 and h >= 0")
    if table is None:
        table = scale_function(nu, c, x_max=x + h + dx, dx=dx)
    if x + h > table.x_max * (1 + 1e-12):
        raise ValidationError(f"x + h = {x + h} lies beyond the scale table (x_max = {table.x_max})")
    if h == 0:
        return 1.0
    return table(x) / table(x + h)


def _passage_chunk(start, stop, sizes, rates, killing, c, x, h, seed):
    total = killing + sum(rates)
    cum = np.cumsum([killing] + list(rates)).tolist()
    target = x + h
    out = []
    for i in range(start, stop):
        rng = trial_stream(seed, i)
        pos = x
        ok = True
        while pos < target:
            if total == 0.0:
                break
            dt = -math.log1p(-rng.random()) / total
            if c * dt >= target - pos:
                break
            pos += c * dt
            u = rng.random() * total
            if u < cum[0]:
                ok = False
                break
            j = 0
            while j < len(sizes) - 1 and u >= cum[j + 1]:
                j += 1
            pos -= sizes[j]
            if pos < 0.0:
                ok = False
                break
        out.append(ok)
    return out


def mc_first_passage(nu: DislocationMeasure, c: float, x: float, h: float,
                     n_trials: int = 100_000, master_seed: int = DEFAULT_SEED,
                     workers: int = 1) -> EstimateCI:
    """Monte Carlo estimate of the two-sided exit probability along tagged paths."""
    if x < 0 or h < 0 or not c > 0:
        raise ValidationError("mc_first_passage needs x >= 0, h >= 0 and c > 0")
    if n_trials < 1:
        raise ValidationError("n_trials must be >= 1")
    law = tagged_law(nu)
    seed = check_seed(master_seed)
    hits = map_trials(_passage_chunk, n_trials,
                      (law.sizes.tolist(), law.rates.tolist(), law.killing, c, x, h, seed),
                      workers, chunk=5000)
    return EstimateCI.binomial(sum(hits), n_trials)
