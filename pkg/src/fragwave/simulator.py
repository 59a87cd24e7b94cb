"""Monte Carlo of a homogeneous fragmentation killed below ``exp(-(x + c t))``.

Every alive block fragments at rate ``nu(S)``, so the whole population is driven
by one exponential clock of rate ``nu(S) * N`` and the fragmenting block is
picked uniformly.  A child is killed at creation when its log-size is strictly
below the barrier ``-(x + c t)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .dislocation import DislocationMeasure, sample_atom_index, total_rate
from .errors import PopulationExtinct, ValidationError
from .streams import DEFAULT_SEED, check_seed, map_trials, trial_stream
from .wave import WaveGrid, eval_wave

Z99 = 2.5758293035489004
# relative slack for the N_t <= exp(x + c t) check; the bound is exact in real arithmetic
_BOUND_SLACK = 1e-9


@dataclass
class Block:
    log_size: float
    created_at: float = 0.0


@dataclass
class Population:
    """State of one killed fragmentation.

    ``alive`` holds the log-sizes of the alive blocks (order is irrelevant);
    ``created`` their creation times, kept in the same order.
    """

    x: float
    c: float
    time: float = 0.0
    alive: list = field(default_factory=lambda: [0.0])
    created: list = field(default_factory=lambda: [0.0])
    events: int = 0
    peak: int = 1
    bound_violations: int = 0

    @classmethod
    def root(cls, x: float, c: float) -> "Population":
        _check_xc(x, c)
        return cls(x=float(x), c=float(c))

    @property
    def size(self) -> int:
        return len(self.alive)

    @property
    def barrier(self) -> float:
        """Current killing level for log-sizes, ``-(x + c t)``."""
        return -(self.x + self.c * self.time)

    def blocks(self) -> list[Block]:
        return [Block(s, t) for s, t in zip(self.alive, self.created)]

    def mass(self) -> float:
        return math.fsum(math.exp(s) for s in self.alive)

    def positions(self) -> np.ndarray:
        """Barrier-relative positions ``x + c t + log|B|`` of the alive blocks."""
        return self.x + self.c * self.time + np.asarray(self.alive, dtype=float)


class StepRecord(NamedTuple):
    time: float
    created: int
    killed: int


class Outcome(enum.Enum):
    EXTINCT = "extinct"
    SURVIVED_HORIZON = "survived_horizon"
    SURVIVED_CAP = "survived_cap"


@dataclass(frozen=True)
class TrialResult:
    outcome: Outcome
    extinction_time: float | None
    peak_blocks: int
    events: int
    final_blocks: int = 0
    bound_violations: int = 0

    @property
    def extinct(self) -> bool:
        return self.outcome is Outcome.EXTINCT


@dataclass(frozen=True)
class EstimateCI:
    """Monte Carlo estimate with a normal-approximation 99% interval clamped to [0, 1]."""

    point: float
    std_error: float
    n_trials: int
    ci_low: float
    ci_high: float

    @classmethod
    def from_mean(cls, point: float, std_error: float, n: int) -> "EstimateCI":
        lo = min(point, max(0.0, point - Z99 * std_error))
        hi = max(point, min(1.0, point + Z99 * std_error))
        return cls(point, std_error, n, lo, hi)

    @classmethod
    def binomial(cls, successes: int, n: int) -> "EstimateCI":
        p = successes / n
        return cls.from_mean(p, math.sqrt(p * (1.0 - p) / n), n)

    @classmethod
    def from_samples(cls, samples) -> "EstimateCI":
        s = np.asarray(samples, dtype=float)
        n = len(s)
        se = float(s.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls.from_mean(float(s.mean()), se, n)


@dataclass(frozen=True)
class ExtinctionEstimate(EstimateCI):
    n_extinct: int = 0
    n_survived_horizon: int = 0
    n_survived_cap: int = 0
    ambiguous: int = 0
    total_events: int = 0
    bound_violations: int = 0
    trials: tuple = field(default=(), repr=False, compare=False)


def _check_xc(x, c):
    if not x >= 0.0:
        raise ValidationError(f"initial headroom x must be >= 0 (phi(x) = 1 for x < 0), got {x!r}")
    # c = 0 (a static barrier) is allowed: it is the simplest subcritical case
    if not c >= 0.0:
        raise ValidationError(f"barrier slope c must be >= 0, got {c!r}")


def step(pop: Population, nu: DislocationMeasure, rng, until: float = math.inf) -> StepRecord | None:
    """Apply the next fragmentation event to ``pop``.

    If the event would happen after ``until`` the clock is advanced to ``until``
    and None is returned (legitimate by memorylessness).
    """
    n = len(pop.alive)
    if n == 0:
        raise PopulationExtinct("population extinct")
    t = pop.time - math.log1p(-rng.random()) / (total_rate(nu) * n)
    if t > until:
        pop.time = until
        return None
    pop.time = t
    j = int(rng.random() * n)
    if j >= n:
        j = n - 1
    parent = pop.alive[j]
    pop.alive[j] = pop.alive[-1]
    pop.alive.pop()
    pop.created[j] = pop.created[-1]
    pop.created.pop()
    barrier = -(pop.x + pop.c * t)
    made = killed = 0
    for ls in nu.log_sizes[sample_atom_index(nu, rng)]:
        child = parent + ls
        # equality with the barrier survives: killing needs a strict inequality
        if child >= barrier:
            pop.alive.append(child)
            pop.created.append(t)
            made += 1
        else:
            killed += 1
    pop.events += 1
    n = len(pop.alive)
    if n > pop.peak:
        pop.peak = n
    if n > math.exp(pop.x + pop.c * t) * (1.0 + _BOUND_SLACK):
        pop.bound_violations += 1
    return StepRecord(t, made, killed)


def advance(pop: Population, nu: DislocationMeasure, rng, until: float = math.inf,
            block_cap: int | None = None) -> str:
    """Apply events until extinction, time ``until`` or more than ``block_cap`` blocks.

    Equivalent to calling :func:`step` repeatedly (same random draws in the same
    order) but with the per-event overhead hoisted out of the loop.  Returns
    ``"extinct"``, ``"until"`` or ``"cap"``.
    """
    rand = rng.random
    log1p, exp = math.log1p, math.exp
    alive, created = pop.alive, pop.created
    rate = total_rate(nu)
    logs = nu.log_sizes
    single = logs[0] if len(logs) == 1 else None
    x, c = pop.x, pop.c
    cap = math.inf if block_cap is None else block_cap
    t = pop.time
    events, peak, bad = pop.events, pop.peak, pop.bound_violations
    n = len(alive)
    status = "extinct"
    while n:
        t_next = t - log1p(-rand()) / (rate * n)
        if t_next > until:
            t = until
            status = "until"
            break
        t = t_next
        j = int(rand() * n)
        if j >= n:
            j = n - 1
        parent = alive[j]
        alive[j] = alive[-1]
        alive.pop()
        created[j] = created[-1]
        created.pop()
        barrier = -(x + c * t)
        for ls in (single if single is not None else logs[sample_atom_index(nu, rng)]):
            child = parent + ls
            if child >= barrier:
                alive.append(child)
                created.append(t)
        events += 1
        n = len(alive)
        if n > peak:
            peak = n
        if n > exp(x + c * t) * (1.0 + _BOUND_SLACK):
            bad += 1
        if n > cap:
            status = "cap"
            break
    pop.time, pop.events, pop.peak, pop.bound_violations = t, events, peak, bad
    return status


def run_trial(nu: DislocationMeasure, x: float, c: float, horizon: float = 50.0,
              block_cap: int = 500, rng=None) -> TrialResult:
    """Run one killed fragmentation until extinction, ``horizon`` or ``block_cap``."""
    _check_xc(x, c)
    if not horizon > 0:
        raise ValidationError("horizon must be > 0")
    if block_cap < 1:
        raise ValidationError("block_cap must be >= 1")
    if rng is None:
        rng = trial_stream(DEFAULT_SEED, 0)
    pop = Population.root(x, c)
    status = advance(pop, nu, rng, until=horizon, block_cap=block_cap)
    if status == "extinct":
        return TrialResult(Outcome.EXTINCT, pop.time, pop.peak, pop.events, 0,
                           pop.bound_violations)
    outcome = Outcome.SURVIVED_CAP if status == "cap" else Outcome.SURVIVED_HORIZON
    return TrialResult(outcome, None, pop.peak, pop.events, len(pop.alive), pop.bound_violations)


def _trial_chunk(start, stop, nu, x, c, horizon, block_cap, seed):
    return [run_trial(nu, x, c, horizon, block_cap, trial_stream(seed, i))
            for i in range(start, stop)]


def run_trials(nu, x, c, horizon=50.0, block_cap=500, n_trials=1000,
               master_seed=DEFAULT_SEED, workers=1) -> list[TrialResult]:
    _check_xc(x, c)
    if n_trials < 1:
        raise ValidationError("n_trials must be >= 1")
    seed = check_seed(master_seed)
    return map_trials(_trial_chunk, n_trials, (nu, x, c, horizon, block_cap, seed), workers)


def summarize(results: Sequence[TrialResult], ambiguous_below: int = 10) -> ExtinctionEstimate:
    """Aggregate trials into an extinction estimate.

    Survival at the horizon with fewer than ``ambiguous_below`` alive blocks is
    counted as ambiguous: those trials are where truncation can bias the estimate.
    """
    n = len(results)
    ext = sum(r.outcome is Outcome.EXTINCT for r in results)
    hor = sum(r.outcome is Outcome.SURVIVED_HORIZON for r in results)
    base = EstimateCI.binomial(ext, n)
    return ExtinctionEstimate(
        base.point, base.std_error, n, base.ci_low, base.ci_high,
        n_extinct=ext, n_survived_horizon=hor, n_survived_cap=n - ext - hor,
        ambiguous=sum(r.outcome is Outcome.SURVIVED_HORIZON and r.final_blocks < ambiguous_below
                      for r in results),
        total_events=sum(r.events for r in results),
        bound_violations=sum(r.bound_violations for r in results),
        trials=tuple(results),
    )


def estimate_extinction(nu: DislocationMeasure, x: float, c: float, horizon: float = 50.0,
                        block_cap: int = 500, n_trials: int = 1000,
                        master_seed: int = DEFAULT_SEED, workers: int = 1) -> ExtinctionEstimate:
    """Estimate ``phi(x) = P(extinction)``; both kinds of truncation count as survival."""
    return summarize(run_trials(nu, x, c, horizon, block_cap, n_trials, master_seed, workers))


def empirical_product_value(pop: Population, f: WaveGrid) -> float:
    """``prod_n f(x + c t + log|B_n|)`` over alive blocks; 1 for an empty population."""
    shift = pop.x + pop.c * pop.time
    z = 1.0
    for ls in pop.alive:
        z *= eval_wave(f, shift + ls)
        if z == 0.0:
            break
    return z


@dataclass(frozen=True)
class MartingaleReport:
    times: tuple
    estimates: tuple
    capped: tuple
    samples: np.ndarray = field(repr=False, compare=False)


def _martingale_chunk(start, stop, nu, x, c, f, times, block_cap, seed):
    rows = []
    for i in range(start, stop):
        rng = trial_stream(seed, i)
        pop = Population.root(x, c)
        vals, flags = [], []
        frozen = None
        for t in times:
            if frozen is None and advance(pop, nu, rng, until=t, block_cap=block_cap) == "cap":
                frozen = empirical_product_value(pop, f)
            if frozen is not None:
                vals.append(frozen)
                flags.append(True)
            else:
                vals.append(empirical_product_value(pop, f))
                flags.append(False)
        rows.append((vals, flags))
    return rows


def martingale_check(nu: DislocationMeasure, x: float, c: float, f: WaveGrid,
                     times: Sequence[float], n_trials: int = 4000, master_seed: int = DEFAULT_SEED,
                     block_cap: int = 500, workers: int = 1) -> MartingaleReport:
    """Monte Carlo means of ``Z_t = prod f(X_n(t))`` at the requested times.

    Trials whose population exceeds ``block_cap`` keep their value at the cap
    time and are counted in ``capped``.
    """
    _check_xc(x, c)
    times = tuple(float(t) for t in times)
    if not times or any(b <= a for a, b in zip(times, times[1:])) or times[0] < 0:
        raise ValidationError("times must be a nonempty increasing list of nonnegative numbers")
    seed = check_seed(master_seed)
    rows = map_trials(_martingale_chunk, n_trials, (nu, x, c, f, times, block_cap, seed), workers)
    samples = np.array([r[0] for r in rows])
    flags = np.array([r[1] for r in rows], dtype=bool)
    ests = tuple(EstimateCI.from_samples(samples[:, k]) for k in range(len(times)))
    return MartingaleReport(times, ests, tuple(int(v) for v in flags.sum(axis=0)), samples)
