"""The acceptance battery: eight end-to-end checks on two reference measures.

``Battery(budget="full")`` runs every check at its stated Monte Carlo budget;
``budget="quick"`` divides trial counts (and the event-count floor) by 4 for a
smoke run.  Expensive simulations are cached on the battery so that the
block-count check can audit every event simulated by the other checks.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dislocation import (DislocationMeasure, binary, critical_exponent, critical_speed, phi,
                          phi_prime)
from .fkpp import LN2, cross_validate, residual_report, solve_wave
from .levy import (laplace_exponent_psi, laplace_transform, mc_first_passage, psi_largest_root,
                   scale_function, two_sided_exit)
from .simulator import estimate_extinction, martingale_check
from .streams import DEFAULT_SEED
from .wave import WaveGrid, eval_wave

POINTS = (0.5, 1.0, 2.0)
MARTINGALE_TIMES = (0.0, 1.0, 2.0, 4.0)
BUDGETS = {"full": 1, "quick": 4}


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] criterion {self.number}: {self.name} ({self.seconds:.1f}s) {self.detail}"


def reference_measures() -> dict:
    """The two test models and the speed each is exercised at."""
    cons = binary()
    diss = DislocationMeasure([(1.0, (0.5, 0.25))], name="half-quarter")
    return {"binary-half": (cons, 1.0), "half-quarter": (diss, 2.0 * critical_speed(diss))}


class Battery:
    def __init__(self, budget: str = "full", seed: int = DEFAULT_SEED, workers: int = 1):
        if budget not in BUDGETS:
            raise ValueError(f"budget must be one of {sorted(BUDGETS)}")
        self.budget = budget
        self.div = BUDGETS[budget]
        self.seed = seed
        self.workers = workers
        self.models = reference_measures()
        self._timing = {}

    def trials(self, n: int) -> int:
        return max(50, n // self.div)

    def _timed(self, key, func):
        t0 = time.perf_counter()
        out = func()
        self._timing[key] = self._timing.get(key, 0.0) + time.perf_counter() - t0
        return out

    # cached heavy computations -------------------------------------------------

    @cached_property
    def waves(self) -> dict:
        return self._timed("waves", lambda: {
            name: solve_wave(nu, c) for name, (nu, c) in self.models.items()})

    @cached_property
    def cross(self) -> dict:
        def run():
            return {name: cross_validate(nu, c, POINTS, n_trials=self.trials(4000), horizon=50.0,
                                         block_cap=500, master_seed=self.seed,
                                         wave=self.waves[name][0], workers=self.workers)
                    for name, (nu, c) in self.models.items()}
        return self._timed("cross", run)

    @cached_property
    def phase(self) -> tuple:
        nu, _ = self.models["binary-half"]
        cb = critical_speed(nu)
        n = self.trials(2000)
        return self._timed("phase", lambda: (
            estimate_extinction(nu, 1.0, 0.5 * cb, horizon=100.0, block_cap=500, n_trials=n,
                                master_seed=self.seed, workers=self.workers),
            estimate_extinction(nu, 1.0, 3.0 * cb, horizon=50.0, block_cap=500, n_trials=n,
                                master_seed=self.seed, workers=self.workers)))

    @cached_property
    def truncation(self) -> tuple:
        nu, c = self.models["binary-half"]
        n = self.trials(4000)
        return self._timed("truncation", lambda: tuple(
            estimate_extinction(nu, 1.0, c, horizon=h, block_cap=cap, n_trials=n,
                                master_seed=self.seed + 1, workers=self.workers)
            for h, cap in ((50.0, 500), (100.0, 1000))))

    # criteria ------------------------------------------------------------------

    def criterion_1(self) -> CriterionResult:
        t0 = time.perf_counter()
        nu, _ = self.models["binary-half"]
        pbar = critical_exponent(nu)
        cbar = critical_speed(nu)
        g = (1 + pbar) * phi_prime(nu, pbar) - phi(nu, pbar)
        ok = abs(g) < 1e-10 and abs(pbar - 1.421) <= 0.005 and abs(cbar - 0.2589) <= 0.001
        worst_p = worst_c = 0.0
        for m in (0.5, 2.0, 10.0):
            mnu = nu.scaled(m)
            worst_p = max(worst_p, abs(critical_exponent(mnu) - pbar))
            worst_c = max(worst_c, abs(critical_speed(mnu) - m * cbar))
        ok = ok and worst_p < 1e-8 and worst_c < 1e-8
        dt = time.perf_counter() - t0
        return CriterionResult(1, "critical-speed calculus", ok and dt < 1.0,
                               f"p_bar={pbar:.8f} c_pbar={cbar:.8f} |g|={abs(g):.1e} "
                               f"scaling dp={worst_p:.1e} dc={worst_c:.1e}", dt)

    def criterion_2(self) -> CriterionResult:
        cross = self.cross
        dt = self._timing["cross"] + self._timing["waves"]
        parts, ok = [], True
        for name, cv in cross.items():
            for r in cv.rows:
                ok &= r.passed
                parts.append(f"{name}@{r.x:g}: f={r.f_solver:.4f} mc={r.phi_mc:.4f}"
                             f"+-{r.se:.4f} tol={r.tolerance:.4f}")
        return CriterionResult(2, "wave-extinction agreement", ok and dt < 180.0,
                               "; ".join(parts), dt)

    def criterion_3(self) -> CriterionResult:
        t0 = time.perf_counter()
        parts, ok = [], True
        for name, (nu, c) in self.models.items():
            wave, rep = self.waves[name]
            _, fine = solve_wave(nu, c, dx=wave.dx / 2, x_max=wave.x_max)
            ratio = rep.max_abs_residual / fine.max_abs_residual
            ok &= rep.max_abs_residual <= 1e-3 and ratio >= 2.0
            parts.append(f"{name}: max|r|={rep.max_abs_residual:.2e} halved={fine.max_abs_residual:.2e} "
                         f"ratio={ratio:.2f}")
        dt = time.perf_counter() - t0 + self._timing.get("waves", 0.0)
        return CriterionResult(3, "travelling-wave residual", ok and dt < 30.0, "; ".join(parts), dt)

    def criterion_4(self) -> CriterionResult:
        low, high = self.phase
        dt = self._timing["phase"]
        ok = low.point >= 0.99 and high.point <= 0.95
        return CriterionResult(4, "phase transition", ok and dt < 120.0,
                               f"phi(1) at 0.5 c_pbar = {low.point:.4f}; at 3 c_pbar = {high.point:.4f}",
                               dt)

    def criterion_5(self) -> CriterionResult:
        a, b = self.truncation
        dt = self._timing["truncation"]
        pooled = math.sqrt(a.std_error ** 2 + b.std_error ** 2)
        diff = abs(a.point - b.point)
        return CriterionResult(5, "truncation robustness", diff < 3 * pooled and dt < 180.0,
                               f"(50,500): {a.point:.4f}  (100,1000): {b.point:.4f}  "
                               f"|diff|={diff:.4f} < 3*pooled SE={3 * pooled:.4f}", dt)

    def criterion_6(self) -> CriterionResult:
        t0 = time.perf_counter()
        ests = [e for cv in self.cross.values() for e in cv.estimates]
        ests += list(self.phase) + list(self.truncation)
        events = sum(e.total_events for e in ests)
        bad = sum(e.bound_violations for e in ests)
        floor = 1_000_000 // self.div
        dt = time.perf_counter() - t0
        return CriterionResult(6, "block-count bound N_t <= exp(x+ct)", bad == 0 and events >= floor,
                               f"{events} events audited, {bad} violations (floor {floor})", dt)

    def criterion_7(self) -> CriterionResult:
        t0 = time.perf_counter()
        nu, c = self.models["binary-half"]
        wave, _ = self.waves["binary-half"]
        n = self.trials(4000)
        rep = martingale_check(nu, 1.0, c, wave, MARTINGALE_TIMES, n_trials=n,
                               master_seed=self.seed + 2, workers=self.workers)
        target = eval_wave(wave, 1.0)
        flat = all(abs(e.point - target) <= 3 * e.std_error for e in rep.estimates)
        zero = WaveGrid(wave.dx, np.zeros_like(wave.values))
        ctl = martingale_check(nu, 1.0, c, zero, MARTINGALE_TIMES, n_trials=n,
                               master_seed=self.seed + 2, workers=self.workers)
        means = [e.point for e in ctl.estimates]
        increasing = all(b > a for a, b in zip(means, means[1:]))
        dt = time.perf_counter() - t0
        detail = ("E[Z_t]=" + ", ".join(f"{e.point:.4f}+-{e.std_error:.4f}" for e in rep.estimates)
                  + f" vs f(1)={target:.4f}; control means=" + ", ".join(f"{m:.4f}" for m in means))
        return CriterionResult(7, "product-martingale flatness", flat and increasing and dt < 120.0,
                               detail, dt)

    def criterion_8(self) -> CriterionResult:
        t0 = time.perf_counter()
        parts, ok = [], True
        for name, (nu, c) in self.models.items():
            coarse = scale_function(nu, c, x_max=12.0)
            fine = scale_function(nu, c, x_max=12.0, dx=coarse.dx / 2)
            w0 = max(abs(coarse.values[0] - 1 / c), abs(fine.values[0] - 1 / c))
            exact = two_sided_exit(nu, c, 1.0, 1.0, table=fine)
            mc = mc_first_passage(nu, c, 1.0, 1.0, n_trials=max(1000, 100_000 // self.div),
                                  master_seed=self.seed + 3, workers=self.workers)
            growth = psi_largest_root(nu, c)
            lap = []
            for beta in (growth + 1.0, growth + 3.0):
                rel = abs(laplace_transform(fine, beta, growth) * laplace_exponent_psi(nu, c, beta) - 1)
                lap.append(rel)
            ok &= w0 < 1e-6 and abs(exact - mc.point) <= 3 * mc.std_error and max(lap) < 0.01
            parts.append(f"{name}: |W(0)-1/c|={w0:.1e} exit={exact:.4f} mc={mc.point:.4f}"
                         f"+-{mc.std_error:.4f} laplace rel err={max(lap):.1e}")
        dt = time.perf_counter() - t0
        return CriterionResult(8, "scale function and exit probabilities", ok and dt < 60.0,
                               "; ".join(parts), dt)

    def run(self, echo=None) -> list[CriterionResult]:
        out = []
        for k in range(1, 9):
            res = getattr(self, f"criterion_{k}")()
            if echo is not None:
                echo(res.line())
            out.append(res)
        return out


def run_acceptance(budget: str = "full", seed: int = DEFAULT_SEED, workers: int = 1,
                   echo=print) -> list[CriterionResult]:
    return Battery(budget, seed, workers).run(echo)


__all__ = ["Battery", "CriterionResult", "run_acceptance", "reference_measures", "LN2"]
