"""Finite dislocation measures and the Phi-calculus.

A dislocation measure is stored as a finite list of atoms ``(weight, fragments)``
where ``fragments`` is a ranked vector of mass fractions.  Everything the rest of
the package needs (the Laplace exponent ``Phi``, the critical exponent ``p_bar``
and the critical speed ``c_pbar``) has a closed form for such measures.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from .errors import NumericalError, ValidationError

SIZE_TOL = 1e-12
P_WINDOW = (-1.0 + 1e-6, 64.0)
G_TOL = 1e-10


@dataclass(frozen=True)
class FragmentVector:
    """Ranked fragment sizes ``s_1 >= s_2 >= ... > 0`` with ``sum(s) <= 1``."""

    sizes: tuple[float, ...]

    def __post_init__(self):
        sizes = tuple(float(s) for s in self.sizes)
        if len(sizes) < 2:
            raise ValidationError(
                "an atom needs at least two fragments (assumption nu(s_2=0)=0 violated)")
        for s in sizes:
            if not math.isfinite(s) or s <= 0.0:
                raise ValidationError(f"fragment sizes must be positive, got {s!r}")
        for a, b in zip(sizes, sizes[1:]):
            if b > a + SIZE_TOL:
                raise ValidationError(f"fragment sizes must be nonincreasing, got {sizes}")
        if sizes[0] >= 1.0:
            raise ValidationError(
                "largest fragment must be < 1 (assumption nu({(1,0,...)})=0 violated)")
        total = math.fsum(sizes)
        if total > 1.0 + SIZE_TOL:
            raise ValidationError(f"fragment sizes sum to {total!r} > 1")
        if total > 1.0:
            # round-off above 1 is clamped so that conservative atoms stay conservative
            sizes = tuple(s / total for s in sizes)
        # reorder away the tolerated round-off inversions
        object.__setattr__(self, "sizes", tuple(sorted(sizes, reverse=True)))

    def __len__(self):
        return len(self.sizes)

    def __iter__(self):
        return iter(self.sizes)

    @property
    def mass(self) -> float:
        return math.fsum(self.sizes)

    @property
    def is_conservative(self) -> bool:
        return abs(1.0 - self.mass) <= SIZE_TOL


@dataclass(frozen=True)
class Atom:
    weight: float
    fragments: FragmentVector


class DislocationMeasure:
    """A finite atomic dislocation measure ``nu = sum_i w_i delta_{s_i}``.

    Parameters
    ----------
    atoms : iterable of ``(weight, fragments)``
        ``weight`` is the positive rate of the atom and ``fragments`` a ranked
        sequence of fragment sizes (or a :class:`FragmentVector`).
    name : str, optional
        Label used in reports.

    Examples
    --------
    >>> nu = DislocationMeasure([(1.0, (0.5, 0.5))])
    >>> round(critical_speed(nu), 4)
    0.2588
    """

    def __init__(self, atoms: Iterable, name: str = ""):
        parsed = []
        for i, item in enumerate(atoms):
            try:
                weight, fragments = item
            except (TypeError, ValueError):
                raise ValidationError(f"atom {i}: expected a (weight, fragments) pair") from None
            weight = float(weight)
            if not math.isfinite(weight) or weight <= 0.0:
                raise ValidationError(f"atom {i}: weight must be positive and finite, got {weight!r}")
            if not isinstance(fragments, FragmentVector):
                try:
                    fragments = FragmentVector(tuple(fragments))
                except ValidationError as exc:
                    raise ValidationError(f"atom {i}: {exc}") from None
            parsed.append(Atom(weight, fragments))
        if not parsed:
            raise ValidationError("a dislocation measure needs at least one atom")
        self._atoms = tuple(parsed)
        self.name = name
        self._weights = np.array([a.weight for a in parsed])
        self._cum = np.cumsum(self._weights)
        self._total = float(math.fsum(self._weights))
        # padded (atoms x max_fragments) array; padding with 0 contributes nothing to s**(1+p)
        width = max(len(a.fragments) for a in parsed)
        self._sizes = np.zeros((len(parsed), width))
        for i, a in enumerate(parsed):
            self._sizes[i, : len(a.fragments)] = a.fragments.sizes
        self._log_sizes = tuple(tuple(math.log(s) for s in a.fragments) for a in parsed)
        if not bertoin_condition_holds(self):
            raise ValidationError("condition (1+p) Phi'(p) > Phi(p) fails for every scanned p")

    @property
    def atoms(self) -> tuple[Atom, ...]:
        return self._atoms

    @property
    def weights(self) -> np.ndarray:
        return self._weights.copy()

    @property
    def log_sizes(self) -> tuple[tuple[float, ...], ...]:
        """Per-atom natural logs of the fragment sizes."""
        return self._log_sizes

    def scaled(self, m: float) -> "DislocationMeasure":
        """Return ``m * nu``."""
        return DislocationMeasure([(m * a.weight, a.fragments) for a in self._atoms], self.name)

    def to_dict(self) -> dict:
        return {"model": self.name,
                "atoms": [{"weight": a.weight, "fragments": list(a.fragments.sizes)}
                          for a in self._atoms]}

    def __eq__(self, other):
        if not isinstance(other, DislocationMeasure):
            return NotImplemented
        return self._atoms == other._atoms

    def __hash__(self):
        return hash(self._atoms)

    def __repr__(self):
        body = ", ".join(f"{a.weight:g}*delta{a.fragments.sizes}" for a in self._atoms)
        return f"DislocationMeasure({body})"


def _check_p(p):
    if np.any(np.asarray(p) <= -1.0):
        raise ValidationError(f"Phi is only defined for p > -1, got {p!r}")


def total_rate(nu: DislocationMeasure) -> float:
    """Total mass ``nu(S)``: the rate at which any single block fragments."""
    return nu._total


def phi(nu: DislocationMeasure, p):
    """Laplace exponent ``Phi(p) = sum_i w_i (1 - sum_n s_in^(1+p))``.

    Vectorised over ``p``.
    """
    _check_p(p)
    p = np.asarray(p, dtype=float)
    s = nu._sizes
    safe = np.where(s > 0, s, 1.0)
    powers = np.where(s[..., None] > 0, safe[..., None] ** (1.0 + p.reshape(-1)), 0.0)
    out = nu._weights @ (1.0 - powers.sum(axis=1))
    return float(out[0]) if p.ndim == 0 else out.reshape(p.shape)


def phi_prime(nu: DislocationMeasure, p):
    """Derivative ``Phi'(p) = sum_i w_i sum_n (-ln s_in) s_in^(1+p)``."""
    _check_p(p)
    p = np.asarray(p, dtype=float)
    s = nu._sizes
    safe = np.where(s > 0, s, 1.0)
    terms = np.where(s[..., None] > 0, -np.log(safe)[..., None] * safe[..., None] ** (1.0 + p.reshape(-1)), 0.0)
    out = nu._weights @ terms.sum(axis=1)
    return float(out[0]) if p.ndim == 0 else out.reshape(p.shape)


def c_of_p(nu: DislocationMeasure, p):
    """``c_p = Phi(p) / (1 + p)``."""
    _check_p(p)
    return phi(nu, p) / (1.0 + np.asarray(p, dtype=float))


def killing_rate(nu: DislocationMeasure) -> float:
    """Rate of mass loss ``sum_i w_i (1 - sum_n s_in)``; equal to ``Phi(0)``."""
    return float(nu._weights @ (1.0 - nu._sizes.sum(axis=1)))


def _g(nu, p):
    # (1+p) Phi'(p) - Phi(p); its unique zero is p_bar
    return (1.0 + p) * phi_prime(nu, p) - phi(nu, p)


def _p_grid(n=400):
    lo, hi = P_WINDOW
    return np.geomspace(1.0 + lo, 1.0 + hi, n) - 1.0


def bertoin_condition_holds(nu: DislocationMeasure) -> bool:
    """True iff ``(1+p) Phi'(p) > Phi(p)`` somewhere on the scanned p-window."""
    return bool(np.any(_g(nu, _p_grid()) > 0.0))


def critical_exponent(nu: DislocationMeasure) -> float:
    """Unique root ``p_bar`` of ``(1+p) Phi'(p) = Phi(p)`` on ``(-1, inf)``."""
    grid = _p_grid()
    g = _g(nu, grid)
    idx = np.nonzero((g[:-1] > 0.0) & (g[1:] <= 0.0))[0]
    if len(idx) == 0:
        raise NumericalError("critical exponent not bracketed")
    a, b = grid[idx[0]], grid[idx[0] + 1]
    if g[idx[0] + 1] == 0.0:
        return float(b)
    root = brentq(lambda p: _g(nu, p), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(_g(nu, root)) >= G_TOL * max(1.0, total_rate(nu)):
        raise NumericalError(f"critical exponent not resolved: |g(p_bar)| = {abs(_g(nu, root)):.3e}")
    return float(root)


def critical_speed(nu: DislocationMeasure) -> float:
    """Critical speed ``c_pbar = Phi'(p_bar)``."""
    return phi_prime(nu, critical_exponent(nu))


def phi_lower_limit(nu: DislocationMeasure) -> float:
    """Diagnostic limit of ``Phi(p)`` as ``p`` decreases to -1: ``sum_i w_i (1 - n_i)``."""
    counts = (nu._sizes > 0).sum(axis=1)
    return float(nu._weights @ (1.0 - counts))


def sample_fragments(nu: DislocationMeasure, rng) -> FragmentVector:
    """Draw the fragment vector of one dislocation, atom ``i`` w.p. ``w_i / nu(S)``.

    ``rng`` is anything with a ``random()`` method returning a uniform on [0, 1).
    """
    return nu._atoms[sample_atom_index(nu, rng)].fragments


def sample_atom_index(nu: DislocationMeasure, rng) -> int:
    if len(nu._atoms) == 1:
        return 0
    u = rng.random() * nu._total
    i = int(np.searchsorted(nu._cum, u, side="right"))
    return min(i, len(nu._atoms) - 1)


def binary(weight: float = 1.0) -> DislocationMeasure:
    """``weight * delta_{(1/2, 1/2)}``."""
    return DislocationMeasure([(weight, (0.5, 0.5))], name="binary-half")
