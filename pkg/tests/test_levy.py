import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fragwave import DislocationMeasure, ValidationError, binary, killing_rate, phi
from fragwave.levy import (ScaleTable, laplace_exponent_psi, laplace_transform, mc_first_passage,
                           psi_largest_root, scale_function, tagged_law, two_sided_exit)

from conftest import atom_lists

LN2 = math.log(2)
DISS = DislocationMeasure([(1.0, (0.5, 0.25))])


def _bisect(func, lo, hi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if func(mid) < 0 else (lo, mid)
    return 0.5 * (lo + hi)


# tagged law ---------------------------------------------------------------------

def test_tagged_law_binary_merges_equal_jumps():
    law = tagged_law(binary())
    assert law.sizes.tolist() == pytest.approx([LN2])
    assert law.rates.tolist() == pytest.approx([1.0])
    assert law.killing == 0.0


def test_tagged_law_dissipative():
    law = tagged_law(DISS)
    assert law.sizes.tolist() == pytest.approx([LN2, 2 * LN2])
    assert law.rates.tolist() == pytest.approx([0.5, 0.25])
    assert law.killing == pytest.approx(0.25)
    assert law.tail(0.0) == pytest.approx(1.0)
    assert law.tail(LN2) == pytest.approx(0.5)
    assert law.tail(2 * LN2) == pytest.approx(0.25)


@given(atom_lists())
def test_tagged_law_reconstructs_phi(atoms):
    nu = DislocationMeasure(atoms)
    law = tagged_law(nu)
    assert law.killing == pytest.approx(killing_rate(nu), abs=1e-15)
    assert law.jump_rate <= nu.weights.sum() + 1e-12
    for p in (0.5, 1.0, 2.0):
        assert law.laplace_exponent(p) == pytest.approx(phi(nu, p), abs=1e-12)


# psi ------------------------------------------------------------------------------

def test_psi_examples():
    assert laplace_exponent_psi(binary(), 1.0, 0.0) == 0.0
    assert laplace_exponent_psi(DISS, 1.0, 0.0) == pytest.approx(-0.25)
    assert laplace_exponent_psi(binary(), 1.0, 1.0) == pytest.approx(0.5)
    for beta in (1e3, 1e4):
        assert laplace_exponent_psi(DISS, 0.7, beta) / beta == pytest.approx(0.7, rel=0.01)
    with pytest.raises(ValidationError):
        laplace_exponent_psi(binary(), 1.0, -0.1)


@pytest.mark.parametrize("nu,c", [(binary(), 0.5), (binary(), 1.0), (DISS, 0.7), (DISS, 2.0)])
def test_psi_largest_root(nu, c):
    root = psi_largest_root(nu, c)
    psi = lambda b: c * b - phi(nu, b)
    assert abs(psi(root)) < 1e-12
    # nothing beyond the root is a zero: psi is positive and increasing there
    assert psi(root + 0.1) > 0
    # oracle: last negative grid cell of psi on (0, 50], refined by bisection
    grid = np.linspace(1e-9, 50.0, 5001)
    neg = [b for b in grid if psi(b) < 0]
    expected = _bisect(psi, neg[-1], neg[-1] + grid[1] - grid[0]) if neg else 0.0
    assert root == pytest.approx(expected, abs=1e-10)


# scale function ---------------------------------------------------------------------

@pytest.mark.parametrize("nu,c", [(binary(), 1.0), (DISS, 0.703), (binary(), 0.4)])
def test_scale_function_below_smallest_jump_is_exponential(nu, c):
    # H is constant (= 1 for both measures) on [0, ln 2), so c W' = W there
    table = scale_function(nu, c, x_max=2.0, dx=2.0 ** -9)
    assert table.values[0] == 1.0 / c
    xs = table.x[table.x < LN2]
    assert np.allclose(table(xs), np.exp(xs / c) / c, rtol=1e-5)
    slope = (table.values[1] - table.values[0]) / table.dx
    assert slope == pytest.approx(tagged_law(nu).tail(0.0) / c ** 2, rel=0.01)


@pytest.mark.parametrize("nu,c", [(binary(), 1.0), (DISS, 0.703)])
def test_scale_function_monotone_and_refines(nu, c):
    coarse = scale_function(nu, c, x_max=10.0)
    fine = scale_function(nu, c, x_max=10.0, dx=coarse.dx / 2)
    assert np.all(np.diff(coarse.values) > 0)
    assert fine.values[0] == coarse.values[0] == 1.0 / c
    assert abs(fine.values[-1] / coarse.values[-1] - 1) < 1e-4


@pytest.mark.parametrize("nu,c", [(binary(), 1.0), (binary(), 0.5), (DISS, 0.703)])
def test_laplace_spot_check(nu, c):
    growth = psi_largest_root(nu, c)
    table = scale_function(nu, c, x_max=12.0)
    for beta in (growth + 1.0, growth + 3.0):
        lt = laplace_transform(table, beta, growth)
        assert lt == pytest.approx(1.0 / laplace_exponent_psi(nu, c, beta), rel=0.01)


def test_scale_function_validation():
    for kwargs in (dict(c=0.0), dict(c=1.0, dx=0.0), dict(c=-1.0)):
        with pytest.raises(ValidationError):
            scale_function(binary(), **kwargs)
    table = scale_function(binary(), 1.0, x_max=1.0)
    with pytest.raises(ValidationError):
        table(1.5)
    assert isinstance(table, ScaleTable)


# exit probabilities -----------------------------------------------------------------

def test_two_sided_exit_examples():
    table = scale_function(binary(), 1.0, x_max=3.0)
    assert two_sided_exit(binary(), 1.0, 1.3, 0.0, table=table) == 1.0
    assert two_sided_exit(binary(), 1.0, 0.0, 2.0, table=table) == pytest.approx(1.0 / table(2.0))
    with pytest.raises(ValidationError):
        two_sided_exit(binary(), 1.0, 2.0, 2.0, table=table)
    with pytest.raises(ValidationError):
        two_sided_exit(binary(), 1.0, -1.0, 1.0)


_DISS_TABLE = scale_function(DISS, 0.703, x_max=8.5)


@given(st.floats(0.0, 4.0), st.floats(0.01, 4.0))
def test_exit_ratio_in_unit_interval(x, h):
    p = two_sided_exit(DISS, 0.703, x, h, table=_DISS_TABLE)
    assert 0.0 < p <= 1.0


@pytest.mark.parametrize("nu,c,h", [(binary(), 1.0, 0.5), (DISS, 0.703, 0.4)])
def test_exit_from_zero_closed_form(nu, c, h):
    # from 0 every jump exits below 0 while the level stays under ln 2, so P = exp(-H(0) h / c)
    exact = math.exp(-h / c)
    assert two_sided_exit(nu, c, 0.0, h, dx=2.0 ** -10) == pytest.approx(exact, rel=1e-5)
    mc = mc_first_passage(nu, c, 0.0, h, n_trials=20_000, master_seed=31)
    assert abs(mc.point - exact) <= 3 * mc.std_error


@pytest.mark.parametrize("nu,c", [(binary(), 1.0), (DISS, 0.703)])
def test_exit_matches_monte_carlo(nu, c):
    exact = two_sided_exit(nu, c, 1.0, 1.0)
    mc = mc_first_passage(nu, c, 1.0, 1.0, n_trials=20_000, master_seed=32)
    assert abs(exact - mc.point) <= 3 * mc.std_error


def test_mc_first_passage_edge_cases():
    assert mc_first_passage(binary(), 1.0, 0.5, 0.0, n_trials=100).point == 1.0
    heavy = DislocationMeasure([(50.0, (0.1, 0.1))])
    assert mc_first_passage(heavy, 1.0, 0.5, 1.0, n_trials=2000, master_seed=1).point < 0.01
    a = mc_first_passage(DISS, 0.703, 1.0, 1.0, n_trials=3000, master_seed=5)
    b = mc_first_passage(DISS, 0.703, 1.0, 1.0, n_trials=3000, master_seed=5, workers=2)
    assert a == b
    with pytest.raises(ValidationError):
        mc_first_passage(binary(), 1.0, 1.0, 1.0, n_trials=0)
