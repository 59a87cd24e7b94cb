"""Independent reference computations used by the tests.

Everything here is written from the closed forms with plain ``math`` and no
package code, so agreement with the package is a genuine cross-check.
"""
import math


def phi_closed(atoms, p):
    return math.fsum(w * (1.0 - math.fsum(s ** (1.0 + p) for s in frags)) for w, frags in atoms)


def phi_prime_fd(atoms, p, h=1e-5):
    return (phi_closed(atoms, p + h) - phi_closed(atoms, p - h)) / (2.0 * h)


def phi_prime_closed(atoms, p):
    return math.fsum(w * math.fsum(-math.log(s) * s ** (1.0 + p) for s in frags) for w, frags in atoms)


def g_closed(atoms, p):
    return (1.0 + p) * phi_prime_closed(atoms, p) - phi_closed(atoms, p)


def pbar_bisect(atoms, lo=-1.0 + 1e-9, hi=1.0):
    """Plain bisection for the zero of (1+p) Phi'(p) - Phi(p)."""
    while g_closed(atoms, hi) > 0.0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g_closed(atoms, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def binary_pbar_bisect():
    """p_bar for delta_(1/2,1/2) from Phi(p) = 1 - 2^-p, Phi'(p) = 2^-p ln 2."""
    g = lambda p: (1 + p) * 2.0 ** -p * math.log(2) - (1 - 2.0 ** -p)
    lo, hi = 0.0, 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if g(mid) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


def binomial_within(count, n, p, k=3.0):
    """True when ``count / n`` is within ``k`` binomial standard errors of ``p``."""
    se = math.sqrt(p * (1 - p) / n)
    return abs(count / n - p) <= k * se
