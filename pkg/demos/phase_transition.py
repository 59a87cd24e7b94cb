"""Extinction probability of the killed fragmentation as the barrier speed varies.

Below the critical speed the barrier outruns the fragments and extinction is
almost sure; above it a positive fraction of trials survive.
"""
import numpy as np

from fragwave import binary, critical_speed
from fragwave.fkpp import phase_scan

nu = binary()
cbar = critical_speed(nu)
speeds = cbar * np.array([0.5, 0.8, 1.0, 1.5, 2.0, 3.0, 4.0])

print(f"c_pbar = {cbar:.4f}; start x = 1, 2000 trials per speed")
for c, est in phase_scan(nu, 1.0, speeds, n_trials=2000, horizon=100.0, master_seed=7):
    print(f"c / c_pbar = {c / cbar:4.1f}   phi_hat = {est.point:.4f} +- {est.std_error:.4f}")
