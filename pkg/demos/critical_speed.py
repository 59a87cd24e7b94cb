"""Critical speed of a few dislocation measures.

For each measure we print Phi, the slope-matching exponent p_bar where
c_p = Phi(p) / (1 + p) peaks, and the resulting critical speed. Scaling the
weights by m leaves p_bar alone and multiplies the speed by m.
"""
import numpy as np

from fragwave import (DislocationMeasure, binary, c_of_p, critical_exponent, critical_speed,
                      killing_rate)

measures = {
    "binary (1/2, 1/2)": binary(),
    "binary, weight 3": binary(3.0),
    "dissipative (1/2, 1/4)": DislocationMeasure([(1.0, (0.5, 0.25))]),
    "ternary mix": DislocationMeasure([(1.0, (0.5, 0.5)), (0.5, (0.4, 0.3, 0.3))]),
}

for name, nu in measures.items():
    pbar = critical_exponent(nu)
    print(f"{name:24s} p_bar = {pbar:.6f}  c_pbar = {critical_speed(nu):.6f}  "
          f"killing = {killing_rate(nu):.3f}")

# c_p rises to its maximum at p_bar and falls after it
nu = binary()
ps = np.linspace(0.0, 4.0, 9)
print("\np      c_p (binary)")
for p, c in zip(ps, c_of_p(nu, ps)):
    print(f"{p:4.1f}   {c:.5f}")
