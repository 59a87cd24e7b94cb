"""Scale function of the tagged fragment and two-sided exit probabilities.

Below the smallest jump ln 2 the scale function is exactly exp(x / c) / c for
the binary measure, which makes a handy sanity check.
"""
import math

from fragwave import binary
from fragwave.levy import mc_first_passage, scale_function, two_sided_exit

nu, c = binary(), 1.0
table = scale_function(nu, c, x_max=6.0)
for x in (0.0, 0.5, 1.0, 2.0, 4.0):
    exact = f"  closed form {math.exp(x / c) / c:.6f}" if x < math.log(2) else ""
    print(f"W({x:.1f}) = {table(x):.6f}{exact}")

for x, h in ((0.0, 0.5), (1.0, 1.0), (2.0, 2.0)):
    p = two_sided_exit(nu, c, x, h, table=table)
    mc = mc_first_passage(nu, c, x, h, n_trials=20_000, master_seed=3)
    print(f"x = {x}, h = {h}: W(x)/W(x+h) = {p:.4f}, simulated {mc.point:.4f} +- {mc.std_error:.4f}")
