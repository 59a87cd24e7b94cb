"""Solve the travelling wave by shooting and compare it with simulated extinction."""
from fragwave import DislocationMeasure, critical_speed
from fragwave.fkpp import cross_validate, solve_wave

nu = DislocationMeasure([(1.0, (0.5, 0.25))])
c = 2 * critical_speed(nu)

wave, report = solve_wave(nu, c)
print(f"c = {c:.4f}: f(0+) = {wave.values[0]:.6f}, max |residual| = {report.max_abs_residual:.2e}")

cv = cross_validate(nu, c, (0.0, 0.5, 1.0, 2.0), n_trials=4000, master_seed=11, wave=wave)
for row in cv.rows:
    verdict = "agrees" if row.passed else "DISAGREES"
    print(f"x = {row.x:3.1f}: wave {row.f_solver:.4f}  simulation {row.phi_mc:.4f} +- {row.se:.4f}  {verdict}")
