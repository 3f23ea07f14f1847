"""Lowest real eigenvalue of the interval problem scales like rho0 eps^2.

Computes rho0 on (0, 1) from the limit pencil, then the crossing of nu for
decreasing eps, and prints Lambda_1 / eps^2 against rho0.
"""

import math

from btspec.variational import compute_rho0, higher_eigenvalues, verify_scaling_law

r = compute_rho0(0, 1)
print(f"rho0(0,1) = {r.rho0:.12f}  (pi^2 = {math.pi ** 2:.6f})")
print("next pencil eigenvalues:", ", ".join(f"{v:.4f}" for v in higher_eigenvalues(0, 1, 1023, 4)[1:]))

rep = verify_scaling_law([0.1, 0.05, 0.025], rho0=r.rho0)
for row in rep.rows:
    print(f"eps={row['eps']:<6} Lambda1/eps^2 = {row['ratio']:.8f}  rel. error {row['rel_err']:+.2e}  "
          f"direct-system gap {row['direct_gap']:.1e}")
print(f"fitted r+ = {rep.r_plus:.3g}, r- = {rep.r_minus:.3g}; error decreasing: {rep.error_decreasing}")
