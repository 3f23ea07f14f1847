"""The scalar reduction and the full system give the same eigenvalue.

For each eps the secant iteration finds lam with 0 in the spectrum of the
quartic operator, maps it back with Lambda = eps^(2/3) lam and compares with
the eigenvalue of the full three-component system.
"""

from btspec.asymptotics import kappa0, line_spec
from btspec.reduction import (energy_identity_defect, find_lambda_root, probe_mlambda,
                              reconstruct_components, system_residual)
from btspec.spectra import locate_eigenvalue

for eps in (0.08, 0.05):
    eps_c = eps ** (4 / 3)
    lam = find_lambda_root(eps ** (-2 / 3) * kappa0(1, eps), eps_c)
    direct = locate_eigenvalue(line_spec(eps), kappa0(1, eps)).value
    probe = probe_mlambda(lam, eps_c)
    comps = reconstruct_components(lam, probe.vector, probe.grid, eps_c)
    print(f"eps={eps}: reduction {eps ** (2 / 3) * lam:.10f}, direct {direct:.10f}, "
          f"gap {abs(eps ** (2 / 3) * lam - direct):.1e}")
    print(f"   system residual {system_residual(lam, comps, probe.grid, eps_c):.1e}, "
          f"energy identity defect {energy_identity_defect(lam, comps[0], probe.grid, eps_c):.1e}")
