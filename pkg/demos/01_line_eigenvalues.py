"""Eigenvalues of the line system near i and how fast they approach the prediction.

Locates the two lowest modes for a few eps, prints the distance to the
leading-order prediction and to the two-term predictions built from the
nominal and the re-derived second coefficient.
"""

from btspec.asymptotics import fit_slope, kappa0, line_spec, mu_k0, mu_k1
from btspec.spectra import locate_eigenvalue

EPS = [0.08, 0.04, 0.02]

for n in (1, 2):
    nominal = mu_k1(n)
    rederived = mu_k1(n, form="rederived")
    print(f"mode {n}: mu0 = {mu_k0(n)}, mu1 nominal = {nominal:.6f}, re-derived = {rederived:.6f}")
    errs = {"leading": [], "nominal": [], "re-derived": []}
    for eps in EPS:
        kappa = locate_eigenvalue(line_spec(eps), kappa0(n, eps)).value
        base = kappa0(n, eps)
        errs["leading"].append(abs(kappa - base))
        errs["nominal"].append(abs(kappa - base - eps ** 2 * nominal))
        errs["re-derived"].append(abs(kappa - base - eps ** 2 * rederived))
        print(f"  eps={eps:<5} kappa = {kappa.real:.10f} {kappa.imag:+.10f}i")
    for name, e in errs.items():
        print(f"  {name:>10}: errors " + ", ".join(f"{v:.2e}" for v in e)
              + f"  slope {fit_slope(EPS, e):.2f}")
