"""Resolvent norms of the line system around the first eigenvalue pair.

Writes ``pseudospectrum.csv`` (columns re, im, norm) to the working
directory and prints a coarse text map of log10 norms.
"""

import math

import numpy as np

from btspec.grid import Grid1D
from btspec.operators import OperatorSpec
from btspec.spectra import pseudospectrum_grid

spec = OperatorSpec("BlochTorreyLine", Grid1D(-8, 8, 1599), eps=0.05)
grid = pseudospectrum_grid(spec, np.linspace(-0.2, 0.6, 17), np.linspace(0.5, 1.5, 11))
with open("pseudospectrum.csv", "w") as fh:
    fh.write(grid.to_csv())

print("log10 ||(B - z)^-1||, rows: Im z from 1.5 down to 0.5, columns: Re z from -0.2 to 0.6")
for j in reversed(range(grid.im_axis.size)):
    row = " ".join(f"{math.log10(v):4.1f}" for v in grid.norms[j])
    print(f"{grid.im_axis[j]:4.2f} | {row}")
print(f"peak near {grid.argmax():.3f}")
