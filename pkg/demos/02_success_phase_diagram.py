#!/usr/bin/env python3
"""Map the success probability over a small (n, m) grid.

A desk-scale version of the phase transition picture: for each cell we
sample fresh instances, run alternating projections with the spectral
initializer, and count recoveries. Expect a sharp climb to probability 1
once m is a few multiples of n. Takes about a minute.
"""

from prap.cli import write_pgm
from prap.experiments import GridSpec, run_success_grid

n_values = (4, 8, 16)
m_multiples = (2, 3, 4, 6, 10)

rows = {}
for k in m_multiples:
    spec = GridSpec(n_values=n_values, m_rule=f"{k}n", trials=60, master_seed=7)
    result = run_success_grid(spec, threads=2)
    rows[k] = {c.n: c.probability for c in result.cells}
    print(f"m = {k}n done")

print("\nsuccess probability (spectral init)\n")
print("m/n |" + "".join(f"  n={n:>3} " for n in n_values))
print("----+" + "-------" * len(n_values))
for k in m_multiples:
    print(f"{k:>3} |" + "".join(f"  {rows[k][n]:5.2f} " for n in n_values))

# A rectangular grid at fixed m values renders directly as a graymap
# (white = certain recovery), the same picture the CLI's --heatmap emits.
spec = GridSpec(n_values=(4, 8), m_values=(16, 32, 64), trials=40, master_seed=8)
write_pgm("phase_diagram.pgm", run_success_grid(spec, threads=2))
print("\nwrote phase_diagram.pgm (3 rows = m ascending, 2 cols = n ascending)")
