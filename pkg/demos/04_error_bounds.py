# Checks the error behaviour the method is built on.  Each level k is taken as
# the final level of its own run, compared against two references:
#   * the auxiliary algorithm, which solves the source problems exactly, and
#   * the direct eigensolver.

import numpy as np

from cascadic_eig import (SolverConfig, build_hierarchy, discretize, laplace,
                          structured_unit_square, verify_theorems)

disc = discretize(build_hierarchy(structured_unit_square(8), 5), laplace)
report = verify_theorems(disc, SolverConfig(levels=5))

print(f"{'k':>2} {'h':>9} {'|u-aux|/h':>10} {'|u-dir|':>10} {'|aux-dir|':>10}")
for row in report["table"]:
    print(f"{row['level']:2d} {row['h']:9.4f} {row['u_minus_aux'][0] / row['h']:10.4f} "
          f"{row['u_minus_dir'][0]:10.3e} {row['aux_minus_dir'][0]:10.3e}")

# |u - aux| / h is roughly constant (first order); |aux - dir| drops about four
# times per level (second order)
print()
for name, (ok, value) in report["checks"].items():
    print(f"{'PASS' if ok else 'FAIL'}  {name}  {value:.3f}")

# doubling the smoothing steps roughly halves the remaining error
for mbar in (2.0, 4.0):
    rep = verify_theorems(disc, SolverConfig(levels=5, mbar=mbar),
                          baseline=report["baseline"])
    print(f"mbar={mbar}: |u - aux|_a on level 5 = {rep['table'][-1]['u_minus_aux'][0]:.3e}")
