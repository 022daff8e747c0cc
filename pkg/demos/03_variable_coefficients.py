# A variable-coefficient problem  -div(A grad u) + phi u = lambda rho u.
# No closed-form eigenvalues exist, so references come from Richardson
# extrapolation of the two finest direct solutions.

import numpy as np

from cascadic_eig import ExperimentSpec, SolverConfig, convergence_rates, run_study
from cascadic_eig.harness import csv_text

spec = ExperimentSpec(problem="example2", config=SolverConfig(levels=5, nev=6), baseline=True)
records = run_study(spec)

for r in records:
    print(f"level {r.level}: N={r.n_dofs:6d}  lambda_1={r.lam[0]:.6f}  "
          f"err={r.err_lam[0]:.2e}")

rates, summary, _ = convergence_rates(records, "err_lam")
lo = min(s[0] for s in summary)
hi = max(s[1] for s in summary)
print(f"\nrates over the last levels lie in [{lo:.2f}, {hi:.2f}]")

# the same table as CSV, ready for a spreadsheet
print()
print(csv_text(records, spec))
