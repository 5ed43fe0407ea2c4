"""
Phase transitions in sample size
================================

Success probability of exact support recovery against n / log p for two
problem sizes, and the converse behaviour when irrepresentability fails.
Writes phase.csv / phase.json / phase.svg to the working directory.
"""

import numpy as np

from gdpen import PhaseConfig, converse_check, emit_report, lasso, run_phase

cfg = PhaseConfig(family="lasso", sizes=[32, 64], n_grid=[20, 40, 60, 90, 140], trials=50,
                  master_seed=1)
res = run_phase(cfg)
for row in res.rows:
    print(f"p={row['size']:3d} n={row['n']:4d} n/log p={row['rescaled_n']:6.1f} "
          f"success={row['success_fraction']:.2f}")
emit_report(res, ".", stem="phase")

Q = np.array([[1.0, 1.25], [1.25, 2.0]])
conv = converse_check(lasso(2, [0]), Q, [1.0, 0.0], trials=100)
print("converse: violation", round(conv.violation, 3), "best success", conv.best_fraction, "Wilson 95%", conv.wilson)
