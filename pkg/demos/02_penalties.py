"""
Building decomposable penalties
===============================

Lasso, group lasso and an analysis (fused) penalty, with their model
subspaces and proximal maps.
"""

import numpy as np

from gdpen import analysis, group_lasso, lasso, penalty_value, prox
from gdpen.experiments import difference_matrix

theta = np.array([2.0, 0.0, -1.0, 0.0, 0.0, 0.0])

rho = lasso(6, active=[0, 2])
print("lasso value    ", penalty_value(rho, theta))
print("model dim      ", rho.M.dim)
print("prox at t=0.5  ", prox(rho, theta, 0.5))

g = group_lasso([[0, 1], [2, 3], [4, 5]], active=[0, 1])
print("group value    ", penalty_value(g, theta))
print("group prox     ", prox(g, theta, 0.5))

# fused penalty on successive differences: piecewise-constant vectors are cheap
D = difference_matrix(6)
fused = analysis(D, lasso(5, active=[0, 1, 2]))
step = np.array([1.0, 1.0, 1.0, -1.0, -1.0, -1.0])
print("fused value    ", penalty_value(fused, step))
