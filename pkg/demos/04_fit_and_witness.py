"""
Fitting and the restricted-problem witness
==========================================

Solve a sparse regression, then solve the problem restricted to the
model subspace and check that its dual certificate is strictly feasible.
"""

import numpy as np

from gdpen import SquaredLoss, lasso, solve, witness

rng = np.random.default_rng(0)
n, p = 200, 20
X = rng.standard_normal((n, p))
theta = np.zeros(p)
theta[:3] = [1.5, -2.0, 1.0]
y = X @ theta + 0.3 * rng.standard_normal(n)

loss = SquaredLoss(X, y)
rho = lasso(p, active=range(3))
lam = 0.1

est = solve(loss, rho, lam)
print("support        ", est.support, "converged", est.converged)

restricted, rep = witness(loss, rho, lam)
print("gauge of u_I   ", round(rep.gauge_I_of_u_I, 4))
print("unique         ", rep.certified_unique)
print("same estimate  ", np.allclose(restricted.theta_hat, est.theta_hat, atol=1e-6))
