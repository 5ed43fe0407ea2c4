"""
Certifying exact model selection
================================

Irrepresentability, the compatibility constants and the admissible
lambda window for a two-variable lasso, once with a benign design and once
with a design that breaks the condition.
"""

import numpy as np

from gdpen import certify, irrep_check, lasso

rho = lasso(2, active=[0])
theta_star = np.array([1.0, 0.0])
grad = np.array([0.1, 0.0])

good = np.array([[1.0, 0.5], [0.5, 1.0]])
rep = certify(rho, good, theta_star=theta_star, grad=grad, tau_bar_scope="model")
print("tau            ", rep.tau)
print("lambda window  ", rep.lambda_lo, rep.lambda_hi)
print("verdicts       ", rep.verdicts)

bad = np.array([[1.0, 1.25], [1.25, 2.0]])
r = irrep_check(rho, bad)
print("bad design     ", r.verdict, "sup =", r.lower)
