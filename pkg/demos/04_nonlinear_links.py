"""Lavrentiev regularization for scalar nonlinear monotone maps.

Near a point where F(x) = sign(x)|x|^kappa is flat (kappa > 1) the error
decays like delta^(1/kappa); where it is steep (kappa < 1) the rate is
faster than linear.  For F(x) = exp(x) - 1 the nonlinear bias is within a
computable constant of the bias of the linearized problem.
"""
import numpy as np

from lavreg.nonlinear import (
    NonlinearProblem,
    bias_transfer_check,
    conditional_stability_rate,
    exp_link_map,
    scalar,
)

deltas = np.logspace(-2, -8, 13)
for kappa in (0.5, 1.0, 2.0, 3.0):
    table = conditional_stability_rate(kappa, deltas)
    print(f"kappa = {kappa:<4g} slope {table.fitted_slope:.4f}  (1/kappa = {1 / kappa:.4f})")

P = NonlinearProblem(exp_link_map(), scalar(0.2), scalar(0.0), ball_radius=0.25)
C, pairs = bias_transfer_check(P, None, np.logspace(0, -6, 7))
print(f"\nexp link: transfer constant C = {C:.4f}")
for alpha, ratio in pairs:
    print(f"  alpha = {alpha:<8.0e} B_F/B_A = {ratio:.4f}")
