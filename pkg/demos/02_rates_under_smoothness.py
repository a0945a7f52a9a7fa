"""Convergence rates of Lavrentiev regularization for the Volterra operator.

With x_true - x_bar = V w (the benchmark smoothness) and alpha = sqrt(delta)
the error decays like delta^(1/2), and no choice of alpha does better: the
bias divided by alpha stays between two positive constants.  Weaker
smoothness V^p w gives the slower order p/(p+1).
"""
import numpy as np

from lavreg.analysis import rate_table
from lavreg.grid import constant, make_uniform_grid, norm, sample, zeros
from lavreg.lavrentiev import (
    LinearProblem,
    ParameterRule,
    apriori_alpha,
    bias_linear,
    make_noisy_data,
    total_error,
)
from lavreg.linops import fractional_power_apply, volterra_operator

grid = make_uniform_grid(1000)
V = volterra_operator(grid)
deltas = np.logspace(-1, -4, 7)


def rate(u, exponent, seed):
    P = LinearProblem(V, u, zeros(grid))
    rule = ParameterRule.power(1.0, exponent)
    errors = [total_error(P, make_noisy_data(P, d, [seed, k]), apriori_alpha(d, rule))
              for k, d in enumerate(deltas)]
    return P, rate_table(deltas, errors)


w = sample(grid, lambda t: np.cos(np.pi * t))
P, table = rate(V.apply(w), 0.5, 7)

print(f"benchmark: slope {table.fitted_slope:.3f} (expected 0.5), r^2 {table.r_squared:.4f}")
for a in (1e-1, 1e-2, 1e-3):
    print(f"  B({a:g})/{a:g} = {bias_linear(P, a) / a:.4f}   (||w|| = {norm(w):.4f})")

for p in (0.25, 0.5):
    u = fractional_power_apply(V, p, constant(grid))
    _, table = rate(u, 1 / (p + 1), 11)
    print(f"p = {p}: slope {table.fitted_slope:.3f} (expected {p / (p + 1):.3f})")
