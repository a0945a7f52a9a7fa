"""How far is a jump from the range of the Cesaro operator?

The Heaviside step is not of the form C w, so the benchmark rate is out of
reach.  The distance function d(R) = min over ||w|| <= R of ||u - C w||
measures by how much; here it decays like 1/R, which corresponds to
smoothness of order p = 1/2 and to an error of order delta^(1/3).
"""
import numpy as np

from lavreg.grid import heaviside, make_uniform_grid
from lavreg.linops import cesaro_operator
from lavreg.srcfit import distance_at, distance_function, fit_decay, psi_parameter_choice, verify_cesaro_witness

grid = make_uniform_grid(2000)
C = cesaro_operator(grid)
u = heaviside(grid)
curve = distance_function(C, u, np.logspace(1, -12, 53), "heaviside")

print("    R          d(R)       R*d(R)")
for R, d in list(zip(curve.radii, curve.distances))[::6]:
    print(f"{R:10.3g}  {d:10.3e}  {R * d:8.4f}")

model = fit_decay(curve)
print(f"\nfitted d(R) ~ {model.constant:.3f} R^{model.exponent:.3f}, implied p = {model.implied_p:.3f}")

# an explicit element w with ||w|| <= R gives a residual that the optimum must beat
for R in (10.0, 20.0, 30.0):
    print(f"R = {R:g}: explicit witness {verify_cesaro_witness(grid, R):.4f} >= optimum {distance_at(C, u, R):.4f}")

for delta in (1e-3, 1e-5):
    print(f"delta = {delta:g}: alpha from the distance function {psi_parameter_choice(curve, delta):.3e}")
