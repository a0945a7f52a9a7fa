"""Which operators make the regularized problem stable?

For a monotone linear operator, alpha * ||(A + alpha I)^{-1}|| either stays
bounded away from one as alpha shrinks (the equation is well posed) or
equals one for every alpha (it is ill posed).  We tabulate it for the
operator gallery.
"""
from lavreg.grid import make_uniform_grid
from lavreg.linops import (
    cesaro_operator,
    classify_posedness,
    estimate_resolvent_norm,
    identity_operator,
    multiplication_operator,
    skew_example,
    volterra_operator,
)

grid = make_uniform_grid(500)
alphas = [1e-1, 1e-2, 1e-3]
gallery = {
    "identity": identity_operator(grid),
    "multiply by t+1": multiplication_operator(grid, "t+1"),
    "2x2 rotation": skew_example(),
    "Volterra": volterra_operator(grid),
    "Cesaro": cesaro_operator(grid),
    "multiply by t": multiplication_operator(grid, "t"),
}

print(f"{'operator':18s}" + "".join(f"  a={a:<8g}" for a in alphas) + "  verdict")
for name, A in gallery.items():
    rep = classify_posedness(A, alphas)
    ratios = [a * r for a, r in rep.resolvent_norms]
    print(f"{name:18s}" + "".join(f"  {r:<10.4f}" for r in ratios) + f"  {rep.classification}")

# The ill-posed identity is sharp on the grid as well: for the Volterra
# operator the resolvent norm is 1/alpha to many digits.
print("\nVolterra, alpha = 1e-2: ||(A + alpha I)^-1|| =", estimate_resolvent_norm(gallery["Volterra"], 1e-2))
print("plateau constant K for the rotation:", classify_posedness(gallery["2x2 rotation"], alphas).K)
