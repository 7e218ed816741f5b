"""
Two eigenvalues meeting at a square-root branch point
=====================================================

L(lam, p) = [[0, 1], [p, 0]] - lam I has eigenvalues +-sqrt(p). Both meet
at p = 0, where no smooth labeling of the two curves exists. Two snapshots
at the ends of [-1, 1] are enough: the matching flags the pair, and the
model represents it implicitly through the characteristic polynomial
lam^2 - p, which it recovers exactly. Right at p = 0 the double root is
only resolved to about sqrt(machine epsilon), as for any defective eigenvalue.
"""
import numpy as np

from eigtrack import BeynConfig, Contour, build_model, solve_nonparametric, toy_bifurcation

problem = toy_bifurcation()
contour = Contour(0, 3)
snaps = [solve_nonparametric(problem, p, contour, BeynConfig(n_quad=64, m=4)) for p in (-1.0, 1.0)]
for s in snaps:
    print(f"p = {s.p:+.0f}: eigenvalues {np.round(s.eigenvalues, 12)}")

model = build_model(snaps)
g = model.groups[0]
print(f"\n{len(model.groups)} bifurcation group of order {g.order} over p in {g.p_range}")

# The implicit surrogate against the exact branches
for p in (-0.5, -1e-4, 0.0, 0.3):
    pred = model.values_at(p)
    root = np.sqrt(complex(p))
    err = np.abs(np.abs(pred) - abs(root)).max() + abs(pred.sum())
    print(f"p = {p:+.4f}  model {np.round(pred, 6)}  error {err:.1e}")
