"""
Adaptive tracking of the roots of a cubic
=========================================

The companion matrix of lam^3 + (p - 2) lam + (2p - 1) has three
eigenvalues that move in and out of the disc |lam| < 4 as p runs over
[-50, 50]. On the way they cross (p near -21.7) and all three meet near
p = 0. Starting from only the two end points, the refinement loop adds
midpoints where the predicted eigenvalues miss the computed ones by more
than eps.
"""
import numpy as np

from eigtrack import AdaptiveConfig, BeynConfig, Contour, InterpolationConfig, cubic_companion, run_adaptive

problem = cubic_companion()
contour = Contour(0, 4)
config = AdaptiveConfig(eps=1e-2, beyn=BeynConfig(K=1, m=5, n_quad=25),
                        interp=InterpolationConfig("linear"))


def progress(iteration, points, error):
    print(f"  iteration {iteration:2d}: {points:3d} grid points, worst midpoint error {error:.2e}")


model, report = run_adaptive(problem, contour, config, progress=progress)
print(f"\n{report.stop_reason} after {report.iterations} iterations, "
      f"{len(report.final_grid)} collocation points, {report.snapshots_computed} solves")

# Where bifurcations were flagged and how they are modeled
for g in model.groups:
    lo, hi = g.p_range
    print(f"group of order {g.order} on [{lo:.2f}, {hi:.2f}]")

# Compare against numpy's polynomial roots on a fine grid
worst = 0.0
for p in np.linspace(-50, 50, 401):
    exact = np.roots([1, 0, p - 2, 2 * p - 1])
    exact = exact[np.abs(exact) < 4]
    pred = model.values_at(p)
    if len(pred) and len(exact):
        worst = max(worst, max(np.abs(exact - z).min() for z in pred))
print(f"largest distance from a predicted value to an exact root: {worst:.1e}")
