"""
Eigenvalues of a discretized delayed heat equation
==================================================

u_t = kappa u_xx - 0.1 u - 0.05 u(t - 1) - p u(t - 2) on (0, pi) with
Dirichlet ends gives the sparse nonlinear problem

    L(lam, p) = -lam I + A0 - 0.05 e^{-lam} I - p e^{-2 lam} I.

Each snapshot needs 1000 sparse solves with 499 x 499 matrices, so this demo
uses a small discretization (M = 100) and a looser tolerance to finish in
about a minute. Set M = 500 and eps = 1e-2 for the full-size run.
"""
import time

import numpy as np

from eigtrack import AdaptiveConfig, BeynConfig, Contour, InterpolationConfig, delayed_heat, run_adaptive

M = 100
problem = delayed_heat(M)
contour = Contour(-1, 1)
config = AdaptiveConfig(eps=5e-2, beyn=BeynConfig(K=5, m=30, n_quad=400),
                        interp=InterpolationConfig("spline", 3))

t0 = time.perf_counter()
model, report = run_adaptive(problem, contour, config)
print(f"n = {problem.size}: {report.stop_reason} after {report.iterations} iterations, "
      f"{len(report.final_grid)} grid points, {time.perf_counter() - t0:.0f} s")

# How many eigenvalues the model predicts inside the disc along the range
for p in np.linspace(-0.1, 0.1, 9):
    vals = model.values_at(p)
    print(f"p = {p:+.3f}: {len(vals):2d} eigenvalues, rightmost real part {vals.real.max():+.4f}")

# Rightmost eigenvalue decides stability of the delay equation
ps = np.linspace(-0.1, 0.1, 201)
right = np.array([model.values_at(p).real.max() for p in ps])
print(f"rightmost real part stays in [{right.min():.4f}, {right.max():.4f}]")
