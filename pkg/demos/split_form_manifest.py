"""
Loading a problem from a split-form manifest
============================================

A manifest lists terms f_i(lam, p) | matrix.mtx, one per line. Here we
write two Matrix Market files and a manifest for the quadratic problem

    L(lam, p) = lam^2 I + p lam C + K,

with K = diag(1, 4, 9) and C the identity, and then track its eigenvalues
for p in [0, 1].
"""
import pathlib
import tempfile

import numpy as np
import scipy.io
import scipy.sparse as sp

from eigtrack import AdaptiveConfig, BeynConfig, Contour, load_split_form, run_adaptive

work = pathlib.Path(tempfile.mkdtemp())
scipy.io.mmwrite(work / "K.mtx", sp.diags([1.0, 4.0, 9.0]))
scipy.io.mmwrite(work / "I.mtx", sp.identity(3))
(work / "problem.txt").write_text("""\
# quadratic eigenproblem with damping p
param_range = 0, 1
lam^2 | I.mtx
p*lam | I.mtx
1     | K.mtx
""")

problem = load_split_form(work / "problem.txt")
print(f"{len(problem.terms)} terms, size {problem.size}, p in {problem.param_range}")

# Six eigenvalues of a 3 x 3 problem need K = 2 block moments.
# Every eigenvalue solves lam^2 + p lam + k^2 = 0 for k = 1, 2, 3
contour = Contour(0, 3.5)
model, report = run_adaptive(problem, contour, AdaptiveConfig(eps=1e-4, beyn=BeynConfig(K=2, m=8, n_quad=128)))
print(f"{report.stop_reason}: {len(report.final_grid)} grid points")
for p in (0.0, 0.37, 1.0):
    exact = np.concatenate([np.roots([1, p, k * k]) for k in (1, 2, 3)])
    exact = exact[np.abs(exact) < 3.5]
    pred = model.values_at(p)
    err = max(np.abs(exact - z).min() for z in pred)
    print(f"p = {p:.2f}: {len(pred)} values, max error {err:.1e}")
