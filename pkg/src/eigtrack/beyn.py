"""Contour-integral (Beyn) eigensolver for ``lam -> L(lam, p)`` at fixed ``p``."""
from __future__ import annotations

import logging
import struct
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import Contour, ParametricProblem, contour_nodes

logger = logging.getLogger(__name__)

# dense problems up to this size get exact singular values in the residual check
DENSE_SVD_LIMIT = 300
NEAR_BOUNDARY = 1e-3
# singular values of B0 below this multiple of eps * (summand size) are round-off
ROUNDOFF_FACTOR = 100.0


class QuadratureBreakdownError(RuntimeError):
    """``L(z_j, p)`` is (numerically) singular at a quadrature node."""

    def __init__(self, node: complex, p: float | None = None, detail: str = ""):
        self.node = complex(node)
        self.p = p
        msg = f"L(z, p) is singular at quadrature node z = {self.node!r}"
        if p is not None:
            msg += f" (p = {p!r})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class RankSaturationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BeynConfig:
    K: int = 1
    m: int = 10
    n_quad: int = 64
    rank_rtol: float = 1e-10
    residual_tol: float = 1e-6
    inside_margin: float = 0.0
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.K < 1 or self.m < 1:
            raise ValueError("K and m must be positive")
        if self.n_quad < 4:
            raise ValueError("n_quad must be at least 4")
        if not 0.0 <= self.inside_margin < 1.0:
            raise ValueError("inside_margin must lie in [0, 1)")
        if self.rank_rtol <= 0 or self.residual_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class EigenSnapshot:
    """Certified eigenvalues at one parameter value, sorted by (real, imag)."""

    p: float
    eigenvalues: np.ndarray
    residuals: np.ndarray
    contour: Contour
    near_boundary: np.ndarray = field(default=None)
    rank_saturated: bool = False

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=complex).reshape(-1)
        object.__setattr__(self, "eigenvalues", ev)
        object.__setattr__(self, "residuals", np.asarray(self.residuals, dtype=float).reshape(-1))
        if self.near_boundary is None:
            nb = np.zeros(ev.size, dtype=bool)
        else:
            nb = np.asarray(self.near_boundary, dtype=bool).reshape(-1)
        object.__setattr__(self, "near_boundary", nb)
        object.__setattr__(self, "p", float(self.p))

    def __len__(self):
        return self.eigenvalues.size


def probe_matrix(n: int, m: int, seed: int, p: float) -> np.ndarray:
    """Seeded complex Gaussian ``n x m`` probe; the stream is keyed by ``(seed, p)``."""
    lo, hi = struct.unpack("<II", struct.pack("<d", float(p) + 0.0))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), lo, hi]))
    return (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2.0)


def _solve_at_node(L, R, node, p):
    if sp.issparse(L):
        try:
            lu = spla.splu(sp.csc_matrix(L, dtype=complex))
        except RuntimeError as exc:
            raise QuadratureBreakdownError(node, p, str(exc)) from None
        piv = np.abs(lu.U.diagonal())
        if piv.size and not piv.min() > 10 * np.finfo(float).eps * piv.max():
            raise QuadratureBreakdownError(node, p, f"pivot ratio {piv.min() / piv.max():.2e}")
        X = lu.solve(np.asarray(R, dtype=complex))
    else:
        L = np.asarray(L, dtype=complex)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(L, check_finite=False)
        gecon, = sla.get_lapack_funcs(("gecon",), (lu,))
        anorm = np.linalg.norm(L, 1)
        rcond, _ = gecon(lu, anorm, norm="1")
        if not rcond > 10 * np.finfo(float).eps:
            raise QuadratureBreakdownError(node, p, f"reciprocal condition {rcond:.2e}")
        X = sla.lu_solve((lu, piv), R, check_finite=False)
    if not np.all(np.isfinite(X)):
        raise QuadratureBreakdownError(node, p, "non-finite solution")
    return X


def moments(problem: ParametricProblem, p: float, contour: Contour, config: BeynConfig,
            scaled: bool = False, probe: np.ndarray | None = None, with_scale: bool = False):
    """Trapezoidal approximations of the ``2K`` contour moments.

    ``A_k = N^-1 sum_j (z_j - z0) f_k(z_j) L(z_j, p)^-1 R`` with ``f_k(z) = z^k``,
    or ``((z - z0) / r)^k`` when ``scaled`` is set (better conditioned when the
    contour is far from the origin or large). One factorization per node is
    shared by all moments and all probe columns. With ``with_scale`` the sum
    of the summand norms is returned as well.
    """
    rule = contour_nodes(contour, config.n_quad)
    R = probe if probe is not None else probe_matrix(problem.dim(p), config.m, config.seed, p)

    def node_solve(z):
        return _solve_at_node(problem.eval(z, p), R, z, p)

    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            sols = list(pool.map(node_solve, rule.nodes))
    else:
        sols = [node_solve(z) for z in rule.nodes]

    base = (rule.nodes - contour.center) / contour.radius if scaled else rule.nodes
    powers = base[:, None] ** np.arange(2 * config.K)[None, :]  # (N, 2K)
    coeff = rule.weights[:, None] * powers
    stacked = np.stack(sols)  # (N, n, m)
    As = [np.tensordot(coeff[:, k], stacked, axes=(0, 0)) for k in range(2 * config.K)]
    if with_scale:
        # size of the summands; cancellation below eps times this is round-off
        scale = float(np.sum(np.abs(rule.weights) * np.linalg.norm(stacked, axis=(1, 2))))
        return As, scale
    return As


def hankel_pair(As: list[np.ndarray], K: int) -> tuple[np.ndarray, np.ndarray]:
    B0 = np.block([[As[r + s] for s in range(K)] for r in range(K)])
    B1 = np.block([[As[r + s + 1] for s in range(K)] for r in range(K)])
    return B0, B1


def relative_residual(L) -> float:
    """Smallest over largest singular value of ``L``."""
    if not sp.issparse(L) and L.shape[0] <= DENSE_SVD_LIMIT:
        s = sla.svdvals(np.asarray(L, dtype=complex), check_finite=False)
        return float(s[-1] / s[0]) if s[0] > 0 else 0.0
    return _estimated_residual(L)


def _estimated_residual(L, iters: int = 12) -> float:
    n = L.shape[0]
    x0 = np.cos(np.arange(n) + 1.0) + 1j * np.sin(0.5 * np.arange(n))
    x0 /= np.linalg.norm(x0)
    if sp.issparse(L):
        L = sp.csc_matrix(L, dtype=complex)
        try:
            lu = spla.splu(L)
        except RuntimeError:
            return 0.0
        solve, solve_h = lu.solve, (lambda b: lu.solve(b, trans="H"))
        LH = L.conj().T.tocsr()
    else:
        L = np.asarray(L, dtype=complex)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            fac = sla.lu_factor(L, check_finite=False)
        solve = lambda b: sla.lu_solve(fac, b, check_finite=False)
        solve_h = lambda b: sla.lu_solve(fac, b, trans=2, check_finite=False)
        LH = L.conj().T
    x, big = x0.copy(), 0.0
    for _ in range(iters):
        y = LH @ (L @ x)
        big = np.linalg.norm(y)
        if big == 0:
            return 0.0
        x = y / big
    x, inv = x0.copy(), 0.0
    for _ in range(iters):
        y = solve_h(solve(x))
        inv = np.linalg.norm(y)
        if not np.isfinite(inv):
            return 0.0
        x = y / inv
    # big ~ sigma_max^2, inv ~ sigma_min^-2
    return float(1.0 / np.sqrt(inv * big)) if inv > 0 else 0.0


def solve_nonparametric(problem: ParametricProblem, p: float, contour: Contour,
                        config: BeynConfig = BeynConfig()) -> EigenSnapshot:
    """All eigenvalues of ``L(., p)`` inside ``contour``, repeated by multiplicity.

    Candidates from the block-Hankel reduction are kept only if they pass the
    inside test (``config.inside_margin``) and the relative residual test.
    An empty snapshot is a valid outcome.
    """
    p = float(p)
    As, scale = moments(problem, p, contour, config, scaled=True, with_scale=True)
    B0, B1 = hankel_pair(As, config.K)
    U, s, Vh = sla.svd(B0, full_matrices=False, check_finite=False)
    floor = ROUNDOFF_FACTOR * np.finfo(float).eps * scale
    if s.size == 0 or not s[0] > floor:
        return EigenSnapshot(p, np.empty(0, complex), np.empty(0), contour)
    rank = int(np.count_nonzero(s > max(config.rank_rtol * s[0], floor)))
    saturated = rank >= config.K * config.m
    if saturated:
        warnings.warn(f"Hankel rank saturated ({rank} = K*m) at p = {p!r}; "
                      "increase K or m", RankSaturationWarning, stacklevel=2)
    reduced = U[:, :rank].conj().T @ B1 @ Vh[:rank].conj().T / s[:rank]
    mu = sla.eigvals(reduced, check_finite=False)
    cand = contour.center + contour.radius * mu
    cand = cand[contour.contains(cand, config.inside_margin)] if cand.size else cand

    keep, res = [], []
    for lam in cand:
        r = relative_residual(problem.eval(lam, p))
        if r <= config.residual_tol:
            keep.append(lam)
            res.append(r)
        else:
            logger.debug("discarding candidate %r at p=%r (residual %.2e)", lam, p, r)
    if not keep:
        return EigenSnapshot(p, np.empty(0, complex), np.empty(0), contour, rank_saturated=saturated)
    keep, res = np.array(keep), np.array(res)
    order = np.lexsort((keep.imag, keep.real))
    keep, res = keep[order], res[order]
    near = contour.radius - np.abs(keep - contour.center) < NEAR_BOUNDARY * contour.radius
    return EigenSnapshot(p, keep, res, contour, near_boundary=near, rank_saturated=saturated)
