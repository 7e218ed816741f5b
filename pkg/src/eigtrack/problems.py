"""Built-in benchmark problems and a loader for split-form problems on disk.

A split-form problem is ``L(lam, p) = sum_k g_k(lam, p) A_k`` with constant
matrices ``A_k`` (Matrix Market files) and scalar functions ``g_k`` written
in a small expression language, one term per manifest line::

    # comment
    alpha = 108.8774
    1                              | A0.mtx
    p**2 * lam                     | A1.mtx
    1j * p * sqrt(lam)             | A2.mtx
    1j * p * sqrt(lam - alpha**2)  | A3.mtx

Each term is a product of constants, ``lam**a``, ``p**b`` (non-negative
integer powers), ``exp(c * lam)`` and ``sqrt(lam - c)``. ``λ`` may be used for
``lam``. Square roots use the principal branch.
"""
from __future__ import annotations

import ast
import cmath
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp

from .core import ParametricProblem

KAPPA = 0.02


class ManifestError(ValueError):
    """A split-form manifest or one of its matrix files could not be loaded."""


def toy_bifurcation(param_range=(-1.0, 1.0)) -> ParametricProblem:
    """``[[lam, p], [1, lam]]``: eigenvalues ``+-sqrt(p)``, order-2 bifurcation at 0."""
    def matrix(lam, p):
        return np.array([[lam, p], [1.0, lam]], dtype=complex)
    return ParametricProblem(matrix, tuple(param_range), size=2, name="toy")


def cubic_companion(param_range=(-50.0, 50.0)) -> ParametricProblem:
    """Companion pencil whose eigenvalues are the roots of
    ``lam**3 + (p - 2) lam + (2 p - 1)``.
    """
    eye = np.eye(3)

    def matrix(lam, p):
        A = np.array([[0.0, 0.0, 1.0 - 2.0 * p],
                      [1.0, 0.0, 2.0 - p],
                      [0.0, 1.0, 0.0]], dtype=complex)
        return A - lam * eye
    return ParametricProblem(matrix, tuple(param_range), size=3, name="cubic")


def cubic_polynomial(lam, p):
    return lam ** 3 + (p - 2.0) * lam + (2.0 * p - 1.0)


def laplacian_1d(M: int) -> sp.csc_matrix:
    """``kappa (M/pi)^2 tridiag(-1, 2, -1)`` of size ``M - 1``."""
    n = M - 1
    off = -np.ones(n - 1)
    T = sp.diags([off, 2.0 * np.ones(n), off], [-1, 0, 1], format="csc")
    return KAPPA * (M / np.pi) ** 2 * T


def delay_shift(lam, p):
    """Scalar part ``lam + 0.1 + 0.05 exp(-lam) + p exp(-2 lam)``."""
    return lam + 0.1 + 0.05 * np.exp(-lam) + p * np.exp(-2.0 * lam)


def delayed_heat(M: int = 500, param_range=(-0.1, 0.1), sparse: bool = True) -> ParametricProblem:
    """Finite-difference heat equation with delayed feedback, size ``M - 1``.

    Returns sparse CSC matrices unless ``sparse=False``.
    """
    if M < 3:
        raise ValueError("M must be at least 3")
    T = laplacian_1d(M).astype(complex)
    eye = sp.identity(M - 1, dtype=complex, format="csc")
    Td = T.toarray() if not sparse else None

    def matrix(lam, p):
        s = delay_shift(lam, p)
        if sparse:
            return (T + s * eye).tocsc()
        out = Td.copy()
        out[np.diag_indices_from(out)] += s
        return out
    return ParametricProblem(matrix, tuple(param_range), size=M - 1, name=f"delayed_heat(M={M})")


def laplacian_modes(M: int) -> np.ndarray:
    """Eigenvalues ``(M/pi)^2 (2 - 2 cos(k pi / M))``, ``k = 1..M-1``, of the unscaled Laplacian."""
    k = np.arange(1, M)
    return (M / np.pi) ** 2 * (2.0 - 2.0 * np.cos(k * np.pi / M))


def constant_spectrum(values=(1.0, 2.0), param_range=(0.0, 1.0)) -> ParametricProblem:
    """``diag(values) - lam I``: the same spectrum for every ``p``."""
    D = np.diag(np.asarray(values, dtype=complex))
    eye = np.eye(D.shape[0])

    def matrix(lam, p):
        return D - lam * eye
    return ParametricProblem(matrix, tuple(param_range), size=D.shape[0], name="constant")


# ---------------------------------------------------------------- split form

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_LAM_NAMES = ("lam", "λ")


def _const(node, consts):
    """Evaluate a constant sub-expression (no lam or p)."""
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) \
            and not isinstance(node.value, bool):
        return complex(node.value)
    if isinstance(node, ast.Name):
        if node.id in consts:
            return consts[node.id]
        if node.id == "pi":
            return complex(math.pi)
        if node.id == "i":
            return 1j
        raise ManifestError(f"unknown name {node.id!r} in constant expression")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _const(node.operand, consts)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_const(node.left, consts), _const(node.right, consts))
    raise ManifestError(f"not a constant expression: {ast.unparse(node)!r}")


def _mentions(node, names) -> bool:
    return any(isinstance(n, ast.Name) and n.id in names for n in ast.walk(node))


def _int_power(node, consts) -> int:
    v = _const(node, consts)
    if v.imag != 0 or v.real != int(v.real) or v.real < 0:
        raise ManifestError(f"power must be a non-negative integer, got {ast.unparse(node)!r}")
    return int(v.real)


def _lam_coefficient(node, consts):
    """``c`` when ``node`` is ``c * lam`` (or ``lam``, ``-lam``, ``lam * c``)."""
    if isinstance(node, ast.Name) and node.id in _LAM_NAMES:
        return 1.0 + 0j
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        return -_lam_coefficient(node.operand, consts)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        if _mentions(node.left, _LAM_NAMES) and not _mentions(node.right, _LAM_NAMES):
            return _lam_coefficient(node.left, consts) * _const(node.right, consts)
        if _mentions(node.right, _LAM_NAMES) and not _mentions(node.left, _LAM_NAMES):
            return _const(node.left, consts) * _lam_coefficient(node.right, consts)
    raise ManifestError(f"exp argument must be c*lam, got {ast.unparse(node)!r}")


def _sqrt_shift(node, consts):
    """``c`` when ``node`` is ``lam - c`` / ``lam + c`` / ``lam``."""
    if isinstance(node, ast.Name) and node.id in _LAM_NAMES:
        return 0j
    if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Sub, ast.Add)) \
            and isinstance(node.left, ast.Name) and node.left.id in _LAM_NAMES \
            and not _mentions(node.right, _LAM_NAMES + ("p",)):
        c = _const(node.right, consts)
        return c if isinstance(node.op, ast.Sub) else -c
    raise ManifestError(f"sqrt argument must be lam - c, got {ast.unparse(node)!r}")


def _factors(node):
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        return _factors(node.left) + _factors(node.right)
    return [node]


def _compile_factor(node, consts) -> Callable[[complex, float], complex]:
    if not _mentions(node, _LAM_NAMES + ("p",)):
        c = _const(node, consts)
        return lambda lam, p: c
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        inner = _compile_factor(node.operand, consts)
        return lambda lam, p: -inner(lam, p)
    if isinstance(node, ast.Name):
        if node.id in _LAM_NAMES:
            return lambda lam, p: lam
        if node.id == "p":
            return lambda lam, p: p
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow) and isinstance(node.left, ast.Name):
        k = _int_power(node.right, consts)
        if node.left.id in _LAM_NAMES:
            return lambda lam, p: lam ** k
        if node.left.id == "p":
            return lambda lam, p: p ** k
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
        parts = [_compile_factor(f, consts) for f in _factors(node)]
        return lambda lam, p: math.prod(f(lam, p) for f in parts)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and len(node.args) == 1 \
            and not node.keywords:
        arg = node.args[0]
        if node.func.id == "exp":
            c = _lam_coefficient(arg, consts)
            return lambda lam, p: cmath.exp(c * lam)
        if node.func.id == "sqrt":
            c = _sqrt_shift(arg, consts)
            return lambda lam, p: cmath.sqrt(lam - c)
    raise ManifestError(f"unsupported scalar term {ast.unparse(node)!r}")


def parse_scalar(expr: str, constants: dict | None = None) -> Callable[[complex, float], complex]:
    """Compile a scalar coefficient ``g(lam, p)`` from the manifest grammar."""
    consts = {k: complex(v) for k, v in (constants or {}).items()}
    src = expr.replace("^", "**").strip()
    try:
        tree = ast.parse(src, mode="eval").body
    except SyntaxError as exc:
        raise ManifestError(f"cannot parse scalar expression {expr!r}: {exc.msg}") from None
    parts = [_compile_factor(f, consts) for f in _factors(tree)]
    if len(parts) == 1:
        return parts[0]
    return lambda lam, p: math.prod(f(lam, p) for f in parts)


@dataclass(frozen=True)
class SplitFormProblem(ParametricProblem):
    """``ParametricProblem`` assembled as ``sum_k g_k(lam, p) A_k``."""

    terms: tuple = ()
    expressions: tuple = ()
    constants: dict = field(default_factory=dict)


def split_form(terms, param_range, expressions=(), constants=None, name="split_form") -> SplitFormProblem:
    """Problem from ``[(g_k, A_k), ...]`` with callables ``g_k(lam, p)``."""
    terms = tuple((g, m if sp.issparse(m) else np.asarray(m, dtype=complex)) for g, m in terms)
    if not terms:
        raise ManifestError("a split-form problem needs at least one term")
    sizes = {m.shape for _, m in terms}
    if len(sizes) != 1 or any(a != b for a, b in sizes):
        raise ManifestError(f"matrices must be square and share one size, got {sorted(sizes)}")
    n = terms[0][1].shape[0]
    sparse = all(sp.issparse(m) for _, m in terms)
    if not sparse:
        terms = tuple((g, m.toarray() if sp.issparse(m) else m) for g, m in terms)
    else:
        terms = tuple((g, sp.csc_matrix(m, dtype=complex)) for g, m in terms)

    def matrix(lam, p):
        out = None
        for g, A in terms:
            part = g(lam, p) * A
            out = part if out is None else out + part
        return out.tocsc() if sparse else out

    return SplitFormProblem(matrix, tuple(param_range), size=n, name=name, terms=terms,
                            expressions=tuple(expressions), constants=dict(constants or {}))


def load_split_form(manifest, param_range=None) -> SplitFormProblem:
    """Read a manifest (see module docstring) and its Matrix Market files.

    Matrix paths are relative to the manifest. A ``param_range = a, b`` line may
    set the parameter range; the argument overrides it. Sparse files stay
    sparse when every term is sparse.
    """
    path = Path(manifest)
    if not path.is_file():
        raise ManifestError(f"manifest not found: {path}")
    consts: dict[str, complex] = {}
    exprs, mats = [], []
    rng = None
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "|" not in line:
            if "=" not in line:
                raise ManifestError(f"{path}:{lineno}: expected 'expression | matrix' or 'name = value'")
            name, value = (s.strip() for s in line.split("=", 1))
            if name == "param_range":
                lo, hi = (float(v) for v in value.replace("[", "").replace("]", "").split(","))
                rng = (lo, hi)
                continue
            if not name.isidentifier() or name in _LAM_NAMES + ("p",):
                raise ManifestError(f"{path}:{lineno}: bad constant name {name!r}")
            try:
                consts[name] = _const(ast.parse(value.replace("^", "**"), mode="eval").body, consts)
            except SyntaxError:
                raise ManifestError(f"{path}:{lineno}: cannot parse constant {value!r}") from None
            continue
        expr, mfile = (s.strip() for s in line.rsplit("|", 1))
        mpath = (path.parent / mfile)
        if not mpath.is_file():
            raise ManifestError(f"{path}:{lineno}: matrix file not found: {mpath}")
        try:
            g = parse_scalar(expr, consts)
        except ManifestError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from None
        try:
            A = scipy.io.mmread(str(mpath))
        except Exception as exc:  # scipy raises assorted types on malformed files
            raise ManifestError(f"{path}:{lineno}: cannot read {mpath}: {exc}") from None
        exprs.append(expr)
        mats.append((g, A))
    if param_range is not None:
        rng = tuple(param_range)
    if rng is None:
        rng = (0.0, 1.0)
    return split_form(mats, rng, expressions=exprs, constants=consts, name=path.stem)


BUILTIN = {
    "toy": toy_bifurcation,
    "cubic": cubic_companion,
    "delayed_heat": delayed_heat,
    "constant": constant_spectrum,
}
