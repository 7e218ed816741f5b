"""Problem, contour and quadrature types shared by the rest of the package."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.sparse as sp

MatrixLike = Union[np.ndarray, sp.spmatrix, sp.sparray]


@dataclass(frozen=True)
class ParametricProblem:
    """Black-box matrix-valued function ``L(lam, p)``.

    Parameters
    ----------
    matrix : callable
        ``matrix(lam, p)`` returns a square complex matrix. Dense arrays are
        the norm; scipy sparse matrices are accepted too and are factorized
        with a sparse LU by the contour solver.
    param_range : (float, float)
        Closed parameter interval ``[p_min, p_max]``.
    size : int or callable, optional
        Matrix size, possibly depending on ``p``. Inferred by evaluating the
        matrix when omitted.
    """

    matrix: Callable[[complex, float], MatrixLike]
    param_range: tuple[float, float]
    size: Union[int, Callable[[float], int], None] = None
    name: str = ""

    def __post_init__(self):
        lo, hi = (float(v) for v in self.param_range)
        if not lo <= hi:
            raise ValueError(f"empty parameter range [{lo}, {hi}]")
        object.__setattr__(self, "param_range", (lo, hi))

    def eval(self, lam: complex, p: float) -> MatrixLike:
        return self.matrix(complex(lam), float(p))

    def dim(self, p: float) -> int:
        if self.size is None:
            return int(self.eval(0j, p).shape[0])
        if callable(self.size):
            return int(self.size(float(p)))
        return int(self.size)

    def in_range(self, p: float) -> bool:
        lo, hi = self.param_range
        return lo <= p <= hi


@dataclass(frozen=True)
class Contour:
    """Circle of given ``radius`` around ``center``."""

    center: complex
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"contour radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))

    def contains(self, lam, margin: float = 0.0):
        return contains(self, lam, margin)

    def nodes(self, count: int) -> "QuadratureRule":
        return contour_nodes(self, count)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    count: int
    contour: Contour = field(repr=False)

    def apply(self, values) -> complex:
        """Trapezoidal approximation of ``(2 pi i)^-1`` times the contour integral."""
        return complex(np.sum(self.weights * np.asarray(values)))


def contour_nodes(contour: Contour, count: int) -> QuadratureRule:
    """Uniform trapezoidal rule on a circle.

    Nodes are ``z_j = z0 + r exp(2 pi i j / N)`` for ``j = 1..N`` and the weights
    ``(z_j - z0) / N`` discretize ``(2 pi i)^-1 * integral f(z) dz``.
    """
    count = int(count)
    if count < 4:
        raise ValueError(f"need at least 4 quadrature nodes, got {count}")
    j = np.arange(1, count + 1)
    offsets = contour.radius * np.exp(2j * np.pi * j / count)
    nodes = contour.center + offsets
    return QuadratureRule(nodes=nodes, weights=offsets / count, count=count, contour=contour)


def contains(contour: Contour, lam, margin: float = 0.0):
    """True where ``|lam - z0| < r (1 - margin)``; vectorized over ``lam``."""
    if not 0.0 <= margin < 1.0:
        raise ValueError(f"margin must lie in [0, 1), got {margin}")
    inside = np.abs(np.asarray(lam) - contour.center) < contour.radius * (1.0 - margin)
    return bool(inside) if inside.ndim == 0 else inside
