"""Kernel mean embeddings of weighted Dirac measures.

An embedding ``beta = sum_u g[u] k(d_u, .)`` is stored by its dictionary and
coefficients; all RKHS geometry reduces to Gram-matrix quadratic forms.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InvalidArgumentError
from .kernel_core import Kernel, as_points, cross_gram

__all__ = [
    "ParticleMeasure",
    "Embedding",
    "embed",
    "rkhs_inner",
    "rkhs_norm",
    "mmd",
    "append",
    "preimage",
]


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


def _check_coeffs(coeffs, m):
    if coeffs.shape != (m,):
        raise InvalidArgumentError(f"need {m} coefficients, got shape {coeffs.shape}")
    if not np.all(np.isfinite(coeffs)):
        raise InvalidArgumentError("coefficients must be finite")


@dataclass(frozen=True, eq=False)
class ParticleMeasure:
    """Weighted Dirac measure ``sum_u weights[u] * delta(points[u])``.

    Weights are unnormalized; the self-normalizing constant is their sum.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        w = _frozen(np.asarray(self.weights, dtype=np.float64).reshape(-1))
        _check_coeffs(w, len(pts))
        object.__setattr__(self, "points", _frozen(as_points(pts, pts.shape[1])))
        object.__setattr__(self, "weights", w)

    @classmethod
    def empty(cls, dim):
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def normalizer(self):
        """Sum of the current weights."""
        return float(self.weights.sum())

    def __len__(self):
        return len(self.weights)

    def __eq__(self, other):
        if not isinstance(other, ParticleMeasure):
            return NotImplemented
        return np.array_equal(self.points, other.points) and np.array_equal(self.weights, other.weights)


@dataclass(frozen=True, eq=False)
class Embedding:
    """Kernel mean embedding with dictionary ``points`` and ``coeffs``.

    Coefficients may be signed (least-squares refits do not preserve sign).
    The model order is ``len(self)``; zero coefficients are not pruned.
    """

    points: np.ndarray
    coeffs: np.ndarray
    kernel: Kernel = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.size == 0:
            pts = pts.reshape(0, self.kernel.dim)
        c = _frozen(np.asarray(self.coeffs, dtype=np.float64).reshape(-1))
        pts = as_points(pts, self.kernel.dim)
        _check_coeffs(c, len(pts))
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def empty(cls, kernel):
        return cls(np.zeros((0, kernel.dim)), np.zeros(0), kernel)

    @property
    def order(self):
        return len(self.coeffs)

    def __len__(self):
        return len(self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, Embedding):
            return NotImplemented
        return (
            self.kernel == other.kernel
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.coeffs, other.coeffs)
        )


def _same_kernel(a, b):
    if a.kernel != b.kernel:
        raise InvalidArgumentError(f"kernel mismatch: {a.kernel} vs {b.kernel}")


def embed(measure, kernel):
    """Embedding of ``measure``: same dictionary, coefficients = weights."""
    if len(measure) and measure.dim != kernel.dim:
        raise InvalidArgumentError("measure and kernel dimensions differ")
    return Embedding(measure.points, measure.weights, kernel)


def rkhs_inner(a, b):
    """``<a, b>_H = a.coeffs^T K_ab b.coeffs``."""
    _same_kernel(a, b)
    if len(a) == 0 or len(b) == 0:
        return 0.0
    K = cross_gram(a.kernel, a.points, b.points)
    return float(a.coeffs @ K @ b.coeffs)


def rkhs_norm(a):
    return math.sqrt(max(0.0, rkhs_inner(a, a)))


def _difference(a, b):
    """Coefficients of ``a - b`` over the union dictionary.

    Identical points are merged first, so shared atoms cancel exactly
    instead of through a difference of large quadratic forms.
    """
    pts = np.concatenate([a.points, b.points])
    c = np.concatenate([a.coeffs, -b.coeffs])
    uniq, inverse = np.unique(pts, axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inverse.reshape(-1), c)
    keep = merged != 0.0
    return uniq[keep], merged[keep]


def mmd(a, b):
    """Maximum mean discrepancy ``|a - b|_H`` (quadratic form clamped at 0)."""
    _same_kernel(a, b)
    pts, c = _difference(a, b)
    if len(c) == 0:
        return 0.0
    K = cross_gram(a.kernel, pts, pts)
    return math.sqrt(max(0.0, float(c @ K @ c)))


def append(beta, x, w):
    """Embedding of ``beta + w * k(x, .)``."""
    w = float(w)
    if not math.isfinite(w):
        raise InvalidArgumentError("weight must be finite")
    x = as_points(np.asarray(x, dtype=np.float64).reshape(1, -1), beta.kernel.dim)
    return Embedding(
        np.concatenate([beta.points, x]),
        np.append(beta.coeffs, w),
        beta.kernel,
    )


def preimage(beta):
    """Dirac measure whose embedding is ``beta`` (closed form: same atoms)."""
    return ParticleMeasure(beta.points, beta.coeffs)
