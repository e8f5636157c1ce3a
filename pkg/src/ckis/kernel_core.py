"""Gaussian RBF kernel, Gram assembly and jittered positive-definite solves."""

from dataclasses import dataclass
import math

import numpy as np
from scipy import linalg

from . import _backend
from ._pykernels import cholesky_jitter
from .errors import InvalidArgumentError

__all__ = [
    "Kernel",
    "as_points",
    "evaluate",
    "gram",
    "cross_gram",
    "pd_solve",
]

NORMALIZATIONS = ("peak", "density")


@dataclass(frozen=True)
class Kernel:
    """Gaussian RBF kernel ``a * exp(-|x - y|^2 / (2 h^2))`` on R^p.

    Parameters
    ----------
    bandwidth : float
        Length scale ``h`` in particle-space units.
    dim : int
        Dimension ``p`` of the particle space.
    normalization : {'peak', 'density'}
        ``'peak'`` gives ``a = 1`` so that ``k(x, x) = 1``.  ``'density'``
        gives ``a = (2 pi h^2)^(-p/2)``, i.e. the kernel integrates to one in
        its second argument.  MMD values scale with ``sqrt(a)``, so the
        choice fixes the units of every compression budget.
    """

    bandwidth: float
    dim: int = 1
    normalization: str = "peak"

    def __post_init__(self):
        h = float(self.bandwidth)
        if not (math.isfinite(h) and h > 0):
            raise InvalidArgumentError(f"bandwidth must be positive and finite, got {self.bandwidth!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidArgumentError(f"dim must be a positive integer, got {self.dim!r}")
        if self.normalization not in NORMALIZATIONS:
            raise InvalidArgumentError(f"normalization must be one of {NORMALIZATIONS}")
        object.__setattr__(self, "bandwidth", h)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def amplitude(self):
        """Value of ``k(x, x)``."""
        if self.normalization == "peak":
            return 1.0
        return (2.0 * math.pi * self.bandwidth**2) ** (-0.5 * self.dim)

    def __call__(self, x, y):
        return evaluate(self, x, y)


def as_points(D, dim):
    """Coerce a point list to a C-contiguous ``(M, dim)`` float array.

    A flat sequence is accepted when ``dim == 1``.  Raises on wrong shape or
    non-finite entries.
    """
    arr = np.asarray(D, dtype=np.float64)
    if arr.ndim == 1 and dim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim == 1 and arr.size == dim:
        arr = arr.reshape(1, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise InvalidArgumentError(f"expected points of dimension {dim}, got array of shape {np.shape(D)}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("points must be finite")
    return np.ascontiguousarray(arr)


def _as_point(x, dim):
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape != (dim,):
        raise InvalidArgumentError(f"expected a point of dimension {dim}, got shape {np.shape(x)}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("point must be finite")
    return arr


def evaluate(k, x, y):
    """Kernel value ``k(x, y)`` for two single points."""
    x = _as_point(x, k.dim)
    y = _as_point(y, k.dim)
    d = x - y
    return k.amplitude * math.exp(-float(d @ d) / (2.0 * k.bandwidth**2))


def cross_gram(k, D, E):
    """Matrix of ``k(d_s, e_u)``, shape ``(len(D), len(E))``."""
    D = as_points(D, k.dim)
    E = as_points(E, k.dim)
    if len(D) == 0 or len(E) == 0:
        raise InvalidArgumentError("cross_gram needs non-empty point lists")
    return _backend.kernels.rbf_cross_gram(D, E, k.bandwidth, k.amplitude)


def gram(k, D):
    """Symmetric Gram matrix of a non-empty dictionary."""
    D = as_points(D, k.dim)
    if len(D) == 0:
        raise InvalidArgumentError("gram needs a non-empty dictionary")
    return _backend.kernels.rbf_cross_gram(D, D, k.bandwidth, k.amplitude)


def pd_solve(G, B, return_jitter=False):
    """Solve ``(G + lam I) X = B`` by Cholesky with escalating jitter.

    ``lam`` is 0 unless the factorization fails, then steps through
    1e-12, 1e-10, 1e-8 times ``trace(G) / M``.  Raises
    :class:`SingularSystemError` if all levels fail.  With
    ``return_jitter=True`` the applied ``lam`` is returned alongside ``X``.
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1] or G.shape[0] == 0:
        raise InvalidArgumentError(f"G must be a non-empty square matrix, got shape {G.shape}")
    B = np.asarray(B, dtype=np.float64)
    if B.shape[0] != G.shape[0]:
        raise InvalidArgumentError("row count of B must match G")
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(B))):
        raise InvalidArgumentError("G and B must be finite")
    L, lam = cholesky_jitter(G)
    X = linalg.cho_solve((L, True), B, check_finite=False)
    if return_jitter:
        return X, lam
    return X
