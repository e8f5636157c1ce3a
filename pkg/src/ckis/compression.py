"""Destructive MMD orthogonal matching pursuit over embedding dictionaries.

Atoms are removed greedily while the post-refit MMD to the input embedding
stays within the budget.  Removal scores use the Schur-complement identity

    |beta - P_{D \\ j} beta|^2 = |beta - P_D beta|^2 + w_j^2 / [K_DD^{-1}]_jj

where ``w = K_DD^{-1} K_DT g_T`` is the refit on the current dictionary, so
one Cholesky factorization scores every candidate in a sweep.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import _backend
from .embedding import Embedding, mmd
from .errors import InvalidArgumentError
from .kernel_core import as_points, cross_gram, gram, pd_solve

__all__ = [
    "CompressionReport",
    "refit",
    "mmd_omp",
    "merge_duplicates",
    "subspace_distance",
]

DUPLICATE_TOL = 1e-12


@dataclass(frozen=True)
class CompressionReport:
    initial_order: int
    final_order: int
    removed_indices: tuple
    achieved_mmd: float
    jitter_used: float
    budget: float


def refit(target, D):
    """Least-squares coefficients of ``target`` projected onto span k(D, .).

    Returns the minimizer ``g`` of ``|sum_s g[s] k(d_s, .) - target|_H``,
    i.e. the solution of ``K_DD g = K_DT g_T``.
    """
    D = as_points(D, target.kernel.dim)
    if len(D) == 0:
        raise InvalidArgumentError("refit needs a non-empty dictionary")
    if len(target) == 0:
        return np.zeros(len(D))
    rhs = cross_gram(target.kernel, D, target.points) @ target.coeffs
    return pd_solve(gram(target.kernel, D), rhs)


def subspace_distance(k, x, D):
    """RKHS distance from ``k(x, .)`` to ``span{k(d, .) : d in D}``."""
    D = as_points(D, k.dim)
    if len(D) == 0:
        raise InvalidArgumentError("subspace_distance needs a non-empty dictionary")
    x = as_points(np.asarray(x, dtype=np.float64).reshape(1, -1), k.dim)
    kx = cross_gram(k, D, x)[:, 0]
    coef = pd_solve(gram(k, D), kx)
    return math.sqrt(max(0.0, k.amplitude - float(kx @ coef)))


def merge_duplicates(target, tol=DUPLICATE_TOL):
    """Fold atoms closer than ``tol`` into their first occurrence.

    Returns ``(embedding, removed_indices)``; coefficients of merged atoms
    are summed.  The result has the same RKHS element up to ``tol``.
    """
    pts = target.points
    m = len(pts)
    if m < 2:
        return target, ()
    diff = pts[:, None, :] - pts[None, :, :]
    close = np.einsum("ijk,ijk->ij", diff, diff) < tol * tol
    np.fill_diagonal(close, False)
    if not close.any():
        return target, ()
    owner = np.arange(m)
    for i in range(m):
        if owner[i] != i:
            continue
        later = np.nonzero(close[i, i + 1:])[0] + i + 1
        for j in later:
            if owner[j] == j:
                owner[j] = i
    keep = np.nonzero(owner == np.arange(m))[0]
    coeffs = np.zeros(m)
    np.add.at(coeffs, owner, target.coeffs)
    removed = tuple(int(j) for j in np.nonzero(owner != np.arange(m))[0])
    return Embedding(pts[keep], coeffs[keep], target.kernel), removed


def _sweep(K, g, idx):
    """Refit on ``idx`` plus the diagonal of the inverse Gram."""
    Ksub = np.ascontiguousarray(K[np.ix_(idx, idx)])
    b = K[idx] @ g
    return _backend.kernels.elimination_sweep(Ksub, b)


def _scores(K, g, idx, w, inv_diag):
    c = g.copy()
    c[idx] -= w
    r2 = max(0.0, float(c @ K @ c))
    return np.sqrt(np.maximum(0.0, r2 + w * w / inv_diag))


def mmd_omp(target, budget):
    """Compress ``target`` to within MMD ``budget``.

    Each sweep scores every remaining atom by the post-refit MMD of the
    embedding with that atom removed, drops the lowest-scoring one (lowest
    index on ties) if its score is within budget, and refits.  Stops when
    the best score exceeds the budget or one atom remains.

    Returns
    -------
    (Embedding, CompressionReport)
        The compressed embedding satisfies ``mmd(target, result) <= budget``.
    """
    budget = float(budget)
    if not (budget >= 0.0):
        raise InvalidArgumentError(f"budget must be non-negative, got {budget}")
    m0 = len(target)
    if m0 == 0:
        raise InvalidArgumentError("cannot compress an empty embedding")

    work, merged = merge_duplicates(target)
    if merged and mmd(target, work) > budget:
        # near-duplicates that are not bit-identical can cost more than a zero budget
        work, merged = target, ()
    # map work indices back to positions in the caller's dictionary
    original = np.setdiff1d(np.arange(m0), np.asarray(merged, dtype=int))
    kernel = work.kernel
    T, g = work.points, work.coeffs
    K = gram(kernel, T) if budget > 0.0 else None

    idx = np.arange(len(T))
    current = work
    achieved = mmd(target, current) if merged else 0.0
    jitter = 0.0
    # with a zero budget only the exact merges above are admissible: any
    # refit removal carries roundoff and fails the verification below
    if len(idx) > 1 and budget > 0.0:
        w, inv_diag, lam = _sweep(K, g, idx)
        jitter = lam
        while len(idx) > 1:
            scores = _scores(K, g, idx, w, inv_diag)
            j = int(np.argmin(scores))
            if scores[j] > budget:
                break
            trial_idx = np.delete(idx, j)
            trial_w, trial_inv, trial_lam = _sweep(K, g, trial_idx)
            trial = Embedding(T[trial_idx], trial_w, kernel)
            r = mmd(target, trial)
            if r > budget:
                break
            idx, w, inv_diag = trial_idx, trial_w, trial_inv
            current, achieved = trial, r
            jitter = max(jitter, trial_lam)

    removed = sorted(set(merged) | set(int(i) for i in np.setdiff1d(original, original[idx])))
    report = CompressionReport(
        initial_order=m0,
        final_order=len(current),
        removed_indices=tuple(removed),
        achieved_mmd=achieved,
        jitter_used=jitter,
        budget=budget,
    )
    assert achieved <= budget, (achieved, budget)
    return current, report
