"""Pure numpy/scipy implementations of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable, or when
``CKIS_BACKEND=python`` is set.  Both backends share one contract and the
test-suite checks them against each other.
"""

import numpy as np
from scipy import linalg

from .errors import SingularSystemError

JITTER_LEVELS = (0.0, 1e-12, 1e-10, 1e-8)


def rbf_cross_gram(A, B, bandwidth, amplitude):
    """``amplitude * exp(-|a - b|^2 / (2 h^2))`` for every row pair of A, B."""
    # explicit differences, not the |a|^2 + |b|^2 - 2ab expansion: the latter
    # cancels badly for close points at small bandwidth
    diff = A[:, None, :] - B[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return amplitude * np.exp(sq * (-0.5 / (bandwidth * bandwidth)))


def cholesky_jitter(G):
    """Lower Cholesky factor of ``G + lam I`` with escalating ``lam``.

    Returns ``(L, lam)``.  Raises SingularSystemError when every level fails.
    """
    m = G.shape[0]
    scale = float(np.trace(G)) / m if m else 0.0
    for level in JITTER_LEVELS:
        lam = level * scale
        try:
            L = linalg.cholesky(G + lam * np.eye(m), lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, lam
    raise SingularSystemError(f"Cholesky failed for {m}x{m} system at maximum jitter")


def elimination_sweep(K, b):
    """Refit coefficients and diagonal of the inverse Gram in one factorization.

    Returns ``(w, inv_diag, lam)`` with ``(K + lam I) w = b`` and
    ``inv_diag[j] = [(K + lam I)^{-1}]_{jj}``.
    """
    L, lam = cholesky_jitter(K)
    w = linalg.cho_solve((L, True), b, check_finite=False)
    Linv = linalg.solve_triangular(
        L, np.eye(L.shape[0]), lower=True, check_finite=False
    )
    inv_diag = np.einsum("ij,ij->j", Linv, Linv)
    return w, inv_diag, lam
