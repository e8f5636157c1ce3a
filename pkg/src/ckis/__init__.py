"""Compressed kernelized importance sampling.

Streaming self-normalized importance sampling whose particle measure is kept
at finite size by projecting its kernel mean embedding onto a greedily pruned
dictionary (MMD orthogonal matching pursuit).
"""

from ._backend import BACKEND
from .compression import CompressionReport, merge_duplicates, mmd_omp, refit, subspace_distance
from .embedding import Embedding, ParticleMeasure, append, embed, mmd, preimage, rkhs_inner, rkhs_norm
from .errors import (
    AbsoluteContinuityError,
    CKISError,
    DegenerateNormalizerError,
    InvalidArgumentError,
    NonFiniteValueError,
    SingularSystemError,
)
from .kernel_core import Kernel, cross_gram, evaluate, gram, pd_solve

__version__ = "0.1.0"
