"""Streaming importance sampling, uncompressed and compressed.

``is_step`` grows the particle measure by one weighted atom per draw.
``ckis_step`` appends the new atom to the kernel mean embedding and then
compresses it with :func:`~ckis.compression.mmd_omp` under the budget of the
current step, so the model order stays bounded.
"""

from dataclasses import dataclass, field
import math
from typing import Any, Callable, Optional

import numpy as np

from .compression import mmd_omp
from .embedding import Embedding, ParticleMeasure, append, preimage
from .errors import (
    AbsoluteContinuityError,
    DegenerateNormalizerError,
    InvalidArgumentError,
    NonFiniteValueError,
)

__all__ = [
    "ParticleMeasure",
    "BudgetSchedule",
    "ProblemSpec",
    "Diagnostics",
    "EstimatorState",
    "draw",
    "is_update",
    "ckis_update",
    "is_step",
    "ckis_step",
    "estimate",
    "estimate_normalizer",
    "estimate_rho",
]

DEGENERATE_SUM = 1e-300


@dataclass(frozen=True)
class BudgetSchedule:
    """Per-step compression budget: constant ``eps`` or geometric ``alpha**n``."""

    kind: str
    value: float

    def __post_init__(self):
        v = float(self.value)
        if self.kind == "constant":
            if not (v >= 0.0 and math.isfinite(v)):
                raise InvalidArgumentError(f"constant budget must be finite and >= 0, got {self.value}")
        elif self.kind == "geometric":
            if not (0.0 < v < 1.0):
                raise InvalidArgumentError(f"geometric ratio must lie in (0, 1), got {self.value}")
        else:
            raise InvalidArgumentError(f"unknown schedule kind {self.kind!r}")
        object.__setattr__(self, "value", v)

    @classmethod
    def constant(cls, eps):
        return cls("constant", eps)

    @classmethod
    def geometric(cls, alpha):
        return cls("geometric", alpha)

    def epsilon(self, n):
        """Budget at step ``n >= 1``."""
        if self.kind == "constant":
            return self.value
        return self.value ** n

    def cumulative(self, n):
        """``sum_{m=1}^{n} epsilon(m)``."""
        if self.kind == "constant":
            return self.value * n
        a = self.value
        return a * (1.0 - a**n) / (1.0 - a)

    @property
    def total(self):
        """Limit of :meth:`cumulative` (infinite for a positive constant)."""
        if self.kind == "geometric":
            return self.value / (1.0 - self.value)
        return 0.0 if self.value == 0.0 else math.inf


@dataclass(frozen=True)
class ProblemSpec:
    """Target, proposal and test function of an integration problem.

    ``target_unnorm`` and ``proposal.density`` take a point of shape
    ``(dim,)`` and return a float; ``proposal.sample(rng)`` returns such a
    point.  ``reference`` optionally holds the exact value of the integral
    of ``test_fn`` under the normalized target.
    """

    name: str
    dim: int
    target_unnorm: Callable[[np.ndarray], float]
    proposal: Any
    test_fn: Callable[[np.ndarray], float]
    reference: Optional[float] = None
    reference_method: str = ""
    extras: dict = field(default_factory=dict)


@dataclass
class Diagnostics:
    model_order: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)
    achieved_mmd: list = field(default_factory=list)
    cumulative_budget: list = field(default_factory=list)
    jitter: list = field(default_factory=list)
    last_report: Any = None


class EstimatorState:
    """Mutable state of one sampling stream.

    Without a kernel/schedule the state runs plain streaming IS and keeps
    every particle.  With both it runs the compressed stream; the measure is
    then always the pre-image of the compressed embedding.
    """

    def __init__(self, dim, seed=None, kernel=None, schedule=None, batch=1, rng=None):
        if (kernel is None) != (schedule is None):
            raise InvalidArgumentError("kernel and schedule must be given together")
        if kernel is not None and kernel.dim != dim:
            raise InvalidArgumentError("kernel dimension does not match problem dimension")
        if int(batch) != batch or batch < 1:
            raise InvalidArgumentError(f"batch must be a positive integer, got {batch}")
        self.dim = int(dim)
        self.seed = seed
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self.kernel = kernel
        self.schedule = schedule
        self.batch = int(batch)
        self.step = 0
        self.weight_sum = 0.0
        self.weight_sq_sum = 0.0
        self.diagnostics = Diagnostics()
        self._cumulative = 0.0
        if self.compressed:
            self.embedding = Embedding.empty(kernel)
        else:
            self.embedding = None
            self._pts = np.empty((64, self.dim))
            self._w = np.empty(64)

    @property
    def compressed(self):
        return self.kernel is not None

    @property
    def model_order(self):
        return len(self.embedding) if self.compressed else self.step

    @property
    def points(self):
        if self.compressed:
            return self.embedding.points
        return self._pts[: self.step]

    @property
    def weights(self):
        if self.compressed:
            return self.embedding.coeffs
        return self._w[: self.step]

    @property
    def measure(self):
        if self.compressed:
            return preimage(self.embedding)
        return ParticleMeasure(self.points, self.weights)

    @property
    def rho_hat(self):
        """Variance ratio of all weights drawn so far; NaN before two steps."""
        if self.step < 2 or self.weight_sum == 0.0:
            return math.nan
        return self.step * self.weight_sq_sum / self.weight_sum**2

    def _push(self, x, g):
        n = self.step
        if n == len(self._w):
            self._pts = np.concatenate([self._pts, np.empty_like(self._pts)])
            self._w = np.concatenate([self._w, np.empty_like(self._w)])
        self._pts[n] = x
        self._w[n] = g


def draw(state, spec):
    """Draw one particle from the proposal and its importance weight."""
    x = np.asarray(spec.proposal.sample(state.rng), dtype=np.float64).reshape(spec.dim)
    dens = float(spec.proposal.density(x))
    if not dens > 0.0:
        raise AbsoluteContinuityError(f"proposal density is {dens} at drawn particle {x}")
    q = float(spec.target_unnorm(x))
    g = q / dens
    if not (math.isfinite(g) and g >= 0.0):
        raise NonFiniteValueError(f"importance weight {g} at particle {x}")
    return x, g


def _record_history(state, g):
    state.step += 1
    state.weight_sum += g
    state.weight_sq_sum += g * g


def is_update(state, x, g):
    """Append a pre-drawn particle to an uncompressed stream."""
    if state.compressed:
        raise InvalidArgumentError("is_update on a compressed state")
    state._push(x, g)
    _record_history(state, g)
    d = state.diagnostics
    d.model_order.append(state.step)
    d.epsilon.append(0.0)
    d.achieved_mmd.append(0.0)
    d.cumulative_budget.append(0.0)
    d.jitter.append(0.0)
    return state


def ckis_update(state, x, g):
    """Append a pre-drawn particle to a compressed stream and compress.

    Compression runs every ``state.batch`` steps with the budget of the
    current step; on other steps the atom is only appended.
    """
    if not state.compressed:
        raise InvalidArgumentError("ckis_update on an uncompressed state")
    _record_history(state, g)
    n = state.step
    beta = append(state.embedding, x, g)
    d = state.diagnostics
    eps = state.schedule.epsilon(n)
    if n % state.batch == 0:
        beta, report = mmd_omp(beta, eps)
        achieved, jitter = report.achieved_mmd, report.jitter_used
    else:
        report, achieved, jitter = None, 0.0, 0.0
    state.embedding = beta
    state._cumulative += eps
    d.last_report = report
    d.model_order.append(len(beta))
    d.epsilon.append(eps)
    d.achieved_mmd.append(achieved)
    d.cumulative_budget.append(state._cumulative)
    d.jitter.append(jitter)
    return state


def is_step(state, spec):
    """One step of streaming self-normalized IS."""
    x, g = draw(state, spec)
    return is_update(state, x, g)


def ckis_step(state, spec):
    """One step of compressed kernelized IS."""
    x, g = draw(state, spec)
    return ckis_update(state, x, g)


def _normalized(weights):
    total = float(np.sum(weights))
    if not abs(total) >= DEGENERATE_SUM:
        raise DegenerateNormalizerError(f"weight sum {total} is degenerate")
    return np.asarray(weights) / total


def estimate(source, phi):
    """Self-normalized estimate ``sum_u wbar[u] phi(d_u)``.

    ``source`` is an :class:`EstimatorState` or a :class:`ParticleMeasure`.
    ``phi`` maps a point of shape ``(dim,)`` to a float or an array; the
    result has the same shape.  Weights are normalized over the current
    (possibly compressed, possibly signed) dictionary.
    """
    points, weights = source.points, source.weights
    if len(weights) == 0:
        raise DegenerateNormalizerError("no particles to estimate from")
    wbar = _normalized(weights)
    vals = np.asarray([phi(p) for p in points], dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise NonFiniteValueError("test function returned a non-finite value")
    out = np.tensordot(wbar, vals, axes=(0, 0))
    return float(out) if out.ndim == 0 else out


def estimate_normalizer(state):
    """Mean importance weight.

    Uses the historical weight sum for the uncompressed stream and the sum
    of current coefficients for the compressed one, divided by the step
    count in both cases.
    """
    if state.step < 1:
        raise InvalidArgumentError("no steps taken")
    if state.compressed:
        return float(np.sum(state.embedding.coeffs)) / state.step
    return state.weight_sum / state.step


def estimate_rho(weights):
    """Plug-in variance ratio ``n sum g^2 / (sum g)^2`` (= n / ESS)."""
    g = np.asarray(weights, dtype=np.float64).reshape(-1)
    if len(g) < 2:
        raise InvalidArgumentError("need at least two weights")
    s = float(g.sum())
    if not abs(s) >= DEGENERATE_SUM:
        raise DegenerateNormalizerError("weights sum to zero")
    # rho - 1 = (n sum d^2 - (sum d)^2) / (sum g)^2 for d = g - g[0]; no
    # cancellation, and equal weights give exactly 1
    d = g - g[0]
    sd = float(d.sum())
    return 1.0 + (len(g) * float(d @ d) - sd * sd) / (s * s)
