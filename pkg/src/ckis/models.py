"""Densities, proposals and the three benchmark problems.

* ``direct_is_spec``: known normalized target N(1, 1), proposal N(1, 2).
* ``indirect_is_spec``: 1-D Bayesian posterior from K noisy observations,
  uniform proposal on [3, 7].
* ``localization_spec``: 2-D source localization from range measurements
  at six sensors, prior used as proposal.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate

from .errors import InvalidArgumentError
from .sampling import ProblemSpec

__all__ = [
    "GaussianDensity",
    "UniformDensity",
    "BayesPosteriorSpec",
    "LocalizationSpec",
    "direct_is_spec",
    "direct_reference",
    "indirect_is_spec",
    "localization_spec",
    "SENSORS",
    "TRUE_LOCATION",
]


class GaussianDensity:
    """Multivariate normal density and sampler.

    ``cov`` may be a scalar variance, a vector of variances (diagonal) or a
    full SPD matrix.
    """

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        p = len(self.mean)
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim == 0:
            cov = np.eye(p) * cov
        elif cov.ndim == 1:
            cov = np.diag(cov)
        if cov.shape != (p, p):
            raise InvalidArgumentError(f"covariance shape {cov.shape} does not match mean of length {p}")
        try:
            self._chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise InvalidArgumentError("covariance must be symmetric positive definite") from exc
        self.cov = cov
        self.dim = p
        self._inv_chol = np.linalg.inv(self._chol)
        logdet = 2.0 * np.sum(np.log(np.diag(self._chol)))
        self._log_norm = -0.5 * (p * math.log(2.0 * math.pi) + logdet)

    def log_density(self, x):
        z = self._inv_chol @ (np.asarray(x, dtype=np.float64).reshape(self.dim) - self.mean)
        return self._log_norm - 0.5 * float(z @ z)

    def density(self, x):
        return math.exp(self.log_density(x))

    def sample(self, rng):
        return self.mean + self._chol @ rng.standard_normal(self.dim)


class UniformDensity:
    """Uniform density on the interval ``[low, high]``."""

    dim = 1

    def __init__(self, low, high):
        if not high > low:
            raise InvalidArgumentError("need high > low")
        self.low = float(low)
        self.high = float(high)

    def density(self, x):
        x = float(np.asarray(x).reshape(-1)[0])
        return 1.0 / (self.high - self.low) if self.low <= x <= self.high else 0.0

    def sample(self, rng):
        return np.array([rng.uniform(self.low, self.high)])


@dataclass
class BayesPosteriorSpec:
    """Unnormalized posterior ``likelihood(y, x) * prior(x)``."""

    likelihood: callable
    prior: callable
    observations: np.ndarray

    def __call__(self, x):
        return self.likelihood(self.observations, x) * self.prior(x)


# ---------------------------------------------------------------------------
# direct importance sampling


def _phi_direct(x):
    x = float(np.asarray(x).reshape(-1)[0])
    return 2.0 * math.sin(math.pi / (1.5 * x))

def direct_reference(split=0.5):
    """Integral of ``2 sin(pi / (1.5 x))`` against N(1, 1) over [-10, 12].

    The oscillation at the origin is handled by substituting ``u = 1/|x|``
    on ``|x| < split``, which turns both pieces into Fourier integrals on
    ``[1/split, inf)`` evaluated with QUADPACK's QAWF routine.
    """
    q = lambda x: math.exp(-((x - 1.0) ** 2) / 2.0) / math.sqrt(2.0 * math.pi)
    omega = math.pi / 1.5
    kw = dict(epsabs=1e-13, epsrel=1e-11, limit=500)
    outer = integrate.quad(lambda x: _phi_direct(x) * q(x), split, 12.0, **kw)[0]
    outer += integrate.quad(lambda x: _phi_direct(x) * q(x), -10.0, -split, **kw)[0]
    # x = 1/u on (0, split): dx = du / u^2, phi = 2 sin(omega u)
    a = 1.0 / split
    pos = integrate.quad(lambda u: 2.0 * q(1.0 / u) / u**2, a, np.inf, weight="sin", wvar=omega, limlst=200)[0]
    # x = -1/u on (-split, 0): phi = -2 sin(omega u)
    neg = integrate.quad(lambda u: -2.0 * q(-1.0 / u) / u**2, a, np.inf, weight="sin", wvar=omega, limlst=200)[0]
    return outer + pos + neg

def direct_is_spec():
    """Known target N(1, 1), proposal N(1, 2), ``phi(x) = 2 sin(pi / 1.5x)``."""
    target = GaussianDensity([1.0], 1.0)
    proposal = GaussianDensity([1.0], 2.0)
    return ProblemSpec(
        name="direct",
        dim=1,
        target_unnorm=target.density,
        proposal=proposal,
        test_fn=_phi_direct,
        reference=direct_reference(),
        reference_method="QUADPACK qags on |x|>0.5 plus qawf Fourier integrals after u=1/|x| near 0",
        extras={"normalizer": 1.0},
    )

# ---------------------------------------------------------------------------
# indirect importance sampling

INDIRECT_DEFAULTS = dict(K=10, b=5.0, sigma=0.1, sigma1=0.4, sigma2=1.6, x_true=5.0, low=3.0, high=7.0)

def indirect_is_spec(seed=0, **overrides):
    """Posterior of a scalar location from K observations, U[3, 7] proposal.

    Observations follow ``y = b + sin(2 pi x_true) + noise`` with noise sd
    ``sigma``.  The likelihood is Gaussian in ``y_k - x`` with sd ``sigma1``
    and the prior is ``exp(-x^2 / (2 sigma2^2)) / (2 pi sigma2^2)``; both
    are used exactly in that form.  The test function is ``phi(x) = x``.
    """
    cfg = dict(INDIRECT_DEFAULTS)
    unknown = set(overrides) - set(cfg)
    if unknown:
        raise InvalidArgumentError(f"unknown parameters {sorted(unknown)}")
    cfg.update(overrides)
    rng = np.random.default_rng(seed)
    y = cfg["b"] + math.sin(2.0 * math.pi * cfg["x_true"]) + cfg["sigma"] * rng.standard_normal(cfg["K"])
    s1, s2, K = cfg["sigma1"], cfg["sigma2"], cfg["K"]
    lik_norm = (2.0 * math.pi * s1**2) ** (-K / 2.0)

    def likelihood(obs, x):
        x = float(np.asarray(x).reshape(-1)[0])
        r = obs - x
        return lik_norm * math.exp(-float(r @ r) / (2.0 * s1**2))

    def prior(x):
        x = float(np.asarray(x).reshape(-1)[0])
        return math.exp(-(x**2) / (2.0 * s2**2)) / (2.0 * math.pi * s2**2)

    post = BayesPosteriorSpec(likelihood, prior, y)
    proposal = UniformDensity(cfg["low"], cfg["high"])
    # posterior mean restricted to the proposal support
    f = lambda x: post(x)
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=200, points=[float(np.mean(y))])
    Z = integrate.quad(f, cfg["low"], cfg["high"], **kw)[0]
    m1 = integrate.quad(lambda x: x * f(x), cfg["low"], cfg["high"], **kw)[0]
    return ProblemSpec(
        name="indirect",
        dim=1,
        target_unnorm=post,
        proposal=proposal,
        test_fn=lambda x: float(np.asarray(x).reshape(-1)[0]),
        reference=m1 / Z,
        reference_method="QUADPACK qags of x*q and q over [3,7]",
        extras={"observations": y, "normalizer": Z, **cfg},
    )

# ---------------------------------------------------------------------------
# source localization

SENSORS = np.array([[1.0, -8.0], [8.0, 10.0], [-15.0, -17.0], [-8.0, 1.0], [10.0, 0.0], [0.0, 10.0]])
TRUE_LOCATION = np.array([3.5, 3.5])
MIN_RANGE = 1e-12

def range_model(x, sensors=SENSORS, log_base=math.e):
    """Noiseless measurements ``-20 log(|x - h_i|)`` for every sensor."""
    r = np.linalg.norm(np.asarray(x, dtype=np.float64).reshape(1, 2) - sensors, axis=1)
    r = np.maximum(r, MIN_RANGE)
    return -20.0 * np.log(r) / math.log(log_base)

@dataclass
class LocalizationSpec:
    """Range-measurement likelihood times Gaussian prior on R^2."""

    sensors: np.ndarray
    measurements: np.ndarray  # shape (n_sensors, n_per_sensor)
    noise_sd: float
    prior: GaussianDensity
    log_base: float = math.e
    clamped: int = field(default=0, compare=False)

    def log_likelihood(self, x):
        r = np.linalg.norm(np.asarray(x, dtype=np.float64).reshape(1, 2) - self.sensors, axis=1)
        if np.any(r < MIN_RANGE):
            self.clamped += 1
        mean = -20.0 * np.log(np.maximum(r, MIN_RANGE)) / math.log(self.log_base)
        resid = (self.measurements - mean[:, None]) / self.noise_sd
        n = resid.size
        return -0.5 * float(np.sum(resid * resid)) - n * math.log(math.sqrt(2.0 * math.pi) * self.noise_sd)

    def __call__(self, x):
        return math.exp(self.log_likelihood(x) + self.prior.log_density(x))

def localization_spec(seed=0, n_measurements=1, log_base=math.e, component=0, noise_sd=1.0):
    """Static 2-D target seen by six range sensors; the prior is the proposal.

    Measurements ``y_ij = -20 log|x_true - h_i| + noise`` are drawn with
    ``seed``.  ``component`` picks which coordinate the scalar test function
    returns; the full location comes from estimating with ``lambda x: x``.
    """
    if component not in (0, 1):
        raise InvalidArgumentError("component must be 0 or 1")
    rng = np.random.default_rng(seed)
    clean = range_model(TRUE_LOCATION, SENSORS, log_base)
    y = clean[:, None] + noise_sd * rng.standard_normal((len(SENSORS), n_measurements))
    prior = GaussianDensity(TRUE_LOCATION, np.eye(2))
    target = LocalizationSpec(SENSORS, y, noise_sd, prior, log_base)
    ref, method = _localization_reference(target)
    return ProblemSpec(
        name="localize",
        dim=2,
        target_unnorm=target,
        proposal=prior,
        test_fn=lambda x: float(np.asarray(x).reshape(-1)[component]),
        reference=float(ref[component]),
        reference_method=method,
        extras={"measurements": y, "reference_vector": ref, "component": component, "log_base": log_base},
    )

def _localization_reference(target, half_width=6.0, step=0.01):
    """Posterior mean by tensor-grid trapezoid quadrature over prior +- 6 sd."""
    c = target.prior.mean
    gx = np.arange(c[0] - half_width, c[0] + half_width + step / 2, step)
    gy = np.arange(c[1] - half_width, c[1] + half_width + step / 2, step)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    r = np.linalg.norm(pts[:, None, :] - target.sensors[None, :, :], axis=2)
    mean = -20.0 * np.log(np.maximum(r, MIN_RANGE)) / math.log(target.log_base)
    resid = (target.measurements[None, :, :] - mean[:, :, None]) / target.noise_sd
    d = pts - c
    logq = -0.5 * np.sum(resid**2, axis=(1, 2)) - 0.5 * np.sum(d * d, axis=1)
    w = np.exp(logq - logq.max()).reshape(X.shape)
    Z = integrate.trapezoid(integrate.trapezoid(w, gy, axis=1), gx)
    mx = integrate.trapezoid(integrate.trapezoid(w * X, gy, axis=1), gx) / Z
    my = integrate.trapezoid(integrate.trapezoid(w * Y, gy, axis=1), gx) / Z
    return np.array([mx, my]), f"trapezoid on {len(gx)}x{len(gy)} grid, spacing {step}, prior mean +- {half_width}"
