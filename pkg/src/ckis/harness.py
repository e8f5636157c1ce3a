"""Experiment runner: paired compressed/uncompressed streams, CSV traces, sweeps.

A run draws each particle once and feeds it to the compressed stream and,
optionally, to an uncompressed stream, so ``abs_diff`` isolates the error
introduced by compression from Monte Carlo noise.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, fields, replace
import importlib
import inspect
import itertools
import math
import os
import time
from typing import Optional

import numpy as np

from . import __version__, models
from ._backend import BACKEND
from .errors import CKISError, DegenerateNormalizerError, InvalidArgumentError
from .kernel_core import Kernel
from .sampling import BudgetSchedule, EstimatorState, ckis_update, draw, estimate, is_update

__all__ = [
    "EXPERIMENT_DEFAULTS",
    "TRACE_HEADER",
    "RunConfig",
    "TraceRow",
    "RunResult",
    "build_spec",
    "run",
    "sweep",
    "write_manifest",
    "read_manifest",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

TRACE_HEADER = (
    "n",
    "estimate_compressed",
    "estimate_uncompressed",
    "abs_diff",
    "model_order",
    "epsilon_n",
    "achieved_mmd",
    "cumulative_budget",
    "rho_hat",
)

# budgets and bandwidths used in the three reference experiments
EXPERIMENT_DEFAULTS = {
    "direct": dict(n_particles=5000, epsilon=3.0, bandwidth=0.01),
    "indirect": dict(n_particles=5000, epsilon=1e-3, bandwidth=0.012),
    "localize": dict(n_particles=3000, epsilon=0.002, bandwidth=1e-4),
    "custom": dict(n_particles=1000, epsilon=0.0, bandwidth=1.0),
}

CONTRACT_SLACK = 1e-9


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    n_particles: int = 5000
    epsilon: Optional[float] = None
    alpha: Optional[float] = None
    bandwidth: float = 0.01
    seed: int = 1
    batch: int = 1
    compare_uncompressed: bool = False
    uncompressed_only: bool = False
    output_path: Optional[str] = None
    log_base: str = "e"
    kernel_norm: str = "peak"
    n_measurements: int = 1
    component: int = 0
    problem: Optional[str] = None

    @classmethod
    def for_experiment(cls, experiment, **overrides):
        if experiment not in EXPERIMENT_DEFAULTS:
            raise InvalidArgumentError(f"unknown experiment {experiment!r}")
        params = dict(EXPERIMENT_DEFAULTS[experiment])
        if overrides.get("alpha") is not None:
            params.pop("epsilon")
        params.update({k: v for k, v in overrides.items() if v is not None})
        return cls(experiment=experiment, **params)

    def validate(self):
        if self.experiment not in EXPERIMENT_DEFAULTS:
            raise InvalidArgumentError(f"unknown experiment {self.experiment!r}")
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise InvalidArgumentError("n_particles must be a positive integer")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise InvalidArgumentError("bandwidth must be positive")
        if (self.epsilon is None) == (self.alpha is None):
            raise InvalidArgumentError("exactly one of epsilon and alpha must be set")
        if self.batch < 1:
            raise InvalidArgumentError("batch must be >= 1")
        if self.log_base not in ("e", "10"):
            raise InvalidArgumentError("log_base must be 'e' or '10'")
        if self.experiment == "custom" and not self.problem:
            raise InvalidArgumentError("custom experiment needs problem='module:function'")
        self.schedule()  # raises on bad epsilon/alpha
        return self

    def schedule(self):
        if self.alpha is not None:
            return BudgetSchedule.geometric(self.alpha)
        return BudgetSchedule.constant(self.epsilon)

    def seeds(self):
        """Independent (data, particle) seed sequences derived from ``seed``."""
        data, particles = np.random.SeedSequence(self.seed).spawn(2)
        return data, particles


@dataclass
class TraceRow:
    n: int
    estimate_compressed: float
    estimate_uncompressed: Optional[float]
    abs_diff: Optional[float]
    model_order: int
    epsilon_n: float
    achieved_mmd: float
    cumulative_budget: float
    rho_hat: float

    def as_strings(self):
        out = []
        for name in TRACE_HEADER:
            v = getattr(self, name)
            out.append("" if v is None else (str(v) if isinstance(v, int) else repr(float(v))))
        return out


@dataclass
class RunResult:
    config: RunConfig
    rows: list
    exit_code: int
    manifest: dict
    final_compressed: Optional[float] = None
    final_uncompressed: Optional[float] = None
    final_model_order: int = 0
    location_compressed: Optional[np.ndarray] = None
    location_uncompressed: Optional[np.ndarray] = None
    state: Optional[EstimatorState] = None
    shadow: Optional[EstimatorState] = None
    error: str = ""


def _load_custom(path):
    mod_name, _, attr = path.partition(":")
    if not attr:
        raise InvalidArgumentError("problem must look like 'package.module:function'")
    try:
        factory = getattr(importlib.import_module(mod_name), attr)
    except (ImportError, AttributeError) as exc:
        raise InvalidArgumentError(f"cannot load problem {path!r}: {exc}") from exc
    return factory


def build_spec(config, data_seed=None):
    """Problem spec for ``config``; data-generating experiments use ``data_seed``."""
    if data_seed is None:
        data_seed = config.seeds()[0]
    base = math.e if config.log_base == "e" else 10.0
    if config.experiment == "direct":
        return models.direct_is_spec()
    if config.experiment == "indirect":
        return models.indirect_is_spec(data_seed)
    if config.experiment == "localize":
        return models.localization_spec(
            data_seed, n_measurements=config.n_measurements, log_base=base, component=config.component
        )
    factory = _load_custom(config.problem)
    if "seed" in inspect.signature(factory).parameters:
        return factory(seed=data_seed)
    return factory()


def _manifest(config, spec, extra):
    m = {f.name: getattr(config, f.name) for f in fields(config)}
    m["schedule"] = config.schedule().kind
    m["reference_value"] = spec.reference if spec is not None else None
    m["reference_method"] = spec.reference_method if spec is not None else ""
    m["library_version"] = __version__
    m["kernel_backend"] = BACKEND
    m["rng"] = "numpy PCG64 via SeedSequence(seed).spawn(2) -> (data, particles)"
    m.update(extra)
    return m


def run(config, keep_state=False, shadow=False, write=True):
    """Execute one experiment stream.

    Returns a :class:`RunResult`; when ``config.output_path`` is set and
    ``write`` is true, the trace CSV and a ``.manifest`` file next to it are
    written.  ``shadow=True`` additionally keeps the full uncompressed
    stream (needed to compare embeddings, not only estimates).
    """
    t0 = time.perf_counter()
    try:
        config.validate()
    except InvalidArgumentError as exc:
        return RunResult(config, [], EXIT_CONFIG, {"status": "config_error", "error": str(exc)}, error=str(exc))

    data_seed, particle_seed = config.seeds()
    spec = build_spec(config, data_seed)
    if spec.dim < 1:
        raise InvalidArgumentError("problem dimension must be positive")
    phi = spec.test_fn
    rng = np.random.default_rng(particle_seed)
    schedule = config.schedule()
    if config.uncompressed_only:
        state = EstimatorState(spec.dim, rng=rng)
    else:
        kernel = Kernel(config.bandwidth, spec.dim, config.kernel_norm)
        state = EstimatorState(spec.dim, kernel=kernel, schedule=schedule, batch=config.batch, rng=rng)
    compare = config.compare_uncompressed or config.uncompressed_only
    full = EstimatorState(spec.dim, rng=rng) if (shadow and not config.uncompressed_only) else None

    rows = []
    phi_vals = np.zeros(0)
    num = den = 0.0
    loc_num = np.zeros(spec.dim)
    status, error, code = "ok", "", EXIT_OK
    try:
        for n in range(1, config.n_particles + 1):
            x, g = draw(state, spec)
            fx = float(phi(x))
            if not math.isfinite(fx):
                raise DegenerateNormalizerError(f"test function is not finite at {x}")
            num += g * fx
            den += g
            loc_num += g * x
            if full is not None:
                is_update(full, x, g)
            if config.uncompressed_only:
                is_update(state, x, g)
                if den == 0.0:
                    raise DegenerateNormalizerError("weight sum is zero")
                est_c = num / den
                eps_n = achieved = cum = 0.0
            else:
                ckis_update(state, x, g)
                report = state.diagnostics.last_report
                phi_vals = np.append(phi_vals, fx)
                if report is not None and report.removed_indices:
                    phi_vals = np.delete(phi_vals, report.removed_indices)
                coeffs = state.embedding.coeffs
                total = float(coeffs.sum())
                if not abs(total) >= 1e-300:
                    raise DegenerateNormalizerError(f"compressed weight sum {total} at step {n}")
                est_c = float(coeffs @ phi_vals) / total
                d = state.diagnostics
                eps_n, achieved, cum = d.epsilon[-1], d.achieved_mmd[-1], d.cumulative_budget[-1]
                if achieved > eps_n + CONTRACT_SLACK:
                    raise AssertionError(f"MMD contract violated at step {n}: {achieved} > {eps_n}")
            est_u = num / den if (compare and den != 0.0) else None
            rho = n * state.weight_sq_sum / state.weight_sum**2 if state.weight_sum else math.nan
            row = TraceRow(
                n=n,
                estimate_compressed=est_c,
                estimate_uncompressed=est_u,
                abs_diff=abs(est_c - est_u) if est_u is not None else None,
                model_order=state.model_order,
                epsilon_n=eps_n,
                achieved_mmd=achieved,
                cumulative_budget=cum,
                rho_hat=rho,
            )
            if not all(math.isfinite(v) for v in (est_c, rho) if v is not None):
                raise DegenerateNormalizerError(f"non-finite trace value at step {n}")
            rows.append(row)
    except (DegenerateNormalizerError, CKISError, ArithmeticError) as exc:
        status, error, code = "numerical_degeneracy", f"{type(exc).__name__}: {exc}", EXIT_NUMERIC

    result = RunResult(config, rows, code, {}, error=error)
    if rows:
        last = rows[-1]
        result.final_compressed = last.estimate_compressed
        result.final_uncompressed = last.estimate_uncompressed
        result.final_model_order = last.model_order
    if spec.name == "localize" and code == EXIT_OK:
        result.location_compressed = estimate(state, lambda p: p)
        if compare:
            result.location_uncompressed = loc_num / den
    if keep_state:
        result.state = state
        result.shadow = full
    extra = {
        "status": status,
        "error": error,
        "n_completed": len(rows),
        "final_estimate_compressed": result.final_compressed,
        "final_estimate_uncompressed": result.final_uncompressed,
        "final_model_order": result.final_model_order,
        "max_achieved_mmd_minus_epsilon": max((r.achieved_mmd - r.epsilon_n for r in rows), default=0.0),
        "wall_clock_seconds": round(time.perf_counter() - t0, 3),
    }
    if result.location_compressed is not None:
        extra["location_compressed"] = " ".join(repr(float(v)) for v in result.location_compressed)
    if result.location_uncompressed is not None:
        extra["location_uncompressed"] = " ".join(repr(float(v)) for v in result.location_uncompressed)
    result.manifest = _manifest(config, spec, extra)
    if write and config.output_path:
        write_trace(config.output_path, rows)
        write_manifest(manifest_path(config.output_path), result.manifest)
    return result


def manifest_path(output_path):
    root, _ = os.path.splitext(output_path)
    return root + ".manifest"


def write_trace(path, rows):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in rows:
            w.writerow(row.as_strings())


def read_trace(path):
    """Load a trace CSV as a dict of numpy arrays (empty cells become NaN)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        cols = list(zip(*reader)) or [[] for _ in header]
    return {h: np.array([float(v) if v else math.nan for v in col]) for h, col in zip(header, cols)}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_manifest(path, manifest):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for k, v in manifest.items():
            fh.write(f"{k}={_fmt(v)}\n")


def read_manifest(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# sweeps

SWEEP_HEADER_STATS = (
    "replicates",
    "mean_error",
    "std_error",
    "mse",
    "mean_abs_diff",
    "mean_model_order",
    "std_model_order",
    "failures",
)


def _sweep_task(config):
    res = run(config, write=False)
    spec_ref = res.manifest.get("reference_value")
    err = None
    if res.exit_code == EXIT_OK and spec_ref is not None:
        err = res.final_compressed - spec_ref
    diff = None
    if res.final_uncompressed is not None and res.final_compressed is not None:
        diff = abs(res.final_compressed - res.final_uncompressed)
    return res.exit_code, err, diff, res.final_model_order


def expand_grid(grid):
    """Cartesian product of ``{field: [values]}`` as a list of dicts."""
    if not grid:
        return [{}]
    valid = {f.name for f in fields(RunConfig)}
    for key in grid:
        if key not in valid:
            raise InvalidArgumentError(f"unknown sweep parameter {key!r}")
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def sweep(template, grid, replicates, jobs=1, output_path=None):
    """Run ``replicates`` seeds per grid point; aggregate final errors.

    Seeds are ``template.seed + r`` for ``r = 0 .. replicates-1``.  The
    error is the final compressed estimate (the plain IS estimate when
    ``uncompressed_only``) minus the problem's reference value.  Returns a
    list of dict rows; writes them as CSV when ``output_path`` is given.
    """
    if replicates < 1:
        raise InvalidArgumentError("replicates must be >= 1")
    points = expand_grid(grid)
    tasks = []
    for point in points:
        for r in range(replicates):
            cfg = replace(template, output_path=None, seed=template.seed + r, **point)
            cfg.validate()
            tasks.append(cfg)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        outcomes = [_sweep_task(t) for t in tasks]

    rows = []
    for i, point in enumerate(points):
        chunk = outcomes[i * replicates:(i + 1) * replicates]
        errs = np.array([e for c, e, _, _ in chunk if c == EXIT_OK and e is not None])
        diffs = np.array([d for c, _, d, _ in chunk if c == EXIT_OK and d is not None])
        orders = np.array([m for c, _, _, m in chunk if c == EXIT_OK], dtype=float)
        nan = math.nan
        rows.append(
            {
                **point,
                "replicates": replicates,
                "mean_error": float(np.mean(np.abs(errs))) if len(errs) else nan,
                "std_error": float(np.std(np.abs(errs))) if len(errs) else nan,
                "mse": float(np.mean(errs**2)) if len(errs) else nan,
                "mean_abs_diff": float(np.mean(diffs)) if len(diffs) else nan,
                "mean_model_order": float(np.mean(orders)) if len(orders) else nan,
                "std_model_order": float(np.std(orders)) if len(orders) else nan,
                "failures": sum(1 for c, *_ in chunk if c != EXIT_OK),
            }
        )
    if output_path:
        header = list(points[0].keys()) + list(SWEEP_HEADER_STATS)
        d = os.path.dirname(os.path.abspath(output_path))
        os.makedirs(d, exist_ok=True)
        with open(output_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(row[h]) for h in header])
    return rows
