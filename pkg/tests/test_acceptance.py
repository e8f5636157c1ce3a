"""Acceptance criteria for the streaming estimator and its experiments.

Each test prints one ``PASS``/``FAIL`` line (also collected into the
terminal summary) and then asserts.  Tolerances are the published ones;
nothing here is tuned to make a run land inside a band.
"""

import math
import time

import numpy as np
import pytest

from ckis import Embedding, Kernel, ParticleMeasure, embed, mmd, preimage, refit
from ckis.harness import CONTRACT_SLACK, EXIT_OK, RunConfig, run, sweep
from ckis.kernel_core import cross_gram, gram
from ckis.models import direct_is_spec
from ckis.sampling import BudgetSchedule, EstimatorState, ckis_update, draw, is_update

from conftest import ACCEPTANCE_LINES

ALL_RUNS = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def timed_runs(experiment, seeds, **kw):
    t0 = time.perf_counter()
    results = [run(RunConfig.for_experiment(experiment, seed=s, compare_uncompressed=True, **kw), write=False)
               for s in seeds]
    ALL_RUNS.extend(results)
    return results, time.perf_counter() - t0


def settled(rows, frac=0.2):
    tail = [r.model_order for r in rows[int(len(rows) * (1 - frac)):]]
    return len(set(tail)) == 1


def test_criterion_1_direct_model_order_and_paired_error():
    results, secs = timed_runs("direct", range(1, 11))
    assert all(r.exit_code == EXIT_OK for r in results)
    orders = [r.final_model_order for r in results]
    diffs = [abs(r.final_compressed - r.final_uncompressed) for r in results]
    constant = all(settled(r.rows) for r in results)
    mean_order, med_diff = float(np.mean(orders)), float(np.median(diffs))
    ok = constant and 30 <= mean_order <= 100 and med_diff <= 1e-2 and secs < 60
    report(1, ok, f"direct N=5000 eps=3 h=0.01 x10 seeds: orders={orders} constant_tail={constant} "
                  f"mean_order={mean_order:.1f} (want 30..100) median|diff|={med_diff:.3g} (want <=1e-2) "
                  f"time={secs:.1f}s")


def test_criterion_2_localization():
    results, secs = timed_runs("localize", range(1, 6))
    assert all(r.exit_code == EXIT_OK for r in results)
    orders = [r.final_model_order for r in results]
    locs = np.array([r.location_compressed for r in results])
    err = float(np.max(np.abs(locs - [3.5, 3.5])))
    mean_order = float(np.mean(orders))
    ok = 10 <= mean_order <= 50 and err <= 0.5 and secs < 120
    report(2, ok, f"localize N=3000 eps=0.002 h=1e-4 x5 seeds: orders={orders} mean_order={mean_order:.1f} "
                  f"(want 10..50) max|loc-truth|={err:.3f} (want <=0.5) time={secs:.1f}s")


def test_criterion_3_indirect():
    (res,), secs = timed_runs("indirect", [1])
    diff = abs(res.final_compressed - res.final_uncompressed)
    ok = res.exit_code == EXIT_OK and len(res.rows) == 5000 and settled(res.rows) and diff <= 1e-2
    report(3, ok, f"indirect N=5000 eps=1e-3 h=0.012: completed={len(res.rows)} final_order={res.final_model_order} "
                  f"constant_tail={settled(res.rows)} |diff|={diff:.3g} (want <=1e-2) time={secs:.1f}s")


def test_criterion_4_zero_budget_oracle():
    t0 = time.perf_counter()
    worst, same_order = 0.0, True
    for experiment, n in [("direct", 500), ("indirect", 500), ("localize", 300)]:
        (res,), _ = timed_runs(experiment, [3], n_particles=n, epsilon=0.0)
        assert res.exit_code == EXIT_OK
        worst = max(worst, max(r.abs_diff for r in res.rows))
        same_order &= [r.model_order for r in res.rows] == list(range(1, n + 1))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-10 and same_order and secs < 5
    report(4, ok, f"eps=0 paired on direct/indirect/localize: max abs_diff={worst:.3g} (want <=1e-10) "
                  f"order==n every step={same_order} time={secs:.1f}s")


def test_criterion_5_per_step_contract():
    # the runs of the other criteria plus a geometric and a mid-budget run
    extra, _ = timed_runs("direct", [2], n_particles=400, alpha=0.9)
    extra2, _ = timed_runs("indirect", [2], n_particles=400, epsilon=0.05, bandwidth=0.1)
    runs = ALL_RUNS
    steps = sum(len(r.rows) for r in runs)
    worst = max(r.achieved_mmd - r.epsilon_n for res in runs for r in res.rows)
    ok = worst <= CONTRACT_SLACK and all(r.exit_code == EXIT_OK for r in runs)
    report(5, ok, f"{len(runs)} runs, {steps} steps: max(achieved_mmd - eps_n)={worst:.3g} (want <=1e-9)")


def test_criterion_6_cumulative_drift_bound():
    t0 = time.perf_counter()
    spec = direct_is_spec()
    k = Kernel(0.01)
    sched = BudgetSchedule.geometric(0.9)
    rng = np.random.default_rng(np.random.SeedSequence(6).spawn(2)[1])
    state = EstimatorState(1, kernel=k, schedule=sched, rng=rng)
    shadow = EstimatorState(1, rng=rng)
    worst_slack = math.inf
    for n in range(1, 501):
        x, g = draw(state, spec)
        ckis_update(state, x, g)
        is_update(shadow, x, g)
        gamma = Embedding(shadow.points, shadow.weights, k)
        drift = mmd(state.embedding, gamma)
        worst_slack = min(worst_slack, sched.cumulative(n) + 1e-9 * n - drift)
    secs = time.perf_counter() - t0
    ok = worst_slack >= 0 and secs < 30
    report(6, ok, f"alpha=0.9, 500 steps, shadow embedding: min(bound - mmd(beta_n, gamma_n))={worst_slack:.3g} "
                  f"(want >=0) final_order={state.model_order} time={secs:.1f}s")


def test_criterion_7_mse_rate():
    t0 = time.perf_counter()
    template = RunConfig.for_experiment("direct", uncompressed_only=True, seed=1)
    ns = [100, 1000, 10000]
    rows = sweep(template, {"n_particles": ns}, replicates=200)
    mse = [r["mse"] for r in rows]
    slope = float(np.polyfit(np.log(ns), np.log(mse), 1)[0])
    secs = time.perf_counter() - t0
    ok = abs(slope + 1) <= 0.3 and all(r["failures"] == 0 for r in rows) and secs < 300
    report(7, ok, f"uncompressed direct IS, 200 seeds: MSE={['%.3g' % m for m in mse]} "
                  f"log-log slope={slope:.3f} (want -1+-0.3) time={secs:.1f}s")


def test_criterion_8_refit_optimality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_resid, improved = 0.0, 0
    for _ in range(100):
        h = float(rng.choice([0.1, 0.5, 1.0]))
        k = Kernel(h, dim=int(rng.integers(1, 3)))
        m = int(rng.integers(2, 12))
        target = Embedding(rng.uniform(-3, 3, size=(m, k.dim)) * h, rng.normal(size=m), k)
        sub = np.sort(rng.choice(m, size=int(rng.integers(1, m)), replace=False))
        D = target.points[sub]
        g = refit(target, D)
        rhs = cross_gram(k, D, target.points) @ target.coeffs
        resid = np.max(np.abs(gram(k, D) @ g - rhs)) / np.max(np.abs(rhs))
        worst_resid = max(worst_resid, resid)
        best = mmd(target, Embedding(D, g, k))
        for j in range(len(g)):
            for step in (-1e-3, 1e-3):
                gp = g.copy()
                gp[j] += step
                if mmd(target, Embedding(D, gp, k)) < best:
                    improved += 1
    secs = time.perf_counter() - t0
    ok = worst_resid <= 1e-8 and improved == 0 and secs < 10
    report(8, ok, f"100 instances: max relative normal-equation residual={worst_resid:.3g} (want <=1e-8) "
                  f"improving perturbations={improved} time={secs:.1f}s")


def test_criterion_9_metric_axioms_and_round_trip():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    failures = 0
    n_instances = 1000
    for _ in range(n_instances):
        k = Kernel(float(rng.choice([0.01, 0.3, 1.0])), dim=int(rng.integers(1, 3)))
        a, b, c = (
            Embedding(rng.uniform(-3, 3, size=(m, k.dim)) * k.bandwidth, rng.normal(size=m), k)
            for m in rng.integers(0, 8, size=3)
        )
        dab, dba, dbc, dac = mmd(a, b), mmd(b, a), mmd(b, c), mmd(a, c)
        failures += not (dab >= 0 and abs(dab - dba) <= 1e-9 and mmd(a, a) == 0.0 and dac <= dab + dbc + 1e-9)
        m = int(rng.integers(0, 20))
        mu = ParticleMeasure(rng.normal(size=(m, k.dim)), rng.exponential(size=m))
        failures += not (preimage(embed(mu, k)) == mu)
    secs = time.perf_counter() - t0
    ok = failures == 0 and secs < 10
    report(9, ok, f"{n_instances} random instances: axiom/round-trip failures={failures} time={secs:.1f}s")
