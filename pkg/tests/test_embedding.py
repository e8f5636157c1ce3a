import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ckis import (
    Embedding,
    InvalidArgumentError,
    Kernel,
    ParticleMeasure,
    append,
    embed,
    mmd,
    preimage,
    rkhs_inner,
    rkhs_norm,
)
from ckis.compression import mmd_omp

from conftest import random_embedding


def double_sum(a, b):
    k = a.kernel
    return sum(
        ga * gb * k(x, y) for x, ga in zip(a.points, a.coeffs) for y, gb in zip(b.points, b.coeffs)
    )


class TestEmbed:
    def test_empty_measure(self):
        beta = embed(ParticleMeasure.empty(1), Kernel(1.0))
        assert len(beta) == 0
        assert rkhs_norm(beta) == 0.0

    def test_single_atom_norm_is_weight(self):
        beta = embed(ParticleMeasure([[0.3]], [2.5]), Kernel(0.1))
        assert rkhs_norm(beta) == pytest.approx(2.5, rel=1e-15)

    def test_three_atoms_norm_matches_double_sum(self, rng):
        beta = embed(ParticleMeasure(rng.normal(size=(3, 1)), rng.uniform(size=3)), Kernel(0.8))
        assert rkhs_inner(beta, beta) == pytest.approx(double_sum(beta, beta), rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            embed(ParticleMeasure([[0.0, 1.0]], [1.0]), Kernel(1.0, dim=1))

    def test_non_finite_coefficients_rejected(self):
        with pytest.raises(InvalidArgumentError):
            Embedding([[0.0]], [math.inf], Kernel(1.0))

    def test_arrays_are_read_only(self):
        beta = Embedding([[0.0]], [1.0], Kernel(1.0))
        with pytest.raises(ValueError):
            beta.coeffs[0] = 2.0


class TestInner:
    def test_with_empty_is_zero(self, rng):
        k = Kernel(1.0)
        assert rkhs_inner(random_embedding(rng, 4, k), Embedding.empty(k)) == 0.0

    def test_single_atom_with_itself(self):
        beta = Embedding([[1.7]], [-3.0], Kernel(0.2))
        assert rkhs_inner(beta, beta) == pytest.approx(9.0, rel=1e-15)

    def test_random_four_by_three(self, rng):
        k = Kernel(0.6, dim=2)
        a, b = random_embedding(rng, 4, k), random_embedding(rng, 3, k)
        assert rkhs_inner(a, b) == pytest.approx(double_sum(a, b), rel=1e-12)

    @pytest.mark.parametrize("other", [Kernel(0.5), Kernel(1.0, dim=2), Kernel(1.0, normalization="density")])
    def test_kernel_mismatch(self, other):
        a = Embedding([[0.0]], [1.0], Kernel(1.0))
        b = Embedding.empty(other)
        with pytest.raises(InvalidArgumentError):
            rkhs_inner(a, b)
        with pytest.raises(InvalidArgumentError):
            mmd(a, b)


class TestMMD:
    def test_self_distance_is_exactly_zero(self, rng):
        beta = random_embedding(rng, 20, Kernel(0.01))
        assert mmd(beta, beta) == 0.0

    def test_single_atoms(self):
        k = Kernel(0.5)
        a, b = Embedding([[0.0]], [1.0], k), Embedding([[0.4]], [1.0], k)
        assert mmd(a, b) == pytest.approx(math.sqrt(2 - 2 * k(0.0, 0.4)), rel=1e-12)

    def test_matches_expanded_form(self, rng):
        k = Kernel(0.9, dim=2)
        a, b = random_embedding(rng, 6, k), random_embedding(rng, 5, k)
        expanded = double_sum(a, a) - 2 * double_sum(a, b) + double_sum(b, b)
        assert mmd(a, b) == pytest.approx(math.sqrt(expanded), rel=1e-9)

    def test_triangle_on_random_embeddings(self, rng):
        k = Kernel(0.4)
        for _ in range(50):
            a, b, c = (random_embedding(rng, int(rng.integers(1, 8)), k) for _ in range(3))
            assert mmd(a, c) <= mmd(a, b) + mmd(b, c) + 1e-9

    def test_permutation_invariant(self, rng):
        beta = random_embedding(rng, 6, Kernel(0.5))
        perm = rng.permutation(6)
        shuffled = Embedding(beta.points[perm], beta.coeffs[perm], beta.kernel)
        assert mmd(beta, shuffled) == 0.0


class TestAppend:
    def test_append_to_empty(self):
        k = Kernel(1.0)
        beta = append(Embedding.empty(k), 0.5, 2.0)
        assert beta == Embedding([[0.5]], [2.0], k)

    def test_far_atom_costs_its_weight(self, rng):
        k = Kernel(0.05)
        beta = Embedding(rng.uniform(-0.1, 0.1, size=(5, 1)), rng.normal(size=5), k)
        x = beta.points.max() + 100 * k.bandwidth
        assert mmd(append(beta, x, -1.3), beta) == pytest.approx(1.3, abs=1e-6)

    def test_zero_weight_is_invisible(self, rng):
        beta = random_embedding(rng, 5, Kernel(1.0))
        assert mmd(append(beta, 0.123, 0.0), beta) == 0.0

    def test_non_finite_weight(self):
        with pytest.raises(InvalidArgumentError):
            append(Embedding.empty(Kernel(1.0)), 0.0, math.nan)

    def test_associative_with_concatenation(self, rng):
        k = Kernel(0.3, dim=2)
        pts, w = rng.normal(size=(6, 2)), rng.uniform(size=6)
        x, g = rng.normal(size=2), 0.7
        lhs = embed(ParticleMeasure(np.vstack([pts, x]), np.append(w, g)), k)
        assert lhs == append(embed(ParticleMeasure(pts, w), k), x, g)


class TestPreimage:
    def test_empty(self):
        assert preimage(Embedding.empty(Kernel(1.0, dim=3))) == ParticleMeasure.empty(3)

    def test_round_trip(self, rng):
        mu = ParticleMeasure(rng.normal(size=(9, 2)), rng.uniform(size=9))
        assert preimage(embed(mu, Kernel(0.2, dim=2))) == mu

    def test_compressed_weights_are_refit_coefficients(self, rng):
        k = Kernel(0.5)
        beta = Embedding(np.linspace(0, 1, 8).reshape(-1, 1), rng.uniform(0.5, 1, size=8), k)
        small, _ = mmd_omp(beta, 0.3)
        mu = preimage(small)
        np.testing.assert_array_equal(mu.points, small.points)
        np.testing.assert_array_equal(mu.weights, small.coeffs)
        assert mu.normalizer == pytest.approx(float(np.sum(small.coeffs)))


# property-based checks over a few thousand random instances

embeddings = st.builds(
    lambda seed, m, h: random_embedding(np.random.default_rng(seed), m, Kernel(h)),
    st.integers(0, 2**32 - 1),
    st.integers(0, 10),
    st.sampled_from([0.01, 0.3, 1.0]),
)


def _rekernel(beta, k):
    return Embedding(beta.points / beta.kernel.bandwidth * k.bandwidth, beta.coeffs, k)


class TestMetricAxioms:
    @settings(max_examples=400, deadline=None)
    @given(a=embeddings, b=embeddings, c=embeddings)
    def test_pseudometric(self, a, b, c):
        k = a.kernel
        b, c = _rekernel(b, k), _rekernel(c, k)
        dab, dba = mmd(a, b), mmd(b, a)
        assert dab >= 0.0
        assert dab == pytest.approx(dba, rel=1e-12, abs=1e-12)
        assert mmd(a, a) == 0.0
        assert mmd(a, c) <= dab + mmd(b, c) + 1e-9

    @settings(max_examples=400, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), m=st.integers(0, 30), p=st.integers(1, 3))
    def test_round_trip_identity(self, seed, m, p):
        r = np.random.default_rng(seed)
        mu = ParticleMeasure(r.normal(size=(m, p)), r.exponential(size=m))
        assert preimage(embed(mu, Kernel(0.5, dim=p))) == mu
