"""Analytic ensemble moments against three independent oracles.

The verification triangle: the fast sector-trace contraction, the literal
d^2 x d^2 dense assembly, and Monte-Carlo sampling must all agree, and the
all-singleton case additionally matches a hand-derived dephasing formula.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergoquench.ergodic_ensemble import (DensityMatrix,
                                         cat_q_variance_closed_form,
                                         contract_with_pair,
                                         dense_second_moment_reference,
                                         ensemble_mean, sector_block,
                                         second_moment_expectation)
from ergoquench.errors import SectorError, StateValidationError
from ergoquench.haar_oracle import (estimate_moments, estimate_state_mean,
                                    sample_block_unitary)
from ergoquench.spectral import SectorPartition

from conftest import random_density, random_hermitian, random_pure


def singleton_oracle(rho, a, b):
    """Hand-derived dephasing-ensemble second moment for all-singleton
    partitions: diagonal means plus the cross-coherence exchange sum."""
    r, am, bm = rho.entries, a.entries, b.entries
    d = r.shape[0]
    mean_a = sum(r[i, i].real * am[i, i].real for i in range(d))
    mean_b = sum(r[i, i].real * bm[i, i].real for i in range(d))
    cross = sum((abs(r[i, j]) ** 2 * (am[j, i] * bm[i, j])).real
                for i in range(d) for j in range(d) if i != j)
    return mean_a * mean_b + cross


class TestDensityMatrix:
    def test_maximally_mixed_accepted(self):
        dm = DensityMatrix(np.eye(3) / 3.0)
        assert dm.dim == 3

    def test_rejects_non_hermitian(self):
        m = np.eye(2, dtype=complex)
        m[0, 1] = 1e-6
        with pytest.raises(StateValidationError):
            DensityMatrix(m)

    def test_rejects_wrong_trace(self):
        with pytest.raises(StateValidationError):
            DensityMatrix(np.eye(2))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(StateValidationError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_diagonal_fast_path_catches_negativity(self):
        with pytest.raises(StateValidationError):
            DensityMatrix(np.diag([1.2, -0.2, 0.0]))

    def test_from_state_vector(self):
        v = np.array([1.0, 1.0j]) / np.sqrt(2.0)
        dm = DensityMatrix.from_state_vector(v)
        assert abs(np.trace(dm.entries) - 1.0) < 1e-14
        with pytest.raises(StateValidationError):
            DensityMatrix.from_state_vector(np.array([1.0, 1.0]))


class TestEnsembleMean:
    def test_singleton_partition_is_dephasing(self):
        rng = np.random.default_rng(0)
        rho = random_density(rng, 5)
        mean = ensemble_mean(rho, SectorPartition.singletons(5))
        assert np.allclose(mean.entries, np.diag(np.diag(rho.entries)))

    def test_whole_partition_is_maximally_mixed(self):
        rng = np.random.default_rng(1)
        rho = random_density(rng, 6)
        mean = ensemble_mean(rho, SectorPartition.whole(6))
        assert np.allclose(mean.entries, np.eye(6) / 6.0)

    def test_block_weights_are_sector_traces(self):
        rng = np.random.default_rng(2)
        rho = random_density(rng, 5)
        part = SectorPartition(5, np.array([0, 2]))
        mean = ensemble_mean(rho, part)
        t0 = np.trace(rho.entries[:2, :2]).real
        t1 = np.trace(rho.entries[2:, 2:]).real
        expected = np.diag([t0 / 2, t0 / 2, t1 / 3, t1 / 3, t1 / 3])
        assert np.allclose(mean.entries, expected)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        rho = random_density(rng, 6)
        part = SectorPartition(6, np.array([0, 2, 3]))
        once = ensemble_mean(rho, part)
        twice = ensemble_mean(once, part)
        assert np.allclose(once.entries, twice.entries, atol=1e-14)

    def test_matches_monte_carlo_elementwise(self):
        rng = np.random.default_rng(4)
        rho = random_density(rng, 5)
        part = SectorPartition(5, np.array([0, 2]))
        mean = ensemble_mean(rho, part)
        mc, se_re, se_im = estimate_state_mean(rho, part, n_samples=20_000, seed=17)
        assert np.all(np.abs(mc.real - mean.entries.real) <= 4.0 * se_re + 1e-12)
        assert np.all(np.abs(mc.imag - mean.entries.imag) <= 4.0 * se_im + 1e-12)

    def test_marginal_trace_renormalized(self):
        # trace off by 5e-9 passes the gate and the output is exactly valid
        m = np.diag([0.5 + 5e-9, 0.5]).astype(complex)
        mean = ensemble_mean(m, SectorPartition.singletons(2))
        assert abs(np.trace(mean.entries) - 1.0) < 1e-12

    def test_bad_trace_rejected(self):
        with pytest.raises(StateValidationError):
            ensemble_mean(np.eye(2, dtype=complex), SectorPartition.whole(2))

    def test_dimension_mismatch_rejected(self):
        rng = np.random.default_rng(5)
        with pytest.raises(SectorError):
            ensemble_mean(random_density(rng, 4), SectorPartition.whole(5))


def partitions_of(dim, rng, count=3):
    """A few random partitions plus the two extremes."""
    out = [SectorPartition.singletons(dim), SectorPartition.whole(dim)]
    for _ in range(count):
        n_cuts = int(rng.integers(1, dim)) if dim > 1 else 0
        cuts = np.sort(rng.choice(np.arange(1, dim), size=n_cuts, replace=False)) \
            if n_cuts else np.array([], dtype=np.int64)
        out.append(SectorPartition(dim, np.concatenate(([0], cuts)).astype(np.int64)))
    return out


class TestSecondMoment:
    def test_agrees_with_dense_reference(self):
        rng = np.random.default_rng(6)
        for dim in (2, 3, 5, 8, 12):
            for part in partitions_of(dim, rng):
                rho = random_density(rng, dim)
                a = random_hermitian(rng, dim)
                b = random_hermitian(rng, dim)
                pred = second_moment_expectation(rho, part, a, b).second_moment
                ref = contract_with_pair(dense_second_moment_reference(rho, part), a, b)
                assert pred == pytest.approx(ref, rel=1e-10, abs=1e-12)

    def test_singleton_hand_formula(self):
        rng = np.random.default_rng(7)
        for dim in (2, 4, 7):
            rho = random_density(rng, dim)
            a = random_hermitian(rng, dim)
            b = random_hermitian(rng, dim)
            pred = second_moment_expectation(
                rho, SectorPartition.singletons(dim), a, b).second_moment
            assert pred == pytest.approx(singleton_oracle(rho, a, b), rel=1e-12)

    def test_agrees_with_monte_carlo(self):
        rng = np.random.default_rng(8)
        rho = random_density(rng, 5)
        part = SectorPartition(5, np.array([0, 2]))
        a = random_hermitian(rng, 5)
        b = random_hermitian(rng, 5)
        pred = second_moment_expectation(rho, part, a, b).second_moment
        est = estimate_moments(rho, part, [a, b], order=2,
                               n_samples=100_000, seed=23)[0]
        assert abs(est.value - pred) <= 4.0 * est.std_error

    def test_pure_state_whole_space_closed_form(self):
        # rank-one input and one sector: E = (tr A tr B + tr(AB)) / d(d+1)
        rng = np.random.default_rng(9)
        d = 6
        rho = DensityMatrix.from_state_vector(random_pure(rng, d))
        a = random_hermitian(rng, d)
        b = random_hermitian(rng, d)
        pred = second_moment_expectation(rho, SectorPartition.whole(d), a, b)
        expected = (np.trace(a.entries) * np.trace(b.entries)
                    + np.trace(a.entries @ b.entries)).real / (d * (d + 1))
        assert pred.second_moment == pytest.approx(float(expected), rel=1e-12)

    def test_decomposition_identity(self):
        rng = np.random.default_rng(10)
        rho = random_density(rng, 6)
        part = SectorPartition(6, np.array([0, 3]))
        pred = second_moment_expectation(rho, part,
                                         random_hermitian(rng, 6),
                                         random_hermitian(rng, 6))
        assert pred.second_moment == pred.mean_a * pred.mean_b + pred.connected

    def test_conserved_observable_does_not_fluctuate(self):
        # block-scalar observables commute with every sector rotation
        rng = np.random.default_rng(11)
        part = SectorPartition(6, np.array([0, 2, 5]))
        weights = np.repeat([0.7, -1.3, 2.0], part.sizes)
        a = np.diag(weights).astype(complex)
        rho = random_density(rng, 6)
        pred = second_moment_expectation(rho, part, a, a)
        assert abs(pred.connected) < 1e-13

    def test_invariant_under_block_rotation_of_state(self):
        rng = np.random.default_rng(12)
        d = 7
        part = SectorPartition(d, np.array([0, 3, 5]))
        rho = random_density(rng, d)
        a = random_hermitian(rng, d)
        b = random_hermitian(rng, d)
        u = sample_block_unitary(part, seed=99)
        rotated = DensityMatrix(u.conjugate(rho.entries))
        p1 = second_moment_expectation(rho, part, a, b)
        p2 = second_moment_expectation(rotated, part, a, b)
        assert p2.second_moment == pytest.approx(p1.second_moment, rel=1e-10)
        assert p2.mean_a == pytest.approx(p1.mean_a, rel=1e-10)

    def test_one_dimensional_space_is_deterministic(self):
        rho = DensityMatrix(np.eye(1, dtype=complex))
        a = random_hermitian(np.random.default_rng(13), 1)
        pred = second_moment_expectation(rho, SectorPartition.whole(1), a, a)
        assert pred.connected == pytest.approx(0.0, abs=1e-14)
        assert pred.second_moment == pytest.approx(pred.mean_a ** 2)

    def test_term_breakdown_sums_to_total(self):
        rng = np.random.default_rng(14)
        rho = random_density(rng, 6)
        part = SectorPartition(6, np.array([0, 2, 3]))
        pred = second_moment_expectation(rho, part,
                                         random_hermitian(rng, 6),
                                         random_hermitian(rng, 6))
        total = sum(v["total"] for v in pred.term_breakdown.values())
        assert total == pytest.approx(pred.second_moment, rel=1e-12)
        assert set(pred.term_breakdown) == {
            "same_sector_symmetric", "same_sector_antisymmetric",
            "cross_direct", "cross_exchange"}

    def test_trace_gate(self):
        part = SectorPartition.whole(3)
        a = random_hermitian(np.random.default_rng(15), 3)
        with pytest.raises(StateValidationError):
            second_moment_expectation(np.eye(3, dtype=complex) / 2.9, part, a, a)

    @given(seed=st.integers(0, 10_000))
    @settings(deadline=None, max_examples=25)
    def test_self_moment_bounds_variance(self, seed):
        # E[x^2] >= E[x]^2 must hold for any state/observable/partition
        rng = np.random.default_rng(seed)
        dim = int(rng.integers(2, 9))
        part = partitions_of(dim, rng, count=1)[-1]
        pred = second_moment_expectation(random_density(rng, dim), part,
                                         *(random_hermitian(rng, dim),) * 2)
        assert pred.connected >= -1e-11


class TestDenseReference:
    def test_total_trace_is_one(self):
        rng = np.random.default_rng(16)
        for dim, starts in ((4, [0, 2]), (5, [0, 1, 2, 3, 4]), (3, [0])):
            part = SectorPartition(dim, np.asarray(starts, dtype=np.int64))
            dense = dense_second_moment_reference(random_density(rng, dim), part)
            assert np.trace(dense).real == pytest.approx(1.0, abs=1e-12)

    def test_partial_trace_recovers_mean(self):
        rng = np.random.default_rng(17)
        d = 5
        part = SectorPartition(d, np.array([0, 2]))
        rho = random_density(rng, d)
        dense = dense_second_moment_reference(rho, part).reshape(d, d, d, d)
        first = np.einsum("abcb->ac", dense)
        second = np.einsum("abad->bd", dense)
        mean = ensemble_mean(rho, part).entries
        assert np.max(np.abs(first - mean)) < 1e-12
        assert np.max(np.abs(second - mean)) < 1e-12

    def test_dimension_guard(self):
        rng = np.random.default_rng(18)
        with pytest.raises(ValueError):
            dense_second_moment_reference(random_density(rng, 65),
                                          SectorPartition.whole(65))


class TestCatVarianceClosedForm:
    def test_matches_contraction_for_disjoint_support(self):
        # with disjoint eigenstate supports the quartic formula is exact:
        # compare against the full contraction for the cat state
        rng = np.random.default_rng(19)
        d, k = 9, 4
        v1 = np.zeros(d, dtype=complex)
        v2 = np.zeros(d, dtype=complex)
        v1[:k] = random_pure(rng, k)
        v2[k:] = random_pure(rng, d - k)
        cat = (v1 + v2) / np.sqrt(2.0)
        rho = DensityMatrix.from_state_vector(cat)
        q = np.outer(v1, v2.conj())
        q = q + q.conj().T
        pred = second_moment_expectation(rho, SectorPartition.singletons(d), q, q)
        closed = cat_q_variance_closed_form(v1, v2)
        assert closed == pytest.approx(pred.connected, rel=1e-12)
        assert pred.mean_a == pytest.approx(0.0, abs=1e-14)

    def test_brute_force_quartic_sum(self):
        rng = np.random.default_rng(20)
        d, k = 7, 3
        v1 = np.zeros(d, dtype=complex)
        v2 = np.zeros(d, dtype=complex)
        v1[:k] = random_pure(rng, k)
        v2[k:] = random_pure(rng, d - k)
        w = np.outer(v1, v2.conj()) + np.outer(v2, v1.conj())
        brute = 0.25 * sum(abs(w[i, j]) ** 4
                           for i in range(d) for j in range(d) if i != j)
        assert cat_q_variance_closed_form(v1, v2) == pytest.approx(brute, rel=1e-13)

    def test_basis_vector_pair_gives_half(self):
        v1 = np.zeros(5, dtype=complex); v1[0] = 1.0
        v2 = np.zeros(5, dtype=complex); v2[3] = 1.0
        assert cat_q_variance_closed_form(v1, v2) == pytest.approx(0.5)

    def test_shared_support_rejected(self):
        v = np.zeros(4, dtype=complex)
        v[0] = 1.0
        with pytest.raises(StateValidationError, match="shared"):
            cat_q_variance_closed_form(v, v)

    def test_threshold_parameter_respected(self):
        rng = np.random.default_rng(21)
        v1 = random_pure(rng, 4)
        v2 = random_pure(rng, 4)
        assert float(np.sum(np.abs(v1 * v2))) > 0.2
        cat_q_variance_closed_form(v1, v2, overlap_threshold=2.0)  # no raise
        with pytest.raises(StateValidationError):
            cat_q_variance_closed_form(v1, v2, overlap_threshold=0.1)

    def test_length_mismatch_rejected(self):
        with pytest.raises(StateValidationError):
            cat_q_variance_closed_form(np.zeros(3), np.zeros(4))


class TestSectorBlock:
    def test_extracts_expected_block(self):
        rng = np.random.default_rng(22)
        m = rng.normal(size=(5, 5))
        part = SectorPartition(5, np.array([0, 2]))
        blk = sector_block(m, part, 0, 1)
        assert np.array_equal(blk, m[:2, 2:])

    def test_returns_a_copy(self):
        m = np.zeros((4, 4))
        part = SectorPartition(4, np.array([0, 2]))
        blk = sector_block(m, part, 0, 0)
        blk[0, 0] = 5.0
        assert m[0, 0] == 0.0

    def test_out_of_range_sector(self):
        part = SectorPartition(4, np.array([0, 2]))
        with pytest.raises(SectorError):
            sector_block(np.zeros((4, 4)), part, 0, 2)
