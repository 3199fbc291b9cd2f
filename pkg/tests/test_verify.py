import numpy as np
import pytest

from pairdesign.core import BlockPartition, ResponseModel
from pairdesign.designs import bcrd, covariance_matrix
from pairdesign.mse import exact_mse
from pairdesign.rng import SplitMix64
from pairdesign.verify import (all_perfect_matchings, brute_force_mse,
                               check_exact_mse_oracle, check_matching_oracle,
                               check_minimax, check_remark1,
                               check_remark2_equivalences, check_remark3,
                               check_sigma_oracle, check_theorem1,
                               check_theorem1_sweep, check_unbiasedness,
                               even_compositions, even_set_partitions,
                               mixture_design_covariance,
                               random_even_partition, random_response_model,
                               run_all)

PM4 = BlockPartition([(0, 1), (2, 3)])


class TestEnumerators:
    @pytest.mark.parametrize("n,count", [(4, 4), (6, 31), (8, 379)])
    def test_even_set_partition_counts(self, n, count):
        parts = list(even_set_partitions(n))
        assert len(parts) == count
        assert len({p.blocks for p in parts}) == count

    @pytest.mark.parametrize("n,count", [(2, 1), (4, 3), (6, 15), (8, 105)])
    def test_matching_counts(self, n, count):
        assert sum(1 for _ in all_perfect_matchings(n)) == count

    def test_even_compositions(self):
        comps = list(even_compositions(8))
        assert (8,) in comps and (2, 2, 2, 2) in comps and (4, 2, 2) in comps
        assert len(comps) == 8  # compositions of 4 into positive parts

    def test_random_even_partition_valid(self):
        rng = SplitMix64(1)
        for _ in range(50):
            part = random_even_partition(10, rng)
            assert part.n_subjects == 10
            assert all(s % 2 == 0 for s in part.sizes)


class TestBruteForceMse:
    def test_equals_closed_form_random(self):
        rng = SplitMix64(2)
        for _ in range(20):
            model = random_response_model(4, rng)
            for part in (PM4, bcrd(4)):
                assert brute_force_mse(model, part) == pytest.approx(
                    exact_mse(model, part).total, abs=1e-12)

    def test_half_probabilities(self):
        model = ResponseModel([0.5] * 4, [0.5] * 4)
        assert brute_force_mse(model, bcrd(4)) == pytest.approx(0.25, abs=1e-15)

    def test_constant_v_design_free(self):
        model = ResponseModel([0.7, 0.6, 0.5, 0.4], [0.3, 0.4, 0.5, 0.6])
        vals = {brute_force_mse(model, p) for p in (PM4, bcrd(4))}
        assert max(vals) - min(vals) < 1e-15

    def test_cap(self):
        model = random_response_model(12, SplitMix64(3))
        with pytest.raises(ValueError):
            brute_force_mse(model, bcrd(12))


class TestUnbiasedness:
    def test_tiny_bias_everywhere(self):
        rng = SplitMix64(4)
        for nn in (4, 6, 8):
            for _ in range(10):
                model = random_response_model(nn, rng)
                part = random_even_partition(nn, rng)
                assert check_unbiasedness(model, part) < 1e-14


class TestTheorem1:
    def test_corner_example(self):
        rep = check_theorem1([0.0, 0.0, 2.0, 2.0], [4])
        assert rep.passed
        assert rep.pm_value == pytest.approx(0.0)
        assert rep.block_value == pytest.approx(16.0 / 3.0)

    def test_constant_vector_equality(self):
        rep = check_theorem1([1.0] * 8, [4, 4])
        assert rep.passed and not rep.strict
        assert rep.pm_value == rep.block_value == 0.0

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            check_theorem1([1.0, 0.5, 2.0, 1.5], [4])

    def test_per_block_chain_reported(self):
        rep = check_theorem1([0.0, 0.5, 1.0, 1.5, 1.6, 1.7, 1.8, 2.0], [4, 4])
        assert len(rep.per_block) == 2
        assert all(b["holds"] for b in rep.per_block)

    def test_sweep_no_violations(self):
        res = check_theorem1_sweep(123, sizes=(8,), n_vectors=200)
        assert res.passed
        assert res.detail["violations"] == 0
        assert res.detail["non_strict"] == 0


class TestMinimax:
    def test_small_case_values(self):
        rep = check_minimax(4, n_mixtures=50, seed=5)
        assert rep.passed
        assert rep.pm_corner_max == 4.0
        assert rep.worst_other >= 4.0
        assert rep.dense_ok

    def test_mixture_designs_satisfy_assumptions(self):
        rng = SplitMix64(6)
        for _ in range(20):
            sigma = mixture_design_covariance(6, 1 + rng.next_below(4), rng).sigma
            assert np.allclose(np.diag(sigma), 1.0)
            assert np.max(np.abs(sigma.sum(axis=1))) < 1e-12  # balance
            assert np.allclose(sigma, sigma.T)

    def test_cap(self):
        with pytest.raises(ValueError):
            check_minimax(10)


class TestRemark1:
    def test_average_pairing_covariance_is_bcrd(self):
        for nn in (4, 6):
            res = check_remark1(nn)
            assert res.passed
            assert res.statistic < 1e-12

    def test_hand_value_4(self):
        # mean over the three pairings of any off-diagonal entry is -1/3
        acc = np.zeros((4, 4))
        for pairs in all_perfect_matchings(4):
            acc += covariance_matrix(BlockPartition(pairs)).sigma
        acc /= 3
        assert acc[0, 1] == pytest.approx(-1.0 / 3.0)
        assert np.allclose(np.diag(acc), 1.0)


class TestRemark2:
    def test_equivalences_hold(self):
        res = check_remark2_equivalences(7, sizes=(6, 8), n_instances=300)
        assert res.passed


class TestRemark3:
    def test_constant_vector_design_free(self):
        parts = list(even_set_partitions(6))
        res = check_remark3(parts, constant=1.0)
        assert res.passed
        res = check_remark3(parts, constant=1.9)
        assert res.passed

    def test_bad_constant_rejected(self):
        with pytest.raises(ValueError):
            check_remark3([bcrd(4)], constant=2.5)


class TestSuite:
    def test_sigma_oracle_small(self):
        res = check_sigma_oracle(sizes=(4, 6))
        assert res.passed and res.statistic <= 1e-12

    def test_sigma_oracle_tamper_fails(self):
        res = check_sigma_oracle(sizes=(4,), _tamper=True)
        assert not res.passed

    def test_exact_mse_oracle(self):
        res = check_exact_mse_oracle(9, n_instances=30)
        assert res.passed

    def test_matching_oracle(self):
        res = check_matching_oracle(10, sizes=(6,), instances_per_size=15)
        assert res.passed

    def test_run_all_fast(self):
        results = run_all(seed=99, fast=True)
        assert all(r.passed for r in results)
        names = {r.name for r in results}
        assert {"sigma_oracle", "exact_mse_oracle", "theorem1", "remark2",
                "matching_oracle", "remark1", "remark3"} <= names
