import numpy as np
import pytest

from pairdesign.core import MatchSet, PartitionError, Subjects
from pairdesign.matching import (brute_force_matching, greedy_matching,
                                 mahalanobis_distance_matrix, matching_total,
                                 matchset_to_partition,
                                 min_weight_perfect_matching)
from pairdesign.designs import sorted_pair_matching
from pairdesign.rng import SplitMix64


def random_distance_matrix(n, rng, tie_prone=False):
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if tie_prone:
                d = float(rng.next_below(4)) * 0.5
            else:
                d = rng.next_double() * 10.0
            D[i, j] = D[j, i] = d
    return D


class TestMahalanobis:
    def test_one_dim_hand_value(self):
        # sample variance of (0, 1, 2) is 1, so squared distances are plain
        D = mahalanobis_distance_matrix(np.array([[0.0], [1.0], [2.0]]))
        assert D[0, 2] == pytest.approx(4.0)
        assert D[0, 1] == pytest.approx(1.0)
        assert np.allclose(np.diag(D), 0.0)

    def test_identical_rows_distance_zero(self):
        X = np.array([[1.0, 2.0], [1.0, 2.0], [3.0, 0.0], [5.0, 4.0]])
        D = mahalanobis_distance_matrix(X)
        assert D[0, 1] == pytest.approx(0.0, abs=1e-20)

    def test_constant_column_matches_dropping_it(self):
        rng = SplitMix64(31)
        X = np.array([[rng.next_double(), 7.0] for _ in range(8)])
        D_with = mahalanobis_distance_matrix(X)
        D_without = mahalanobis_distance_matrix(X[:, :1])
        assert np.allclose(D_with, D_without, atol=1e-8)
        assert np.all(np.isfinite(D_with))

    def test_accepts_subjects(self):
        s = Subjects(ids=(1, 2, 3, 4), X=[[0.0], [1.0], [2.0], [3.0]])
        D = mahalanobis_distance_matrix(s)
        assert D.shape == (4, 4)

    def test_no_covariates_error(self):
        s = Subjects(ids=(1, 2, 3, 4), X=np.zeros((4, 0)))
        with pytest.raises(ValueError):
            mahalanobis_distance_matrix(s)

    def test_scale_invariance_of_metric(self):
        rng = SplitMix64(5)
        X = np.array([[rng.next_double(), rng.next_double()] for _ in range(6)])
        D1 = mahalanobis_distance_matrix(X)
        D2 = mahalanobis_distance_matrix(X * np.array([100.0, 0.01]))
        assert np.allclose(D1, D2, atol=1e-8)


class TestMinWeightPerfectMatching:
    def test_line_points(self):
        x = np.array([0.0, 1.0, 10.0, 11.0])
        D = (x[:, None] - x[None, :]) ** 2
        m = min_weight_perfect_matching(D)
        assert m.pairs == ((0, 1), (2, 3))
        assert matching_total(D, m) == pytest.approx(2.0)

    def test_all_equal_lexicographic(self):
        D = np.ones((6, 6))
        np.fill_diagonal(D, 0.0)
        assert min_weight_perfect_matching(D).pairs == ((0, 1), (2, 3), (4, 5))

    def test_odd_dimension_rejected(self):
        with pytest.raises(ValueError):
            min_weight_perfect_matching(np.zeros((5, 5)))

    def test_nonfinite_rejected(self):
        D = np.zeros((4, 4))
        D[0, 1] = D[1, 0] = np.inf
        with pytest.raises(ValueError):
            min_weight_perfect_matching(D)

    def test_negative_rejected(self):
        D = np.zeros((4, 4))
        D[0, 1] = D[1, 0] = -1.0
        with pytest.raises(ValueError):
            min_weight_perfect_matching(D)

    @pytest.mark.parametrize("n", [6, 8, 10])
    def test_oracle_agreement(self, n):
        rng = SplitMix64(1000 + n)
        for t in range(60):
            D = random_distance_matrix(n, rng, tie_prone=(t % 3 == 0))
            assert min_weight_perfect_matching(D).pairs == \
                brute_force_matching(D).pairs

    def test_scale_invariance(self):
        rng = SplitMix64(12)
        for _ in range(10):
            D = random_distance_matrix(8, rng)
            base = min_weight_perfect_matching(D).pairs
            for c in (0.5, 2.0, 3.7, 1e-6, 1e6):
                assert min_weight_perfect_matching(c * D).pairs == base

    def test_beats_random_matchings(self):
        rng = SplitMix64(77)
        D = random_distance_matrix(10, rng)
        best = matching_total(D, min_weight_perfect_matching(D))
        idx = list(range(10))
        for _ in range(100):
            rng.shuffle(idx)
            m = MatchSet([(idx[2 * k], idx[2 * k + 1]) for k in range(5)])
            assert best <= matching_total(D, m) + 1e-9

    def test_relabeling_equivariance(self):
        rng = SplitMix64(42)
        D = random_distance_matrix(8, rng)
        perm = list(range(8))
        rng.shuffle(perm)
        Dp = D[np.ix_(perm, perm)]
        mp = min_weight_perfect_matching(Dp)
        back = MatchSet([(perm[i], perm[j]) for i, j in mp.pairs])
        assert matching_total(D, back) == pytest.approx(
            matching_total(D, min_weight_perfect_matching(D)))


class TestBruteForce:
    def test_line_example(self):
        x = np.array([0.0, 1.0, 10.0, 11.0])
        D = (x[:, None] - x[None, :]) ** 2
        assert brute_force_matching(D).pairs == ((0, 1), (2, 3))

    def test_two_nodes(self):
        D = np.array([[0.0, 3.0], [3.0, 0.0]])
        assert brute_force_matching(D).pairs == ((0, 1),)

    def test_cap(self):
        with pytest.raises(ValueError):
            brute_force_matching(np.zeros((14, 14)))

    def test_permutation_equivariance(self):
        rng = SplitMix64(6)
        D = random_distance_matrix(6, rng)
        perm = [3, 0, 5, 1, 4, 2]
        Dp = D[np.ix_(perm, perm)]
        m = brute_force_matching(D)
        mp = brute_force_matching(Dp)
        back = sorted(tuple(sorted((perm[i], perm[j]))) for i, j in mp.pairs)
        assert matching_total(D, MatchSet(back)) == pytest.approx(
            matching_total(D, m))


class TestSortedEqualsMatched1d:
    def test_adjacent_pairing_is_optimal_on_a_line(self):
        rng = SplitMix64(90)
        for _ in range(30):
            x = np.array([rng.next_double() * 5 for _ in range(8)])
            D = (x[:, None] - x[None, :]) ** 2
            assert min_weight_perfect_matching(D).pairs == \
                sorted_pair_matching(x).pairs == brute_force_matching(D).pairs


class TestGreedy:
    def test_returns_valid_matching_but_can_be_suboptimal(self):
        # classic greedy trap: taking the cheapest edge forces a bad leftover
        D = np.array([
            [0.0, 1.0, 2.0, 6.0],
            [1.0, 0.0, 5.0, 2.0],
            [2.0, 5.0, 0.0, 9.0],
            [6.0, 2.0, 9.0, 0.0],
        ])
        g = greedy_matching(D)
        o = min_weight_perfect_matching(D)
        assert matching_total(D, g) >= matching_total(D, o)
        assert g.n_pairs == 2


class TestMatchsetToPartition:
    def test_conversion(self):
        part = matchset_to_partition(MatchSet([(0, 1), (2, 3)]))
        assert part.blocks == ((0, 1), (2, 3))
        assert part.is_pairwise

    def test_three_pairs(self):
        part = matchset_to_partition(MatchSet([(0, 5), (1, 4), (2, 3)]))
        assert part.n_blocks == 3

    def test_empty_rejected(self):
        with pytest.raises(PartitionError):
            MatchSet([])
