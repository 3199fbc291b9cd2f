import math

import numpy as np
import pytest

from pairdesign.core import Allocation, BlockPartition, ResponseModel, Subjects
from pairdesign.designs import bcrd, sample_allocation, sorted_block_partition
from pairdesign.estimators import LogisticModelSpec, response_model_from_spec
from pairdesign.mse import exact_mse, tau
from pairdesign.rng import SplitMix64
from pairdesign.simulation import (DesignSpec, SimConfig,
                                   block_homogeneous_covariates,
                                   draw_responses, estimate_design_mse,
                                   hierarchical_block_partition,
                                   logistic_quantile_grid, parametric_bootstrap,
                                   resolve_design, run_monte_carlo)


class TestQuantileGrid:
    def test_endpoints(self):
        g = logistic_quantile_grid(64)
        assert g[0] == pytest.approx(-math.log(199.0))
        assert g[-1] == pytest.approx(math.log(199.0))

    def test_midpoint_zero_for_odd_grid(self):
        g = logistic_quantile_grid(9)
        assert g[4] == pytest.approx(0.0, abs=1e-12)

    def test_strictly_increasing(self):
        g = logistic_quantile_grid(128)
        assert np.all(np.diff(g) > 0)


class TestBlockHomogeneousCovariates:
    def test_d1_is_the_grid(self):
        s = block_homogeneous_covariates(64, 1, SplitMix64(0))
        assert np.allclose(s.X[:, 0], logistic_quantile_grid(64))

    def test_d2_cross_blocks_equal(self):
        s = block_homogeneous_covariates(64, 2, SplitMix64(1))
        part = hierarchical_block_partition(s)
        assert part.n_blocks == 8
        assert part.sizes == (8,) * 8
        # blocks are a real partition and homogeneous in the first covariate
        quartiles = np.argsort(s.X[:, 0], kind="stable").reshape(4, 16)
        for b, block in enumerate(part.blocks):
            assert set(block) <= set(quartiles[b // 2])

    def test_d5_blocks(self):
        s = block_homogeneous_covariates(64, 5, SplitMix64(2))
        part = hierarchical_block_partition(s)
        assert part.n_blocks == 8
        assert part.sizes == (8,) * 8
        assert s.d == 5

    def test_invalid_d(self):
        with pytest.raises(ValueError):
            block_homogeneous_covariates(64, 3, SplitMix64(0))

    def test_indivisible_n(self):
        with pytest.raises(ValueError):
            block_homogeneous_covariates(60, 1, SplitMix64(0))


class TestDrawResponses:
    def test_certain_success(self):
        m = ResponseModel([1.0] * 4, [1.0] * 4)
        y = draw_responses(m, Allocation([1, -1, 1, -1]), SplitMix64(1))
        assert np.all(y == 1)

    def test_treatment_determines_outcome(self):
        m = ResponseModel([1.0] * 4, [0.0] * 4)
        w = Allocation([1, -1, -1, 1])
        y = draw_responses(m, w, SplitMix64(2))
        assert np.array_equal(y, (w.w + 1) // 2)

    def test_empirical_mean_concentrates(self):
        p = 0.3
        m = ResponseModel([p] * 4, [p] * 4)
        w = Allocation([1, -1, 1, -1])
        rng = SplitMix64(3)
        draws = 25_000
        acc = np.zeros(4)
        for _ in range(draws):
            acc += draw_responses(m, w, rng)
        tol = 4 * math.sqrt(p * (1 - p) / draws)
        assert np.all(np.abs(acc / draws - p) < tol)


class TestDesignSpec:
    def test_labels(self):
        assert DesignSpec("bcrd").label == "bcrd"
        assert DesignSpec("block", 8).label == "block:8"
        assert DesignSpec("pm").label == "pm"

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            DesignSpec("rerandomize")

    def test_resolve_pm_d1_is_sorted_adjacent(self):
        x = np.array([3.0, 0.0, 1.0, 2.0])
        s = Subjects(ids=(1, 2, 3, 4), X=x.reshape(-1, 1))
        layout = resolve_design(DesignSpec("pm"), s)
        # sorted order is 1,2,3,0; pairs normalize to (low, high) by low
        assert layout.partition.blocks == ((0, 3), (1, 2))

    def test_resolve_pm_multi_covariate_uses_matching(self):
        rng = SplitMix64(4)
        X = np.array([[rng.next_double(), rng.next_double()] for _ in range(8)])
        s = Subjects(ids=tuple(range(8)), X=X)
        layout = resolve_design(DesignSpec("pm"), s)
        assert layout.partition.is_pairwise


class TestRunMonteCarlo:
    def test_null_effect_mean_near_zero(self):
        cfg = SimConfig(n_subjects=16, d=1,
                        designs=(DesignSpec("bcrd"),),
                        model=LogisticModelSpec(0.5, [1.0], 0.0),
                        n_sim=20_000, seed=11)
        res = run_monte_carlo(cfg)
        row = res.row("bcrd", "diff_in_means")
        assert row.target == pytest.approx(0.0, abs=1e-15)
        assert abs(row.mean_estimate) < 4 * math.sqrt(row.mse / row.n_sim)

    def test_matches_exact_mse_all_designs(self):
        cfg = SimConfig(n_subjects=16, d=1,
                        designs=(DesignSpec("bcrd"), DesignSpec("block", 4),
                                 DesignSpec("pm")),
                        model=LogisticModelSpec(1.0, [2.0], 1.0),
                        n_sim=60_000, seed=21)
        res = run_monte_carlo(cfg)
        rng = SplitMix64(0)
        subjects = block_homogeneous_covariates(16, 1, rng)
        model = response_model_from_spec(cfg.model, subjects)
        for spec in cfg.designs:
            layout = resolve_design(spec, subjects)
            ex = exact_mse(model, layout.partition).total
            row = res.row(spec.label, "diff_in_means")
            assert abs(row.mse - ex) < 3 * row.mc_se

    def test_thread_count_does_not_change_results(self):
        cfg = SimConfig(n_subjects=16, d=1,
                        designs=(DesignSpec("bcrd"), DesignSpec("pm")),
                        model=LogisticModelSpec(0.5, [1.5], 0.5),
                        n_sim=5_000, seed=31, batch_size=512,
                        estimators=("diff_in_means", "log_odds_ratio"))
        r1 = run_monte_carlo(cfg, threads=1)
        r4 = run_monte_carlo(cfg, threads=4)
        assert r1.rows == r4.rows

    def test_lor_reported_against_both_conventions(self):
        cfg = SimConfig(n_subjects=16, d=1,
                        designs=(DesignSpec("bcrd"),),
                        model=LogisticModelSpec(0.0, [1.0], 0.5),
                        n_sim=2_000, seed=41,
                        estimators=("log_odds_ratio",))
        res = run_monte_carlo(cfg)
        r1 = res.row("bcrd", "log_odds_ratio_vs_beta_t")
        r2 = res.row("bcrd", "log_odds_ratio_vs_2beta_t")
        assert r1.target == 0.5 and r2.target == 1.0
        assert r1.mean_estimate == r2.mean_estimate

    def test_excluded_counts_sum(self):
        cfg = SimConfig(n_subjects=32, d=1,
                        designs=(DesignSpec("bcrd"),),
                        model=LogisticModelSpec(4.0, [2.0], 1.0),
                        n_sim=300, seed=51,
                        estimators=("diff_in_means", "logistic"))
        res = run_monte_carlo(cfg)
        row = res.row("bcrd", "logistic_beta_t")
        assert 0 <= row.excluded <= row.n_sim


class TestRandomMatchingEqualsBcrd:
    def test_mse_agreement(self):
        rng = SplitMix64(10)
        nn = 12
        model = ResponseModel(np.array([rng.next_double() for _ in range(nn)]),
                              np.array([rng.next_double() for _ in range(nn)]))
        a = estimate_design_mse(model, bcrd(nn), n_sim=100_000, seed=61)
        b = estimate_design_mse(model, "pm_random", n_sim=100_000, seed=62)
        assert abs(a.mse - b.mse) < 3 * math.hypot(a.mc_se, b.mc_se)


class TestParametricBootstrap:
    def _subjects(self, nn=40, d=1, seed=5):
        rng = SplitMix64(seed)
        X = np.array([[rng.next_double() * 4 - 2 for _ in range(d)]
                      for _ in range(nn)])
        return Subjects(ids=tuple(range(1, nn + 1)), X=X)

    def test_full_size_agrees_with_synthetic_engine(self):
        subjects = self._subjects(nn=16)
        fitted = LogisticModelSpec(0.5, [1.0], 1.0)
        cfg = SimConfig(n_subjects=16, d=1, designs=(DesignSpec("bcrd"),),
                        model=fitted, n_sim=40_000, seed=71)
        res = parametric_bootstrap(subjects, fitted, cfg)
        row = res.row("bcrd", "diff_in_means", 16)
        model = response_model_from_spec(fitted, subjects)
        direct = estimate_design_mse(model, bcrd(16), n_sim=40_000, seed=72)
        assert abs(row.mse - direct.mse) < 3 * math.hypot(row.mc_se, direct.mc_se)

    def test_target_recomputed_from_model(self):
        subjects = self._subjects(nn=20)
        fitted = LogisticModelSpec(0.2, [0.8], 1.0)
        cfg = SimConfig(n_subjects=20, d=1, designs=(DesignSpec("bcrd"),),
                        model=fitted, n_sim=500, seed=81)
        res = parametric_bootstrap(subjects, fitted, cfg)
        row = res.row("bcrd", "diff_in_means", 20)
        model = response_model_from_spec(fitted, subjects)
        # full-pool subsamples make the per-replicate target the pool value
        assert abs(row.mean_estimate - tau(model)) < 0.1

    def test_subsampling_and_determinism(self):
        subjects = self._subjects(nn=24)
        fitted = LogisticModelSpec(0.5, [1.2], 1.0)
        cfg = SimConfig(n_subjects=24, d=1,
                        designs=(DesignSpec("bcrd"), DesignSpec("pm")),
                        model=fitted, n_sim=400, seed=91)
        r1 = parametric_bootstrap(subjects, fitted, cfg,
                                  subsample_sizes=(12, 20), threads=1)
        r2 = parametric_bootstrap(subjects, fitted, cfg,
                                  subsample_sizes=(12, 20), threads=3)
        # repr equality covers the nan risk-difference display target too
        assert repr(r1.rows) == repr(r2.rows)
        assert {row.n_subjects for row in r1.rows} == {12, 20}

    def test_informative_covariate_pm_beats_bcrd(self):
        nn = 60
        x = logistic_quantile_grid(nn)
        subjects = Subjects(ids=tuple(range(nn)), X=x.reshape(-1, 1))
        fitted = LogisticModelSpec(4.0, [2.0], 1.0)
        cfg = SimConfig(n_subjects=nn, d=1,
                        designs=(DesignSpec("bcrd"), DesignSpec("pm")),
                        model=fitted, n_sim=8_000, seed=101)
        res = parametric_bootstrap(subjects, fitted, cfg,
                                   subsample_sizes=(40,))
        b = res.row("bcrd", "diff_in_means", 40)
        p = res.row("pm", "diff_in_means", 40)
        assert b.mse / p.mse > 1.5

    def test_bad_subsample_size_rejected(self):
        subjects = self._subjects(nn=20)
        fitted = LogisticModelSpec(0.0, [1.0], 0.0)
        cfg = SimConfig(n_subjects=20, d=1, designs=(DesignSpec("bcrd"),),
                        model=fitted, n_sim=10, seed=1)
        with pytest.raises(ValueError):
            parametric_bootstrap(subjects, fitted, cfg, subsample_sizes=(21,))
