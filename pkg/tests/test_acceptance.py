"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines and
timings.  Tolerances are fixed here, not calibrated.
"""

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from pairdesign.core import BlockPartition, MatchSet, ResponseModel
from pairdesign.designs import (bcrd, covariance_matrix, empirical_covariance,
                                support_matrix)
from pairdesign.estimators import LogisticModelSpec
from pairdesign.mse import (bcrd_expected_r_squared, exact_mse,
                            match_r_squared, mse_gap_bcrd_pm)
from pairdesign.rng import SplitMix64
from pairdesign.simulation import (DesignSpec, SimConfig, estimate_design_mse,
                                   resolve_design, run_monte_carlo,
                                   block_homogeneous_covariates)
from pairdesign.estimators import response_model_from_spec
from pairdesign import verify

SEED = 20240801


def report(num, ok, text):
    print(f"\nACCEPTANCE {num:2d}: {'PASS' if ok else 'FAIL'} - {text}")
    assert ok, text


def test_criterion_01_sigma_oracle():
    t0 = time.time()
    res = verify.check_sigma_oracle(sizes=(4, 6, 8, 10), tol=1e-12)
    dt = time.time() - t0
    report(1, res.passed and dt < 5.0,
           f"covariance closed form == enumerated support for "
           f"{res.detail['partitions_checked']} partitions, "
           f"max dev {res.statistic:.2e} <= 1e-12, {dt:.1f}s (< 5s)")


def test_criterion_02_exact_mse_oracle():
    t0 = time.time()
    res = verify.check_exact_mse_oracle(SEED, sizes=(4, 6, 8), n_instances=200,
                                        tol=1e-12)
    dt = time.time() - t0
    report(2, res.statistic <= 1e-12 and dt < 10.0,
           f"closed-form MSE == brute-force MSE on 200 instances, "
           f"max dev {res.statistic:.2e} <= 1e-12, {dt:.1f}s (< 10s)")


def test_criterion_03_unbiasedness():
    res = verify.check_exact_mse_oracle(SEED, sizes=(4, 6, 8), n_instances=200)
    bias = res.detail["max_bias"]
    report(3, bias < 1e-14,
           f"exhaustive estimator bias {bias:.2e} < 1e-14 on the same instances")


def test_criterion_04_theorem1():
    t0 = time.time()
    res = verify.check_theorem1_sweep(SEED, sizes=(8, 12, 16), n_vectors=1000,
                                      tol=1e-12)
    dt = time.time() - t0
    report(4, res.passed and res.detail["non_strict"] == 0 and dt < 30.0,
           f"pair form <= block form in {res.detail['comparisons']} comparisons "
           f"(0 violations, 0 non-strict with continuous vectors), "
           f"{dt:.1f}s (< 30s)")


def test_criterion_05_minimax():
    ok = True
    measured = {}
    for nn in (4, 6, 8):
        rep = verify.check_minimax(nn, n_mixtures=100, seed=SEED)
        measured[nn] = rep.pm_corner_max
        ok = ok and rep.passed and rep.pm_corner_max == 4.0
    report(5, ok,
           "sorted pairing's corner max is minimal among all enumerated "
           f"blockings and 100 mixtures at 2n in (4,6,8); measured corner max "
           f"= {sorted(set(measured.values()))} (exactly 4 = 4x unit diagonal; "
           "see decisions ledger for the constant discrepancy note)")


def test_criterion_06_remark1():
    ok = True
    for nn in (4, 6, 8):
        res = verify.check_remark1(nn)
        ok = ok and res.passed
    rng = SplitMix64(6)
    nn = 12
    model = ResponseModel(np.array([rng.next_double() for _ in range(nn)]),
                          np.array([rng.next_double() for _ in range(nn)]))
    a = estimate_design_mse(model, bcrd(nn), n_sim=100_000, seed=SEED + 1)
    b = estimate_design_mse(model, "pm_random", n_sim=100_000, seed=SEED + 2)
    gap = abs(a.mse - b.mse)
    bound = 3 * math.hypot(a.mc_se, b.mc_se)
    ok = ok and gap < bound
    report(6, ok,
           f"mean pairing covariance == complete-randomization covariance "
           f"(2n=4,6,8); Monte Carlo MSEs (N=100k) agree: |diff|={gap:.2e} "
           f"< 3*SE={bound:.2e}")


def test_criterion_07_remark2_equivalences():
    res = verify.check_remark2_equivalences(SEED, sizes=(6, 8, 12, 16),
                                            n_instances=1000)
    report(7, res.passed,
           f"gap sign == pair-distance comparison == R-squared comparison on "
           f"{res.detail['instances']} random (v, matching) instances, "
           "0 disagreements")


def test_criterion_08_matching_oracle():
    res = verify.check_matching_oracle(SEED, sizes=(6, 8, 10),
                                       instances_per_size=170)
    report(8, res.passed,
           f"exact matcher == brute force on {res.detail['instances']} "
           f"instances, 0 mismatches, 0 scale-invariance breaks")


def test_criterion_09_desk_scale_replication():
    t0 = time.time()
    cfg = SimConfig(n_subjects=64, d=1,
                    designs=(DesignSpec("bcrd"), DesignSpec("block", 8),
                             DesignSpec("pm")),
                    model=LogisticModelSpec(4.0, [2.0], 1.0, "expit"),
                    n_sim=100_000, seed=SEED)
    res = run_monte_carlo(cfg)
    dt = time.time() - t0
    mse = {r.design: r.mse for r in res.rows if r.estimator == "diff_in_means"}
    ordering = mse["pm"] <= mse["block:8"] < mse["bcrd"]
    ratio = mse["bcrd"] / mse["pm"]
    report(9, ordering and ratio > 1.5 and dt < 300.0,
           f"2n=64, d=1, N=100k risk difference: "
           f"PM {mse['pm']:.3e} <= BL(8) {mse['block:8']:.3e} "
           f"< BCRD {mse['bcrd']:.3e}; ratio {ratio:.2f} > 1.5; "
           f"{dt:.1f}s (< 300s)")


def test_criterion_10_monte_carlo_consistency():
    cfg_model = LogisticModelSpec(1.0, [2.0], 1.0, "expit")
    subjects = block_homogeneous_covariates(16, 1, SplitMix64(0))
    model = response_model_from_spec(cfg_model, subjects)
    ok = True
    details = []
    for spec in (DesignSpec("bcrd"), DesignSpec("block", 4), DesignSpec("pm")):
        layout = resolve_design(spec, subjects)
        row = estimate_design_mse(model, layout.partition, n_sim=200_000,
                                  seed=SEED + 10, label=spec.label)
        exact = exact_mse(model, layout.partition).total
        z = abs(row.mse - exact) / row.mc_se
        details.append(f"{spec.label} z={z:.2f}")
        ok = ok and z < 3.0
    report(10, ok,
           "empirical MSE within 3 Monte Carlo SEs of the closed form at "
           f"2n=16, N=200k: {', '.join(details)}")


def test_criterion_11_thread_determinism(tmp_path):
    cfg = {
        "n_subjects": 32, "d": 1, "beta0": 4.0, "beta": [2.0], "beta_t": 1.0,
        "link": "expit", "designs": ["bcrd", "block:8", "pm"],
        "n_sim": 20_000, "seed": 77,
        "estimators": ["diff_in_means", "log_odds_ratio"], "batch_size": 1024,
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))
    blobs = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}"
        proc = subprocess.run(
            [sys.executable, "-m", "pairdesign.cli", "simulate",
             "--config", str(cfg_path), "--threads", threads,
             "--out", str(out)],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        blobs.append((out / "results.csv").read_bytes())
    report(11, blobs[0] == blobs[1],
           "simulate with --threads 1 and --threads 4 produced byte-identical "
           f"results.csv ({len(blobs[0])} bytes)")
