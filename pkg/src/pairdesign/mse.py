"""Closed-form error analysis of the difference-in-means estimator.

With subject success probabilities ``p_t`` and ``p_c`` fixed and the
allocation drawn from a balanced design with covariance ``sigma``, the
estimator ``w . y / n`` is unbiased for the mean risk difference and its
mean squared error decomposes as

    MSE = (v' sigma v + 2 * (p_t'(1 - p_t) + p_c'(1 - p_c))) / (4 n^2)

where ``v = p_t + p_c``.  Only the quadratic form depends on the design, so
design comparison reduces to comparing ``v' sigma v``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BlockPartition, CovarianceMatrix, MatchSet, ResponseModel
from .designs import covariance_matrix


def tau(model: ResponseModel) -> float:
    """Mean risk difference over the fixed subject pool."""
    return float(np.mean(model.p_t - model.p_c))


def _as_matrix(sigma) -> np.ndarray:
    if isinstance(sigma, CovarianceMatrix):
        return sigma.sigma
    return np.asarray(sigma, dtype=float)


def quadratic_form(v, sigma) -> float:
    """``v' sigma v`` for a covariance matrix or plain array."""
    v = np.asarray(v, dtype=float)
    mat = _as_matrix(sigma)
    if mat.shape != (v.shape[0], v.shape[0]):
        raise ValueError(
            f"dimension mismatch: v has length {v.shape[0]}, sigma is {mat.shape}")
    return float(v @ mat @ v)


def pm_quadratic_form(v, matches: MatchSet) -> float:
    """Quadratic form under pair matching: sum of squared within-pair gaps."""
    v = np.asarray(v, dtype=float)
    if matches.n_subjects != v.shape[0]:
        raise ValueError("match set does not cover the vector")
    return float(sum((v[i] - v[j]) ** 2 for i, j in matches.pairs))


def block_quadratic_form(v, partition: BlockPartition) -> float:
    """Quadratic form under a block design, via block-centered subvectors.

    Equals ``sum_b m_b/(m_b - 1) * ||v_b - mean(v_b)||^2``, which is the
    same number as ``quadratic_form(v, covariance_matrix(partition))`` but
    is exact (zero) for constant vectors.
    """
    v = np.asarray(v, dtype=float)
    if partition.n_subjects != v.shape[0]:
        raise ValueError("partition does not cover the vector")
    total = 0.0
    for block in partition.blocks:
        sub = v[list(block)]
        centered = sub - sub.mean()
        m = len(block)
        total += m / (m - 1) * float(centered @ centered)
    return total


@dataclass(frozen=True)
class MseBreakdown:
    """Total MSE and its two summands (already divided by ``4 n^2``).

    ``design_term`` is the quadratic-form part, the only piece a design can
    influence; ``noise_term`` is the summed Bernoulli variance of both arms.
    """

    total: float
    design_term: float
    noise_term: float
    quadratic_form: float
    tau: float


def exact_mse(model: ResponseModel, partition: BlockPartition) -> MseBreakdown:
    """Exact estimator MSE under the given block design."""
    if model.n_subjects != partition.n_subjects:
        raise ValueError("model and partition sizes differ")
    n = model.n_subjects // 2
    qf = block_quadratic_form(model.v, partition)
    bern = 2.0 * float(model.p_t @ (1.0 - model.p_t) + model.p_c @ (1.0 - model.p_c))
    scale = 1.0 / (4.0 * n * n)
    return MseBreakdown(
        total=(qf + bern) * scale,
        design_term=qf * scale,
        noise_term=bern * scale,
        quadratic_form=qf,
        tau=tau(model),
    )


def mse_gap_bcrd_pm(v, matches: MatchSet) -> float:
    """MSE(complete randomization) minus MSE(pair matching with ``matches``).

    Positive iff the given matching strictly beats complete randomization;
    complete randomization wins exactly when the matched pairs are more
    spread in ``v`` than an average pair.
    """
    v = np.asarray(v, dtype=float)
    nn = v.shape[0]
    if matches.n_subjects != nn:
        raise ValueError("match set does not cover the vector")
    n = nn // 2
    pair_sum = 0.0
    for i in range(nn):
        for j in range(i + 1, nn):
            pair_sum += (v[i] - v[j]) ** 2
    return (pair_sum / (nn - 1) - pm_quadratic_form(v, matches)) / (4.0 * n * n)


def match_r_squared(v, matches: MatchSet) -> float:
    """Analysis-of-variance R-squared of the matching as a grouping of ``v``.

    Equals 1 when matched pairs have identical values; can be arbitrarily
    negative for adversarial matchings.  Undefined for constant ``v``.
    """
    v = np.asarray(v, dtype=float)
    if matches.n_subjects != v.shape[0]:
        raise ValueError("match set does not cover the vector")
    centered = v - v.mean()
    total_ss = float(centered @ centered)
    if total_ss <= 0.0:
        raise ValueError("R-squared is undefined for a constant vector")
    error_ss = 0.5 * pm_quadratic_form(v, matches)
    return 1.0 - error_ss / total_ss


def bcrd_expected_r_squared(n: int) -> float:
    """Expected matching R-squared when pairs are formed uniformly at random.

    Equals ``(n - 1) / (2n - 1)`` for ``n`` pairs, independent of the
    values being matched, and increases to 1/2.
    """
    if n < 1:
        raise ValueError("need at least one pair")
    return (n - 1) / (2 * n - 1)


def staircase_corners(n_subjects: int) -> np.ndarray:
    """The ``2n + 1`` extreme points of the sorted box ``0 <= v_1 <= ... <= 2``.

    Row ``k`` is ``(0, ..., 0, 2, ..., 2)`` with ``k`` trailing twos.
    """
    corners = np.zeros((n_subjects + 1, n_subjects))
    for k in range(1, n_subjects + 1):
        corners[k, n_subjects - k:] = 2.0
    return corners


def corner_max_quadratic_form(sigma) -> tuple[float, np.ndarray]:
    """Maximum of ``v' sigma v`` over the sorted box, and an attaining corner.

    The quadratic form is convex, so the maximum over sorted vectors with
    entries in ``[0, 2]`` is attained at one of the staircase corners; the
    sweep is linear in the number of corners instead of exponential.
    Returns the first maximizing corner in trailing-twos order.
    """
    mat = _as_matrix(sigma)
    corners = staircase_corners(mat.shape[0])
    values = np.einsum("ki,ij,kj->k", corners, mat, corners)
    best = int(np.argmax(values))
    return float(values[best]), corners[best]
