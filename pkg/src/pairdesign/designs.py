"""Design families: complete randomization, blocking, and pair matching.

A design is represented by a :class:`~pairdesign.core.BlockPartition`; the
three families differ only in how the blocks are formed.  Sampling draws a
balanced sign pattern uniformly and independently within each block by
Fisher-Yates shuffling a half-and-half sign template, which is exactly
uniform over the block's balanced patterns without enumerating them.
"""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from .core import Allocation, BlockPartition, CovarianceMatrix, MatchSet
from .rng import SplitMix64


def bcrd(n_subjects: int) -> BlockPartition:
    """Balanced complete randomization: one block holding every subject."""
    _check_even(n_subjects)
    return BlockPartition([tuple(range(n_subjects))])


def sorted_block_partition(sort_key, n_blocks: int) -> BlockPartition:
    """Split subjects into ``n_blocks`` consecutive runs of the sort order.

    Sorting is stable; ties keep their original index order.  The block
    size ``len(sort_key) / n_blocks`` must be a whole even number.
    """
    key = np.asarray(sort_key, dtype=float)
    n = key.shape[0]
    _check_even(n)
    if n_blocks < 1 or n % n_blocks != 0:
        raise ValueError(f"{n} subjects cannot be split into {n_blocks} equal blocks")
    size = n // n_blocks
    if size % 2 != 0:
        raise ValueError(f"block size {size} is odd; balanced blocks are impossible")
    order = np.argsort(key, kind="stable")
    return BlockPartition([tuple(int(i) for i in order[b * size:(b + 1) * size])
                           for b in range(n_blocks)])


def sorted_pair_matching(sort_key) -> MatchSet:
    """Pair adjacent subjects in the stable sort order of ``sort_key``."""
    key = np.asarray(sort_key, dtype=float)
    _check_even(key.shape[0])
    order = np.argsort(key, kind="stable")
    return MatchSet([(int(order[2 * k]), int(order[2 * k + 1]))
                     for k in range(key.shape[0] // 2)])


def random_pair_matching(n_subjects: int, rng: SplitMix64) -> BlockPartition:
    """A uniformly random perfect matching, as an ordered partition.

    Block order follows the underlying random permutation so that sampling
    after matching consumes the stream in a fixed, documented order.
    """
    _check_even(n_subjects)
    perm = list(range(n_subjects))
    rng.shuffle(perm)
    return BlockPartition([(perm[2 * k], perm[2 * k + 1])
                           for k in range(n_subjects // 2)])


def sample_allocation(partition: BlockPartition, rng: SplitMix64) -> Allocation:
    """Draw one allocation from the design.

    Within each block (in partition order) a template of ``+1``s followed
    by ``-1``s is Fisher-Yates shuffled; every balanced pattern of the
    block is equally likely and blocks are independent.  Each subject ends
    up in either arm with probability 1/2.
    """
    w = np.zeros(partition.n_subjects, dtype=np.int8)
    for block in partition.blocks:
        half = len(block) // 2
        template = [1] * half + [-1] * half
        rng.shuffle(template)
        for pos, idx in enumerate(block):
            w[idx] = template[pos]
    return Allocation(w)


def covariance_matrix(partition: BlockPartition) -> CovarianceMatrix:
    """Closed-form covariance of the allocation vector.

    Block-diagonal: within a block of size ``m`` the diagonal is 1 and every
    off-diagonal entry is ``-1/(m - 1)``; subjects in different blocks are
    independent.
    """
    n = partition.n_subjects
    sigma = np.zeros((n, n))
    for block in partition.blocks:
        m = len(block)
        off = -1.0 / (m - 1)
        idx = np.asarray(block)
        sigma[np.ix_(idx, idx)] = off
        sigma[idx, idx] = 1.0
    return CovarianceMatrix(sigma)


def support_size(partition: BlockPartition) -> int:
    """Number of distinct allocations the design can produce."""
    size = 1
    for m in partition.sizes:
        size *= math.comb(m, m // 2)
    return size


def support_matrix(partition: BlockPartition,
                   max_size: int = 1_000_000) -> np.ndarray:
    """The design's support as a ``(size, 2n)`` sign matrix, rows unique.

    The support has ``prod_b C(m_b, m_b/2)`` elements; a ``max_size`` cap
    guards against accidental exponential blowups.
    """
    total = support_size(partition)
    if total > max_size:
        raise ValueError(
            f"support has {total} allocations, above the cap of {max_size}")
    out = np.empty((total, partition.n_subjects), dtype=np.int8)
    repeat = total
    tile = 1
    for block in partition.blocks:
        half = len(block) // 2
        patterns = np.empty((math.comb(len(block), half), len(block)), dtype=np.int8)
        for row, plus_pos in enumerate(combinations(range(len(block)), half)):
            patterns[row] = -1
            patterns[row, list(plus_pos)] = 1
        k = patterns.shape[0]
        repeat //= k
        rows = np.tile(np.repeat(np.arange(k), repeat), tile)
        out[:, list(block)] = patterns[rows]
        tile *= k
    return out


def enumerate_support(partition: BlockPartition,
                      max_size: int = 1_000_000) -> list[Allocation]:
    """Every allocation in the design's support, each exactly once."""
    return [Allocation(row) for row in support_matrix(partition, max_size)]


def empirical_covariance(allocations) -> np.ndarray:
    """Sample covariance ``mean(w w^T) - w_bar w_bar^T`` of a set of allocations.

    Returns a plain array: degenerate inputs (for example one allocation
    repeated) legitimately yield the zero matrix, which is not a valid
    design covariance.
    """
    if isinstance(allocations, np.ndarray):
        mat = allocations.astype(float)
    else:
        allocations = list(allocations)
        if not allocations:
            raise ValueError("need at least one allocation")
        mat = np.array([a.w for a in allocations], dtype=float)
    mean = mat.mean(axis=0)
    return (mat.T @ mat) / mat.shape[0] - np.outer(mean, mean)


def _check_even(n: int) -> None:
    if n % 2 != 0 or n < 4:
        raise ValueError(f"need an even subject count of at least 4 (got {n})")
