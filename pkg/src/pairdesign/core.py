"""Domain types shared by the whole package.

Conventions
-----------
Subjects are indexed 0-based everywhere inside the library.  External
formats (CSV files, reports, CLI output) are 1-based; conversion happens at
those boundaries only.

A study has ``2n`` subjects (even, at least 4) split into two arms of equal
size.  An allocation assigns ``+1`` (treatment) or ``-1`` (control) to each
subject with both arms equally sized.  A design is a distribution over such
allocations, represented here by a partition of the subjects into blocks of
even size: each block is randomized to a balanced sign pattern uniformly
and independently of the other blocks.  One block covering everybody is
complete randomization; ``n`` blocks of two is pair matching.

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class PairDesignError(Exception):
    """Base class for errors raised by this package."""


class AssumptionViolation(PairDesignError):
    """A design violates balance (equal arms) or marginal symmetry."""


class PartitionError(PairDesignError):
    """Block indices do not form a partition of the subject set."""


def _frozen_array(values, dtype=float, ndim=1) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Subjects:
    """The fixed subject pool: identifiers and a ``2n x d`` covariate matrix.

    ``d = 0`` is allowed and means no covariates were measured.
    """

    ids: tuple
    X: np.ndarray

    def __init__(self, ids: Sequence, X) -> None:
        ids = tuple(ids)
        X = np.array(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError("covariate matrix must be 2-dimensional")
        if len(ids) != X.shape[0]:
            raise ValueError("number of ids must match covariate rows")
        if len(set(ids)) != len(ids):
            raise ValueError("subject ids must be unique")
        _require_even_size(X.shape[0])
        if not np.all(np.isfinite(X)):
            raise ValueError("covariates must be finite")
        X.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "X", X)

    @property
    def n_subjects(self) -> int:
        return self.X.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.X.shape[0] // 2

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True, eq=False)
class ResponseModel:
    """Per-subject success probabilities under treatment and control.

    Probabilities exactly 0 or 1 are legal; the adversarial analysis needs
    the extreme corners.
    """

    p_t: np.ndarray
    p_c: np.ndarray

    def __init__(self, p_t, p_c) -> None:
        p_t = _frozen_array(p_t)
        p_c = _frozen_array(p_c)
        if p_t.shape != p_c.shape:
            raise ValueError("p_t and p_c must have the same length")
        _require_even_size(p_t.shape[0])
        for name, p in (("p_t", p_t), ("p_c", p_c)):
            if np.any(p < 0.0) or np.any(p > 1.0):
                raise ValueError(f"{name} entries must lie in [0, 1]")
        object.__setattr__(self, "p_t", p_t)
        object.__setattr__(self, "p_c", p_c)

    @property
    def n_subjects(self) -> int:
        return self.p_t.shape[0]

    @property
    def v(self) -> np.ndarray:
        """Sum of the two arm probabilities; the design-relevant summary."""
        return self.p_t + self.p_c


@dataclass(frozen=True, eq=False)
class Allocation:
    """A balanced sign vector: entries +/-1 with exactly half of each."""

    w: np.ndarray

    def __init__(self, w) -> None:
        w = np.array(w, dtype=np.int8)
        if w.ndim != 1:
            raise ValueError("allocation must be a vector")
        _require_even_size(w.shape[0])
        if not np.all(np.abs(w) == 1):
            raise ValueError("allocation entries must be +1 or -1")
        if int(w.sum()) != 0:
            raise AssumptionViolation("allocation must have equally sized arms")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def n_subjects(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class BlockPartition:
    """An ordered partition of ``range(2n)`` into even-sized blocks.

    Block order and within-block order are preserved as given; they fix the
    order in which sampling consumes random draws.
    """

    blocks: tuple
    n_subjects: int = field(init=False)

    def __init__(self, blocks: Iterable[Sequence[int]]) -> None:
        blocks = tuple(tuple(int(i) for i in block) for block in blocks)
        if not blocks:
            raise PartitionError("partition must contain at least one block")
        seen: set[int] = set()
        count = 0
        for block in blocks:
            if len(block) % 2 != 0 or len(block) < 2:
                raise AssumptionViolation(
                    f"block {block} has odd size; balanced assignment within "
                    "the block is impossible"
                )
            for i in block:
                if i in seen:
                    raise PartitionError(f"index {i} appears in more than one block")
                seen.add(i)
            count += len(block)
        _require_even_size(count)
        if seen != set(range(count)):
            missing = sorted(set(range(count)) - seen)[:5]
            raise PartitionError(
                f"blocks must cover 0..{count - 1}; missing or out-of-range "
                f"indices (first few: {missing if missing else sorted(seen - set(range(count)))[:5]})"
            )
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "n_subjects", count)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> tuple:
        return tuple(len(b) for b in self.blocks)

    @property
    def is_pairwise(self) -> bool:
        return all(len(b) == 2 for b in self.blocks)

    @property
    def is_single_block(self) -> bool:
        return len(self.blocks) == 1

    def one_based(self) -> tuple:
        """Blocks with 1-based indices, for external formats."""
        return tuple(tuple(i + 1 for i in b) for b in self.blocks)


@dataclass(frozen=True)
class MatchSet:
    """A perfect matching: ``n`` disjoint pairs covering ``range(2n)``.

    Pairs are normalized so each is ``(low, high)`` and the list is sorted
    by the low index.
    """

    pairs: tuple

    def __init__(self, pairs: Iterable[Sequence[int]]) -> None:
        norm = []
        for pair in pairs:
            a, b = (int(i) for i in pair)
            if a == b:
                raise PartitionError("a pair cannot contain the same index twice")
            norm.append((min(a, b), max(a, b)))
        norm.sort()
        if not norm:
            raise PartitionError("match set must contain at least one pair")
        flat = [i for pair in norm for i in pair]
        if len(set(flat)) != len(flat):
            raise PartitionError("pairs must be disjoint")
        if set(flat) != set(range(len(flat))):
            raise PartitionError(f"pairs must cover 0..{len(flat) - 1}")
        object.__setattr__(self, "pairs", tuple(norm))

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def n_subjects(self) -> int:
        return 2 * len(self.pairs)

    def one_based(self) -> tuple:
        return tuple((a + 1, b + 1) for a, b in self.pairs)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Variance-covariance matrix of a design's allocation vector.

    Any admissible design has unit diagonal (signs square to one and each
    subject is equally likely to land in either arm), so the constructor
    enforces symmetry and unit diagonal.  Positive semidefiniteness and the
    zero row-sum property of balanced designs are checked by the
    verification suite rather than at construction.
    """

    sigma: np.ndarray

    def __init__(self, sigma) -> None:
        sigma = np.array(sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError("covariance must be a square matrix")
        _require_even_size(sigma.shape[0])
        if not np.all(np.isfinite(sigma)):
            raise ValueError("covariance entries must be finite")
        if not np.allclose(sigma, sigma.T, atol=1e-12, rtol=0.0):
            raise ValueError("covariance must be symmetric")
        if not np.allclose(np.diag(sigma), 1.0, atol=1e-12, rtol=0.0):
            raise ValueError("covariance diagonal must be all ones")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n_subjects(self) -> int:
        return self.sigma.shape[0]


@dataclass(frozen=True)
class ValidationIssue:
    assumption: str  # "A1", "A2", or "partition"
    message: str


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    issues: tuple


def validate_design_assumptions(blocks: Iterable[Sequence[int]],
                                n_subjects: int) -> ValidationReport:
    """Check a proposed block structure against the structural assumptions.

    ``blocks`` uses 1-based indices, matching the external file formats.
    A block of odd size makes within-block balance impossible (violates the
    equal-arms assumption A1); indices that overlap, repeat, or fail to
    cover ``1..n_subjects`` are partition errors.  Blocked randomization
    with balanced blocks automatically gives every subject probability 1/2
    of each arm (A2), so no separate A2 issue can arise from the structure.
    """
    issues: list[ValidationIssue] = []
    if n_subjects % 2 != 0 or n_subjects < 4:
        issues.append(ValidationIssue(
            "A1", f"subject count {n_subjects} must be even and at least 4"))
    seen: dict[int, int] = {}
    for bi, block in enumerate(blocks):
        block = tuple(int(i) for i in block)
        if len(block) % 2 != 0 or len(block) < 2:
            issues.append(ValidationIssue(
                "A1", f"block {bi + 1} has odd size {len(block)}; "
                      "balanced assignment within it is impossible"))
        for i in block:
            if i < 1 or i > n_subjects:
                issues.append(ValidationIssue(
                    "partition", f"index {i} is outside 1..{n_subjects}"))
            elif i in seen:
                issues.append(ValidationIssue(
                    "partition", f"duplicate index {i} (blocks {seen[i] + 1} and {bi + 1})"))
            else:
                seen[i] = bi
    missing = [i for i in range(1, n_subjects + 1) if i not in seen]
    if missing:
        issues.append(ValidationIssue(
            "partition", f"indices not covered by any block: {missing[:10]}"))
    return ValidationReport(ok=not issues, issues=tuple(issues))


def partition_from_one_based(blocks: Iterable[Sequence[int]],
                             n_subjects: int) -> BlockPartition:
    """Build a :class:`BlockPartition` from externally supplied 1-based blocks."""
    report = validate_design_assumptions(blocks, n_subjects)
    if not report.ok:
        first = report.issues[0]
        exc = AssumptionViolation if first.assumption == "A1" else PartitionError
        raise exc("; ".join(i.message for i in report.issues))
    return BlockPartition(tuple(tuple(i - 1 for i in b) for b in blocks))


def _require_even_size(n: int) -> None:
    if n % 2 != 0 or n < 4:
        raise ValueError(f"need an even number of subjects, at least 4 (got {n})")
