"""Pair construction from covariates.

The pipeline is: covariate matrix -> Mahalanobis distance matrix ->
minimum-weight perfect matching on the complete graph.  The solver is
exact.  Distances (IEEE doubles, hence dyadic rationals) are lifted to
integers without rounding, and a lexicographic penalty term is folded into
the integer weights, so among all minimum-weight perfect matchings the
solver deterministically returns the one whose normalized pair list is
lexicographically smallest.  A brute-force enumerator over all ``(2n-1)!!``
matchings, running on exact ``Fraction`` arithmetic, serves as the
independent oracle for small instances.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .blossom import max_weight_matching
from .core import BlockPartition, MatchSet, Subjects


def mahalanobis_distance_matrix(subjects) -> np.ndarray:
    """Pairwise squared Mahalanobis distances between subject rows.

    The metric uses the sample covariance of all rows (denominator
    ``rows - 1``); a singular covariance falls back to the Moore-Penrose
    pseudo-inverse with eigenvalue cutoff ``1e-10`` times the largest
    eigenvalue, so collinear or constant columns are handled.  Accepts a
    :class:`~pairdesign.core.Subjects` or a plain 2-D array.
    """
    X = subjects.X if isinstance(subjects, Subjects) else np.asarray(subjects, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[1] == 0:
        raise ValueError("no covariates to match on (d = 0)")
    if X.shape[0] < 2:
        raise ValueError("need at least two rows")
    centered = X - X.mean(axis=0)
    cov = (centered.T @ centered) / (X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    cutoff = 1e-10 * max(eigvals.max(), 0.0)
    keep = eigvals > cutoff
    # Rows in the whitened basis; squared Euclidean distance there is the
    # squared Mahalanobis distance (pseudo-inverse drops null directions).
    scale = np.zeros_like(eigvals)
    scale[keep] = 1.0 / np.sqrt(eigvals[keep])
    Z = centered @ eigvecs * scale
    sq = np.sum(Z * Z, axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T)
    np.fill_diagonal(D, 0.0)
    D = np.maximum(D, 0.0)
    return (D + D.T) / 2.0


def _validate_distances(D, min_dim: int) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    n = D.shape[0]
    if n % 2 != 0 or n < min_dim:
        raise ValueError(f"need an even dimension of at least {min_dim} (got {n})")
    if not np.all(np.isfinite(D)):
        raise ValueError("distances must be finite")
    if np.any(D < 0):
        raise ValueError("distances must be nonnegative")
    return D


def _lift_to_integers(D: np.ndarray) -> list[list[int]]:
    """Scale the upper triangle to exact integers (doubles are dyadic)."""
    n = D.shape[0]
    ratios = {}
    max_den = 1
    for i in range(n):
        for j in range(i + 1, n):
            num, den = float(D[i, j]).as_integer_ratio()
            ratios[(i, j)] = (num, den)
            max_den = max(max_den, den)
    out = [[0] * n for _ in range(n)]
    for (i, j), (num, den) in ratios.items():
        out[i][j] = num * (max_den // den)
    return out


def min_weight_perfect_matching(D) -> MatchSet:
    """Exact minimum-weight perfect matching of a distance matrix.

    Only the upper triangle of ``D`` is used.  Among equally optimal
    matchings the lexicographically smallest normalized pair list is
    returned; scaling all distances by a positive constant leaves the
    result unchanged.
    """
    D = _validate_distances(D, min_dim=4)
    n = D.shape[0]
    dint = _lift_to_integers(D)
    # Lexicographic penalty: vertex u's term dominates everything decided
    # after u, so minimizing the summed penalty among equal-weight matchings
    # picks the lexicographically smallest pair list.
    base = 2 * n * n + 1
    pen_scale = base ** (n - 1) * n * n + 1
    weights = {}
    for i in range(n):
        pen_row = base ** (n - 1 - i)
        for j in range(i + 1, n):
            weights[(i, j)] = dint[i][j] * pen_scale + pen_row * (j + 1)
    # Convert the minimization to max-weight matching with weights large
    # enough that any higher-cardinality matching strictly wins, which
    # forces perfection on a complete even graph.
    top = max(weights.values())
    maxw = {pair: top - wt + 1 for pair, wt in weights.items()}
    spread = top - min(weights.values())
    shift = n * spread
    edges = [(i, j, wt + shift) for (i, j), wt in maxw.items()]
    mate = max_weight_matching(n, edges)
    if any(m < 0 for m in mate):
        raise AssertionError("solver failed to produce a perfect matching")
    return MatchSet([(v, mate[v]) for v in range(n) if v < mate[v]])


def brute_force_matching(D, max_dim: int = 12) -> MatchSet:
    """Exhaustive minimum over every perfect matching (oracle).

    Totals are accumulated as exact ``Fraction``s; the first optimum in
    enumeration order is the lexicographically smallest pair list, the same
    tie-break rule the solver uses.
    """
    D = _validate_distances(D, min_dim=2)
    n = D.shape[0]
    if n > max_dim:
        raise ValueError(f"brute force is capped at dimension {max_dim}")
    dfr = [[Fraction(float(D[i, j])) for j in range(n)] for i in range(n)]
    best_total = None
    best_pairs = None

    def recurse(remaining: list[int], pairs: list[tuple[int, int]], total: Fraction) -> None:
        nonlocal best_total, best_pairs
        if best_total is not None and total >= best_total:
            return
        if not remaining:
            best_total = total
            best_pairs = list(pairs)
            return
        u = remaining[0]
        for idx in range(1, len(remaining)):
            j = remaining[idx]
            pairs.append((u, j))
            recurse(remaining[1:idx] + remaining[idx + 1:], pairs, total + dfr[u][j])
            pairs.pop()

    recurse(list(range(n)), [], Fraction(0))
    return MatchSet(best_pairs)


def greedy_matching(D) -> MatchSet:
    """Baseline heuristic: repeatedly take the shortest available pair.

    Not optimal in general; kept only as a labeled comparison point.
    """
    D = _validate_distances(D, min_dim=2)
    n = D.shape[0]
    order = sorted((float(D[i, j]), i, j) for i in range(n) for j in range(i + 1, n))
    used = [False] * n
    pairs = []
    for _d, i, j in order:
        if not used[i] and not used[j]:
            used[i] = used[j] = True
            pairs.append((i, j))
    return MatchSet(pairs)


def matching_total(D, matches: MatchSet) -> float:
    """Total distance of a matching under ``D``."""
    D = np.asarray(D, dtype=float)
    return float(sum(D[i, j] for i, j in matches.pairs))


def matchset_to_partition(matches: MatchSet) -> BlockPartition:
    """View a matching as a block design with blocks of two."""
    return BlockPartition(matches.pairs)
