"""Monte Carlo engine for comparing designs on synthetic or fitted models.

Replicate ``r`` of design ``label`` draws every random quantity from the
stream seeded with ``derive_seed(master, fnv1a64(label), r)`` (plus the
subsample size in bootstrap mode), so results are bit-identical for a
given master seed no matter how replicates are batched or how many worker
threads run them.  Aggregation reduces per-batch partial sums in batch
order for the same reason.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .core import Allocation, BlockPartition, ResponseModel, Subjects
from .designs import (bcrd, random_pair_matching, sample_allocation,
                      sorted_block_partition, sorted_pair_matching)
from .estimators import (LogisticModelSpec, irls_logit,
                         response_model_from_spec)
from .matching import (mahalanobis_distance_matrix, matchset_to_partition,
                       min_weight_perfect_matching)
from .mse import tau as compute_tau
from .rng import SplitMix64, derive_seed, derive_seed_array, fnv1a64

ESTIMATORS = ("diff_in_means", "log_odds_ratio", "logistic")

DESIGN_METHODS = ("bcrd", "block", "pm", "pm_random")


@dataclass(frozen=True)
class DesignSpec:
    """A design to simulate: method plus options, with a stable label."""

    method: str
    n_blocks: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.method not in DESIGN_METHODS:
            raise ValueError(f"unknown design method {self.method!r}; "
                             f"choose from {DESIGN_METHODS}")
        if self.method == "block" and not self.n_blocks:
            object.__setattr__(self, "n_blocks", 8)
        if not self.label:
            label = self.method
            if self.method == "block":
                label = f"block:{self.n_blocks}"
            object.__setattr__(self, "label", label)


@dataclass(frozen=True, eq=False)
class SimConfig:
    """Everything a Monte Carlo run needs besides the thread count."""

    n_subjects: int
    d: int
    designs: tuple
    model: LogisticModelSpec
    n_sim: int
    seed: int
    estimators: tuple = ("diff_in_means",)
    batch_size: int = 8192

    def __post_init__(self):
        if self.n_subjects % 2 != 0 or self.n_subjects < 4:
            raise ValueError("n_subjects must be even and at least 4")
        if self.n_sim < 1:
            raise ValueError("n_sim must be at least 1")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ValueError(f"unknown estimator {e!r}; choose from {ESTIMATORS}")
        if self.model.d != self.d:
            raise ValueError("model coefficient length does not match d")
        if not self.designs:
            raise ValueError("need at least one design")


@dataclass(frozen=True)
class SimRow:
    """One (design, estimator, size) cell of a simulation result."""

    design: str
    estimator: str
    n_subjects: int
    d: int
    mean_estimate: float
    mse: float
    mc_se: float
    excluded: int
    n_sim: int
    target: float


@dataclass(frozen=True)
class SimResult:
    rows: tuple
    seed: int
    backend: str

    def row(self, design: str, estimator: str, n_subjects: int | None = None) -> SimRow:
        for r in self.rows:
            if (r.design == design and r.estimator == estimator and
                    (n_subjects is None or r.n_subjects == n_subjects)):
                return r
        raise KeyError(f"no row for ({design}, {estimator})")


def logistic_quantile_grid(n_subjects: int) -> np.ndarray:
    """Standard-logistic quantiles at probabilities evenly spaced on
    [0.005, 0.995], one per subject, increasing."""
    if n_subjects < 2:
        raise ValueError("need at least two subjects")
    p = np.linspace(0.005, 0.995, n_subjects)
    return np.log(p / (1.0 - p))


def block_homogeneous_covariates(n_subjects: int, d: int, rng: SplitMix64) -> Subjects:
    """Synthetic covariates whose hierarchical eight-way blocking is exact.

    The first covariate is the sorted logistic quantile grid; any further
    covariates are independently shuffled copies of the same grid, which
    makes every cell of the hierarchical split (4x2 on the first two
    covariates for ``d = 2``; 2x2x2 on the first three for ``d = 5``)
    exactly equal-sized.
    """
    if d not in (1, 2, 5):
        raise ValueError("covariate generator supports d in {1, 2, 5}")
    if n_subjects % 8 != 0:
        raise ValueError("n_subjects must be divisible by 8")
    grid = logistic_quantile_grid(n_subjects)
    cols = [grid]
    for _ in range(d - 1):
        perm = list(range(n_subjects))
        rng.shuffle(perm)
        cols.append(grid[perm])
    X = np.column_stack(cols)
    return Subjects(ids=tuple(range(1, n_subjects + 1)), X=X)


def hierarchical_block_partition(subjects: Subjects) -> BlockPartition:
    """Eight equal blocks from nested sort-and-split on leading covariates.

    ``d = 1``: eight runs of the sorted first covariate.  ``d = 2``: four
    quartile groups of the first covariate, each halved on the second.
    ``d >= 3``: median splits on each of the first three covariates.
    """
    d = subjects.d
    if d < 1:
        raise ValueError("blocking needs at least one covariate")
    X = subjects.X
    if d == 1:
        return sorted_block_partition(X[:, 0], 8)
    splits = (4, 2) if d == 2 else (2, 2, 2)
    groups = [np.arange(subjects.n_subjects)]
    for level, ways in enumerate(splits):
        key = X[:, level]
        next_groups = []
        for g in groups:
            if len(g) % ways != 0:
                raise ValueError("group sizes do not divide evenly; "
                                 "subject count must be divisible by 8")
            ordered = g[np.argsort(key[g], kind="stable")]
            size = len(ordered) // ways
            next_groups.extend(ordered[k * size:(k + 1) * size] for k in range(ways))
        groups = next_groups
    return BlockPartition([tuple(int(i) for i in g) for g in groups])


def draw_responses(model: ResponseModel, allocation: Allocation,
                   rng: SplitMix64) -> np.ndarray:
    """Independent Bernoulli responses, one stream draw per subject in order."""
    if model.n_subjects != allocation.n_subjects:
        raise ValueError("model and allocation sizes differ")
    y = np.empty(model.n_subjects, dtype=np.int8)
    w = allocation.w
    for i in range(model.n_subjects):
        p = model.p_t[i] if w[i] > 0 else model.p_c[i]
        y[i] = 1 if rng.next_double() < p else 0
    return y


@dataclass(frozen=True, eq=False)
class DesignLayout:
    """A design compiled to the kernel's representation."""

    label: str
    pm_random: bool
    order: np.ndarray
    sizes: np.ndarray
    partition: BlockPartition | None = None


def layout_from_partition(label: str, partition: BlockPartition) -> DesignLayout:
    order = np.array([i for block in partition.blocks for i in block], dtype=np.int64)
    sizes = np.array(partition.sizes, dtype=np.int64)
    return DesignLayout(label=label, pm_random=False, order=order,
                        sizes=sizes, partition=partition)


def random_match_layout(label: str, n_subjects: int) -> DesignLayout:
    return DesignLayout(label=label, pm_random=True,
                        order=np.arange(n_subjects, dtype=np.int64),
                        sizes=np.full(n_subjects // 2, 2, dtype=np.int64),
                        partition=None)


def resolve_design(spec: DesignSpec, subjects: Subjects) -> DesignLayout:
    """Build the concrete design for a subject pool.

    Blocking and matching sort on the single covariate when ``d = 1`` (the
    Mahalanobis matching coincides with adjacent pairing there); with more
    covariates, blocks come from the hierarchical eight-way split and pairs
    from exact minimum-distance matching.  With no covariates the subject
    index order is used, which is as good as any.
    """
    nn = subjects.n_subjects
    if spec.method == "bcrd":
        return layout_from_partition(spec.label, bcrd(nn))
    if spec.method == "pm_random":
        return random_match_layout(spec.label, nn)
    key = subjects.X[:, 0] if subjects.d >= 1 else np.arange(nn, dtype=float)
    if spec.method == "block":
        if subjects.d <= 1:
            part = sorted_block_partition(key, spec.n_blocks)
        elif spec.n_blocks == 8:
            part = hierarchical_block_partition(subjects)
        else:
            raise ValueError("multi-covariate blocking supports 8 blocks only")
        return layout_from_partition(spec.label, part)
    # pairwise matching
    if subjects.d <= 1:
        part = matchset_to_partition(sorted_pair_matching(key))
    else:
        D = mahalanobis_distance_matrix(subjects)
        part = matchset_to_partition(min_weight_perfect_matching(D))
    return layout_from_partition(spec.label, part)


class _Moments:
    """Streaming sums for one (estimator, target) cell."""

    __slots__ = ("count", "excluded", "sum_est", "sum_e", "sum_e2")

    def __init__(self):
        self.count = 0
        self.excluded = 0
        self.sum_est = 0.0
        self.sum_e = 0.0
        self.sum_e2 = 0.0

    def add(self, estimates: np.ndarray, targets) -> None:
        e = (estimates - targets) ** 2
        self.count += estimates.shape[0]
        self.sum_est += float(np.sum(estimates))
        self.sum_e += float(np.sum(e))
        self.sum_e2 += float(np.sum(e * e))

    def add_excluded(self, k: int) -> None:
        self.excluded += k

    def row(self, design: str, estimator: str, n_subjects: int, d: int,
            n_sim: int, target: float) -> SimRow:
        if self.count == 0:
            mean = mse = mc_se = float("nan")
        else:
            mean = self.sum_est / self.count
            mse = self.sum_e / self.count
            var_e = max(self.sum_e2 / self.count - mse * mse, 0.0)
            mc_se = float(np.sqrt(var_e / self.count))
        return SimRow(design=design, estimator=estimator, n_subjects=n_subjects,
                      d=d, mean_estimate=mean, mse=mse, mc_se=mc_se,
                      excluded=self.excluded, n_sim=n_sim, target=target)


def _lor_from_counts(s_t: np.ndarray, s_c: np.ndarray, n: int) -> np.ndarray:
    f_t = n - s_t
    f_c = n - s_c
    zero = (s_t == 0) | (f_t == 0) | (s_c == 0) | (f_c == 0)
    c = np.where(zero, 0.5, 0.0)
    return (np.log((s_t + c) * (f_c + c)) - np.log((f_t + c) * (s_c + c)))


def _map_ordered(fn, n_tasks: int, threads: int) -> list:
    if threads <= 1 or n_tasks <= 1:
        return [fn(i) for i in range(n_tasks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_tasks)))


def _run_layout(layout: DesignLayout, model: ResponseModel, n_sim: int,
                master_seed: int, estimators, targets: dict,
                X: np.ndarray | None, d: int, threads: int,
                batch_size: int) -> list[SimRow]:
    """All requested estimator rows for one design."""
    nn = model.n_subjects
    n = nn // 2
    design_id = fnv1a64(layout.label)
    need_wy = "logistic" in estimators
    cells: dict[tuple[str, float], _Moments] = {}

    def cell(name: str, target: float) -> _Moments:
        return cells.setdefault((name, target), _Moments())

    if need_wy:
        if X is None:
            raise ValueError("the logistic estimator needs the covariate matrix")
        base_design = np.column_stack([np.ones(nn), X, np.zeros(nn)])
    n_batches = (n_sim + batch_size - 1) // batch_size

    def run_batch(b: int):
        lo = b * batch_size
        hi = min(n_sim, lo + batch_size)
        reps = np.arange(lo, hi, dtype=np.uint64)
        seeds = derive_seed_array(master_seed, design_id, indices=reps)
        s_t, s_c, W, Y = engine.simulate_batch(
            seeds, layout.order, layout.sizes, model.p_t, model.p_c,
            layout.pm_random, need_wy)
        out = []
        if "diff_in_means" in estimators:
            est = (s_t - s_c) / n
            out.append(("diff_in_means", targets["tau"], est, 0))
        if "log_odds_ratio" in estimators:
            est = _lor_from_counts(s_t, s_c, n)
            out.append(("log_odds_ratio_vs_beta_t", targets["beta_t"], est, 0))
            out.append(("log_odds_ratio_vs_2beta_t", 2.0 * targets["beta_t"], est, 0))
        if need_wy:
            design = base_design.copy()
            ests = []
            excluded = 0
            for r in range(hi - lo):
                design[:, -1] = W[r]
                fit = irls_logit(design, Y[r])
                if fit.usable:
                    ests.append(fit.beta_t)
                else:
                    excluded += 1
            out.append(("logistic_beta_t", targets["beta_t"],
                        np.asarray(ests, dtype=float), excluded))
        return out

    for partials in _map_ordered(run_batch, n_batches, threads):
        for name, target, est, excluded in partials:
            c = cell(name, target)
            c.add(est, target)
            c.add_excluded(excluded)

    return [moments.row(layout.label, name, nn, d, n_sim, target)
            for (name, target), moments in cells.items()]


def run_monte_carlo(config: SimConfig, threads: int = 1) -> SimResult:
    """Compare the configured designs on a synthetic subject pool.

    Covariates follow the quantile-grid construction; every design is built
    from them and then evaluated with the same per-replicate streams.
    """
    cov_rng = SplitMix64(derive_seed(config.seed, fnv1a64("covariates")))
    if config.d == 0:
        subjects = Subjects(ids=tuple(range(1, config.n_subjects + 1)),
                            X=np.zeros((config.n_subjects, 0)))
    else:
        subjects = block_homogeneous_covariates(config.n_subjects, config.d, cov_rng)
    model = response_model_from_spec(config.model, subjects)
    targets = {"tau": compute_tau(model), "beta_t": config.model.beta_t}
    need_x = "logistic" in config.estimators
    rows: list[SimRow] = []
    for spec in config.designs:
        layout = resolve_design(spec, subjects)
        rows.extend(_run_layout(
            layout, model, config.n_sim, config.seed, config.estimators,
            targets, subjects.X if need_x else None, config.d, threads,
            config.batch_size))
    return SimResult(rows=tuple(rows), seed=config.seed, backend=engine.BACKEND)


def estimate_design_mse(model: ResponseModel, design, n_sim: int, seed: int,
                        label: str | None = None, threads: int = 1,
                        batch_size: int = 8192) -> SimRow:
    """Monte Carlo MSE of the risk-difference estimator for one design.

    ``design`` is a :class:`BlockPartition` or the string ``"pm_random"``.
    Mainly used to cross-check closed-form results.
    """
    if design == "pm_random":
        layout = random_match_layout(label or "pm_random", model.n_subjects)
    else:
        layout = layout_from_partition(label or "design", design)
    targets = {"tau": compute_tau(model), "beta_t": 0.0}
    rows = _run_layout(layout, model, n_sim, seed, ("diff_in_means",),
                       targets, None, 0, threads, batch_size)
    return rows[0]


def parametric_bootstrap(subjects: Subjects, fitted: LogisticModelSpec,
                         config: SimConfig,
                         subsample_sizes=None, threads: int = 1) -> SimResult:
    """Design comparison on a real covariate pool under a fitted model.

    Each replicate draws a without-replacement subsample of the requested
    size, rebuilds every design on that subsample, then proceeds exactly
    like the synthetic engine.  The risk-difference target is recomputed
    per subsample from the model; the coefficient targets come from the
    (possibly effect-injected) fitted model itself.
    """
    if fitted.d != subjects.d:
        raise ValueError("fitted model dimension does not match subjects")
    nn_full = subjects.n_subjects
    sizes = tuple(subsample_sizes) if subsample_sizes else (nn_full,)
    for s in sizes:
        if s % 2 != 0 or s < 4 or s > nn_full:
            raise ValueError(f"subsample size {s} must be even, >= 4, and <= {nn_full}")
    full_model = response_model_from_spec(fitted, subjects)
    p_t, p_c = full_model.p_t, full_model.p_c
    X = subjects.X
    estimators = config.estimators
    need_logistic = "logistic" in estimators
    master = config.seed
    batch = max(1, min(config.batch_size, 1024))
    rows: list[SimRow] = []

    for spec in config.designs:
        design_id = fnv1a64(spec.label)
        for size in sizes:
            # name -> (accumulator, display target); the risk-difference
            # target varies by subsample so its display value is nan.
            cells: dict[str, tuple[_Moments, float]] = {}

            def cell(name, target):
                if name not in cells:
                    cells[name] = (_Moments(), target)
                return cells[name][0]

            n_batches = (config.n_sim + batch - 1) // batch

            def run_batch(b: int, _spec=spec, _size=size, _design_id=design_id):
                lo = b * batch
                hi = min(config.n_sim, lo + batch)
                out = {}
                for r in range(lo, hi):
                    rng = SplitMix64(derive_seed(master, _design_id, _size, r))
                    idx = rng.choose_without_replacement(nn_full, _size)
                    sub = Subjects(ids=tuple(i + 1 for i in idx), X=X[idx])
                    layout = resolve_design(_spec, sub)
                    sub_model = ResponseModel(p_t[idx], p_c[idx])
                    if layout.pm_random:
                        part = random_pair_matching(_size, rng)
                    else:
                        part = layout.partition
                    w = sample_allocation(part, rng)
                    y = draw_responses(sub_model, w, rng)
                    n = _size // 2
                    treated = w.w > 0
                    s_t = int(np.sum(y[treated]))
                    s_c = int(np.sum(y[~treated]))
                    tau_r = float(np.mean(sub_model.p_t - sub_model.p_c))
                    if "diff_in_means" in estimators:
                        out.setdefault("diff_in_means", []).append(
                            ((s_t - s_c) / n, tau_r, False))
                    if "log_odds_ratio" in estimators:
                        lor = float(_lor_from_counts(np.array([s_t]),
                                                     np.array([s_c]), n)[0])
                        out.setdefault("log_odds_ratio", []).append(
                            (lor, fitted.beta_t, False))
                    if need_logistic:
                        design = np.column_stack([np.ones(_size), sub.X,
                                                  w.w.astype(float)])
                        fit = irls_logit(design, y)
                        out.setdefault("logistic", []).append(
                            (fit.beta_t, fitted.beta_t, not fit.usable))
                return out

            for partials in _map_ordered(run_batch, n_batches, threads):
                for name, entries in partials.items():
                    est = np.array([e for e, _t, bad in entries if not bad])
                    tgt = np.array([t for _e, t, bad in entries if not bad])
                    n_bad = sum(1 for _e, _t, bad in entries if bad)
                    if name == "diff_in_means":
                        c = cell("diff_in_means", float("nan"))
                        if est.size:
                            c.add(est, tgt)
                        c.add_excluded(n_bad)
                    elif name == "log_odds_ratio":
                        for cname, mult in (("log_odds_ratio_vs_beta_t", 1.0),
                                            ("log_odds_ratio_vs_2beta_t", 2.0)):
                            c = cell(cname, mult * fitted.beta_t)
                            if est.size:
                                c.add(est, mult * tgt)
                            c.add_excluded(n_bad)
                    else:
                        c = cell("logistic_beta_t", fitted.beta_t)
                        if est.size:
                            c.add(est, tgt)
                        c.add_excluded(n_bad)

            for name, (moments, target) in cells.items():
                rows.append(moments.row(spec.label, name, size, subjects.d,
                                        config.n_sim, target))
    return SimResult(rows=tuple(rows), seed=master, backend=engine.BACKEND)
