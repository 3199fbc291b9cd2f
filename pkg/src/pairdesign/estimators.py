"""Treatment-effect estimators for a completed trial.

Three estimators are covered: the difference in arm means (risk
difference), the two-by-two table log odds ratio with a Haldane-Anscombe
correction for empty cells, and the treatment coefficient of a logistic
regression fitted by iteratively reweighted least squares.  Treatment is
coded +1/-1 throughout, including in the regression, so the regression
coefficient is comparable to half the two-arm log odds ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Allocation, ResponseModel, Subjects

_SQRT2 = math.sqrt(2.0)


def _expit(eta):
    eta = np.asarray(eta, dtype=float)
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _probit(eta):
    eta = np.asarray(eta, dtype=float)
    flat = np.array([0.5 * (1.0 + math.erf(t / _SQRT2)) for t in eta.ravel()])
    return flat.reshape(eta.shape)


def _cloglog_inverse(eta):
    eta = np.asarray(eta, dtype=float)
    return -np.expm1(-np.exp(eta))


LINKS = {
    "expit": _expit,
    "probit": _probit,
    "cloglog-inverse": _cloglog_inverse,
}


@dataclass(frozen=True, eq=False)
class LogisticModelSpec:
    """A generating model: probability = link(beta0 + beta . x + beta_t * w)."""

    beta0: float
    beta: np.ndarray
    beta_t: float
    link: str = "expit"

    def __init__(self, beta0, beta, beta_t, link="expit"):
        if link not in LINKS:
            raise ValueError(f"unknown link {link!r}; choose from {sorted(LINKS)}")
        beta = np.atleast_1d(np.asarray(beta, dtype=float))
        beta.setflags(write=False)
        object.__setattr__(self, "beta0", float(beta0))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "beta_t", float(beta_t))
        object.__setattr__(self, "link", link)

    @property
    def d(self) -> int:
        return self.beta.shape[0]


def link_eval(spec: LogisticModelSpec, x, w: int) -> float:
    """Success probability for one subject with covariates ``x`` and arm ``w``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != spec.d:
        raise ValueError("covariate row length does not match the model")
    eta = spec.beta0 + float(spec.beta @ x) + spec.beta_t * w
    return float(LINKS[spec.link](eta))


def response_model_from_spec(spec: LogisticModelSpec, subjects: Subjects) -> ResponseModel:
    """Evaluate the model over a subject pool for both arms."""
    if subjects.d != spec.d:
        raise ValueError("covariate dimension does not match the model")
    base = spec.beta0 + (subjects.X @ spec.beta if spec.d else np.zeros(subjects.n_subjects))
    link = LINKS[spec.link]
    return ResponseModel(link(base + spec.beta_t), link(base - spec.beta_t))


@dataclass(frozen=True, eq=False)
class TrialOutcome:
    """An observed trial: the realized allocation and the binary responses."""

    w: Allocation
    y: np.ndarray

    def __init__(self, w: Allocation, y):
        y = np.asarray(y)
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("responses must be 0 or 1")
        y = y.astype(np.int8)
        if y.shape != (w.n_subjects,):
            raise ValueError("response length does not match the allocation")
        y.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "y", y)

    @property
    def n_pairs(self) -> int:
        return self.w.n_subjects // 2


def arm_counts(outcome: TrialOutcome) -> tuple[int, int, int, int]:
    """(successes_T, failures_T, successes_C, failures_C)."""
    treated = outcome.w.w > 0
    n = outcome.n_pairs
    s_t = int(np.sum(outcome.y[treated]))
    s_c = int(np.sum(outcome.y[~treated]))
    return s_t, n - s_t, s_c, n - s_c


def diff_in_means(outcome: TrialOutcome) -> float:
    """Risk-difference estimate: mean response in T minus mean in C."""
    return float(outcome.w.w.astype(np.int64) @ outcome.y.astype(np.int64)) / outcome.n_pairs


def log_odds_ratio(outcome: TrialOutcome) -> float:
    """Two-by-two table log odds ratio.

    When any cell is empty, 0.5 is added to all four cells so the estimate
    stays finite; otherwise the raw counts are used.
    """
    s_t, f_t, s_c, f_c = arm_counts(outcome)
    c = 0.5 if min(s_t, f_t, s_c, f_c) == 0 else 0.0
    return math.log((s_t + c) * (f_c + c)) - math.log((f_t + c) * (s_c + c))


@dataclass(frozen=True, eq=False)
class LogisticFit:
    """Fitted coefficients and convergence diagnostics of a logistic fit.

    ``coef`` is ordered (intercept, covariates..., treatment).  Fits
    flagged with ``separation`` are excluded from simulation aggregates.
    """

    coef: np.ndarray
    converged: bool
    n_iter: int
    separation: bool
    max_score: float
    cov: np.ndarray | None

    @property
    def beta0(self) -> float:
        return float(self.coef[0])

    @property
    def beta(self) -> np.ndarray:
        return self.coef[1:-1]

    @property
    def beta_t(self) -> float:
        return float(self.coef[-1])

    @property
    def std_errors(self) -> np.ndarray | None:
        if self.cov is None:
            return None
        return np.sqrt(np.diag(self.cov))

    @property
    def usable(self) -> bool:
        return not self.separation


_PROB_EDGE = 1e-10
_COEF_BLOWUP = 15.0


def irls_logit(design: np.ndarray, y: np.ndarray,
               max_iter: int = 50, tol: float = 1e-8) -> LogisticFit:
    """Maximum-likelihood logit fit of ``y`` on a full design matrix.

    Newton steps on the weighted normal equations; converged when the
    largest absolute coefficient change drops below ``tol``.  Separation is
    flagged when fitted probabilities pin against 0/1 while the
    coefficients are still growing or have blown up.
    """
    y = np.asarray(y, dtype=float)
    coef = np.zeros(design.shape[1])
    converged = False
    failed = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        mu = _expit(design @ coef)
        wgt = np.clip(mu * (1.0 - mu), 1e-12, None)
        grad = design.T @ (y - mu)
        hess = design.T @ (wgt[:, None] * design)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            failed = True
            break
        coef = coef + step
        if np.max(np.abs(step)) < tol:
            converged = True
            break
    mu = _expit(design @ coef)
    max_score = float(np.max(np.abs(design.T @ (y - mu))))
    extreme = bool(np.any((mu < _PROB_EDGE) | (mu > 1.0 - _PROB_EDGE)))
    separation = failed or (extreme and (not converged or
                                         float(np.max(np.abs(coef))) > _COEF_BLOWUP))
    cov = None
    if not failed:
        wgt = np.clip(mu * (1.0 - mu), 1e-12, None)
        hess = design.T @ (wgt[:, None] * design)
        try:
            cov = np.linalg.inv(hess)
        except np.linalg.LinAlgError:
            cov = None
    return LogisticFit(coef=coef, converged=converged, n_iter=n_iter,
                       separation=separation, max_score=max_score, cov=cov)


def logistic_fit(subjects: Subjects, outcome: TrialOutcome,
                 max_iter: int = 50, tol: float = 1e-8) -> LogisticFit:
    """Logit fit of the trial outcome on (intercept, covariates, treatment).

    Treatment enters coded +1/-1.  Raises on a rank-deficient design
    matrix; separation is reported via the returned flags, not an error.
    """
    if subjects.n_subjects != outcome.w.n_subjects:
        raise ValueError("subjects and outcome sizes differ")
    design = np.column_stack([np.ones(subjects.n_subjects), subjects.X,
                              outcome.w.w.astype(float)])
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise ValueError("design matrix (intercept, covariates, treatment) "
                         "is rank deficient")
    return irls_logit(design, outcome.y, max_iter=max_iter, tol=tol)
