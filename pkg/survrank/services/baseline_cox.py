"""Cox proportional-hazards baseline.

Newton's method with step-halving on the Breslow partial log-likelihood

    l(beta) = sum_{i: e_i = 1} [ x_i . beta - log sum_{j: t_j >= t_i} exp(x_j . beta) ]

plus the univariate group hazard ratio used for Kaplan-Meier separation.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from survrank.errors import ArgumentError, ConvergenceError, RankError, SeparationError
from survrank.services.cohort import Cohort, CohortRecord
from survrank.services.comparator import Featurizer
from survrank.services.metrics import RiskGroups, SurvivalOutcomes

logger = logging.getLogger(__name__)

COX_FORMAT = "survrank.cox/v1"

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITER = 100
SEPARATION_NORM = 50.0
Z_95 = 1.959963984540054


def partial_log_likelihood(
    beta: np.ndarray,
    X: np.ndarray,
    time: np.ndarray,
    event: np.ndarray,
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Breslow partial log-likelihood, its gradient and its Hessian at ``beta``."""
    beta = np.asarray(beta, dtype=float)
    X = np.asarray(X, dtype=float)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)

    order = np.argsort(time, kind="stable")
    X, time, event = X[order], time[order], event[order]

    eta = X @ beta
    shift = eta.max() if eta.size else 0.0
    w = np.exp(eta - shift)

    # sums over j >= k in time order; tied times share the risk set of their first member
    s0 = np.cumsum(w[::-1])[::-1]
    s1 = np.cumsum((w[:, None] * X)[::-1], axis=0)[::-1]
    s2 = np.cumsum((w[:, None, None] * X[:, :, None] * X[:, None, :])[::-1], axis=0)[::-1]
    first = np.searchsorted(time, time, side="left")

    cases = np.flatnonzero(event == 1)
    risk0 = s0[first[cases]]
    mean_x = s1[first[cases]] / risk0[:, None]

    value = float(np.sum(eta[cases] - shift - np.log(risk0)))
    gradient = np.sum(X[cases] - mean_x, axis=0)
    second = s2[first[cases]] / risk0[:, None, None]
    hessian = -np.sum(second - mean_x[:, :, None] * mean_x[:, None, :], axis=0)
    return value, gradient, hessian


@dataclass
class CoxFit:
    """Array-level result of the Newton solver."""

    coefficients: np.ndarray
    information: np.ndarray
    log_likelihood: float
    iterations: int
    gradient_norm: float

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(np.linalg.inv(self.information)))


def _check_design(X: np.ndarray, event: np.ndarray):
    if X.ndim != 2 or X.shape[1] == 0:
        raise RankError("Design matrix has no columns")
    if not np.any(event == 1):
        raise ArgumentError("Cox fit needs at least one event")
    constant = np.flatnonzero(np.ptp(X, axis=0) == 0)
    if constant.size:
        raise RankError(f"Design matrix has constant column(s) {constant.tolist()}", columns=constant.tolist())


def _solve(information: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    if np.linalg.matrix_rank(information) < information.shape[0]:
        raise RankError("Information matrix is singular")
    try:
        return np.linalg.solve(information, gradient)
    except np.linalg.LinAlgError as e:
        raise RankError(f"Information matrix is singular: {e}") from e


def fit_cox_matrix(
    X: np.ndarray,
    time: np.ndarray,
    event: np.ndarray,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> CoxFit:
    """Maximize the partial likelihood from beta = 0.

    Converged when max |gradient| < ``tolerance``. Every accepted step does
    not decrease the likelihood; a rejected step is halved. A coefficient
    norm above 50 with a live gradient, or convergence at a large norm with a
    vanishing information matrix, is reported as separation.
    """
    X = np.asarray(X, dtype=float)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    _check_design(X, event)

    beta = np.zeros(X.shape[1])
    value, gradient, hessian = partial_log_likelihood(beta, X, time, event)
    steps = 0

    for iteration in range(1, max_iter + 1):
        if np.max(np.abs(gradient)) < tolerance:
            break

        step = _solve(-hessian, gradient)
        scale = 1.0
        while True:
            candidate = beta + scale * step
            new_value, new_gradient, new_hessian = partial_log_likelihood(candidate, X, time, event)
            if np.isfinite(new_value) and new_value >= value - 1e-12 * max(1.0, abs(value)):
                break
            scale /= 2.0
            if scale < 1e-10:
                raise ConvergenceError(
                    f"Step-halving failed to improve the partial likelihood at iteration {iteration}"
                )

        beta, value, gradient, hessian = candidate, new_value, new_gradient, new_hessian
        steps = iteration
        logger.debug(
            f"Cox iteration {iteration}: loglik {value:.6f}, "
            f"max|grad| {np.max(np.abs(gradient)):.2e}, step scale {scale:g}"
        )

        if np.linalg.norm(beta) > SEPARATION_NORM and np.max(np.abs(gradient)) >= tolerance:
            logger.error(f"Coefficient norm {np.linalg.norm(beta):.1f} exceeds {SEPARATION_NORM:g}")
            raise SeparationError(
                "Partial likelihood is monotone: coefficients diverge",
                coefficient_norm=float(np.linalg.norm(beta)),
            )
    else:
        if np.max(np.abs(gradient)) >= tolerance:
            raise ConvergenceError(
                f"No convergence after {max_iter} iterations "
                f"(max|grad| = {np.max(np.abs(gradient)):.2e})"
            )

    information = -hessian
    smallest = float(np.linalg.eigvalsh(information).min())
    if np.linalg.norm(beta) > 10.0 and smallest < 1e-6:
        logger.error(f"Converged at |beta| = {np.linalg.norm(beta):.1f} with information eigenvalue {smallest:.1e}")
        raise SeparationError(
            "Partial likelihood is monotone: converged on a flat ridge",
            coefficient_norm=float(np.linalg.norm(beta)),
        )
    if np.linalg.matrix_rank(information) < information.shape[0]:
        raise RankError("Information matrix at the optimum is singular")

    return CoxFit(
        coefficients=beta,
        information=information,
        log_likelihood=value,
        iterations=steps,
        gradient_norm=float(np.max(np.abs(gradient))),
    )


@dataclass
class CoxModel:
    featurizer: Featurizer
    coefficients: np.ndarray
    information: np.ndarray
    iterations: int = 0
    gradient_norm: float = 0.0
    log_likelihood: float = 0.0
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def standard_errors(self) -> np.ndarray:
        return np.sqrt(np.diag(np.linalg.inv(self.information)))

    def linear_predictors(self, records: Sequence[CohortRecord]) -> np.ndarray:
        return self.featurizer.transform(records) @ self.coefficients

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": COX_FORMAT,
            "featurization": self.featurizer.to_dict(),
            "feature_names": self.featurizer.feature_names,
            "coefficients": [float(b) for b in self.coefficients],
            "information": self.information.tolist(),
            "convergence": {
                "iterations": self.iterations,
                "gradient_norm": self.gradient_norm,
                "log_likelihood": self.log_likelihood,
            },
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CoxModel":
        if data.get("format") != COX_FORMAT:
            raise ArgumentError(f"Not a Cox model file (format={data.get('format')!r})")
        convergence = data.get("convergence", {})
        return cls(
            featurizer=Featurizer.from_dict(data["featurization"]),
            coefficients=np.array(data["coefficients"], dtype=float),
            information=np.array(data["information"], dtype=float),
            iterations=int(convergence.get("iterations", 0)),
            gradient_norm=float(convergence.get("gradient_norm", 0.0)),
            log_likelihood=float(convergence.get("log_likelihood", 0.0)),
            metadata=dict(data.get("metadata", {})),
        )


def fit_cox(
    cohort: Cohort,
    featurizer: Optional[Featurizer] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
    standardize: bool = True,
) -> CoxModel:
    """Fit on the ranker's featurization (reference level dropped per categorical)."""
    if featurizer is None:
        featurizer = Featurizer.fit(cohort, standardize=standardize, drop_first=True)
    X = featurizer.transform(list(cohort.records))
    fit = fit_cox_matrix(X, cohort.times(), cohort.events(), tolerance=tolerance, max_iter=max_iter)
    logger.info(
        f"Fitted Cox model on {len(cohort)} subjects in {fit.iterations} iterations "
        f"(loglik {fit.log_likelihood:.4f})"
    )
    return CoxModel(
        featurizer=featurizer,
        coefficients=fit.coefficients,
        information=fit.information,
        iterations=fit.iterations,
        gradient_norm=fit.gradient_norm,
        log_likelihood=fit.log_likelihood,
        metadata={"n": len(cohort), "events": int(cohort.events().sum())},
    )


def cox_risk(model: CoxModel, record: CohortRecord) -> float:
    """Linear predictor beta . phi(x); higher means earlier expected event."""
    return float(model.linear_predictors([record])[0])


@dataclass(frozen=True)
class HazardRatioResult:
    hr: float
    ci: Tuple[float, float]
    p_value: float
    coefficient: float
    standard_error: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "hr": self.hr,
            "ci_lower": self.ci[0],
            "ci_upper": self.ci[1],
            "p_value": self.p_value,
        }


def hazard_ratio_arrays(group: np.ndarray, time: np.ndarray, event: np.ndarray) -> HazardRatioResult:
    """Univariate Cox fit on a 0/1 group indicator (1 = compared group).

    HR = exp(beta), 95% CI exp(beta +/- 1.96 se), two-sided Wald p-value.
    """
    group = np.asarray(group, dtype=float)
    event = np.asarray(event)
    if np.ptp(group) == 0:
        raise RankError("Group indicator is constant: no contrast")
    for label in (0, 1):
        if not np.any((group == label) & (event == 1)):
            raise SeparationError(f"No events in group {label}: hazard ratio diverges", group=label)

    fit = fit_cox_matrix(group[:, None], time, event)
    beta = float(fit.coefficients[0])
    se = float(fit.standard_errors[0])
    z = beta / se
    return HazardRatioResult(
        hr=float(np.exp(beta)),
        ci=(float(np.exp(beta - Z_95 * se)), float(np.exp(beta + Z_95 * se))),
        p_value=float(2.0 * stats.norm.sf(abs(z))),
        coefficient=beta,
        standard_error=se,
    )


def hazard_ratio(group: Union[RiskGroups, Sequence[int], np.ndarray], outcomes: SurvivalOutcomes) -> HazardRatioResult:
    """Hazard ratio of the high-risk (1) over the low-risk (0) group.

    ``group`` is a median split or a 0/1 indicator aligned with ``outcomes.ids``.
    """
    indicator = group.indicator(outcomes.ids) if isinstance(group, RiskGroups) else np.asarray(group)
    if indicator.shape != (len(outcomes),):
        raise ArgumentError(f"Group indicator has {indicator.size} entries for {len(outcomes)} subjects")
    return hazard_ratio_arrays(indicator, outcomes.times, outcomes.events)
