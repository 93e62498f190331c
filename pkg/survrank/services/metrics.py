"""Discrimination metrics, bootstrap intervals, Kaplan-Meier curves and
paired-difference equivalence analysis.

Array-level kernels (``concordance``, ``auc_at_horizon``, ``auc_for_event``)
take ``(risk, time, event)`` arrays and are shared by the RiskTable-level
wrappers and the bootstrap.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from survrank.errors import ArgumentError, InstabilityError, UndefinedMetricError
from survrank.services.cohort import Cohort
from survrank.services.inference import RiskTable

logger = logging.getLogger(__name__)

MetricKernel = Callable[[np.ndarray, np.ndarray, np.ndarray], float]

KDE_FALLBACK_BANDWIDTH = 1e-6


@dataclass(frozen=True)
class SurvivalOutcomes:
    """Observed (time, event) per subject id."""

    ids: Tuple[str, ...]
    times: np.ndarray
    events: np.ndarray

    def __post_init__(self):
        if len(self.ids) != len(self.times) or len(self.ids) != len(self.events):
            raise ArgumentError("ids, times and events must have equal length")
        if len(set(self.ids)) != len(self.ids):
            raise ArgumentError("Survival outcomes contain duplicate ids")

    @classmethod
    def from_cohort(cls, cohort: Cohort) -> "SurvivalOutcomes":
        return cls(ids=tuple(cohort.ids), times=cohort.times(), events=cohort.events())

    def __len__(self) -> int:
        return len(self.ids)

    def restrict(self, ids: Sequence[str]) -> "SurvivalOutcomes":
        """Outcomes for ``ids`` in that order."""
        index = {rid: k for k, rid in enumerate(self.ids)}
        missing = [i for i in ids if i not in index]
        if missing:
            raise ArgumentError(f"No outcome for ids: {missing[:5]}")
        rows = [index[i] for i in ids]
        return SurvivalOutcomes(ids=tuple(ids), times=self.times[rows], events=self.events[rows])

    def align(self, risks: RiskTable) -> np.ndarray:
        """Risks in outcome order; the id sets must match exactly."""
        if set(risks.ids) != set(self.ids):
            raise ArgumentError(
                f"Risk table ids do not match outcome ids "
                f"({len(risks)} risks vs {len(self)} outcomes)"
            )
        return risks.risks_for(self.ids)


# -- kernels -----------------------------------------------------------------


def concordance(risk: np.ndarray, time: np.ndarray, event: np.ndarray) -> float:
    """Harrell's C over comparable pairs: e_i = 1 and t_i < t_j.

    The earlier subject having strictly higher risk counts 1, a tie 0.5.
    """
    risk = np.asarray(risk, dtype=float)
    time = np.asarray(time, dtype=float)
    cases = np.flatnonzero(np.asarray(event) == 1)
    if cases.size == 0:
        raise UndefinedMetricError("C-index undefined: no events")

    comparable = time[cases, None] < time[None, :]
    n_pairs = int(comparable.sum())
    if n_pairs == 0:
        raise UndefinedMetricError("C-index undefined: no comparable pairs")

    diff = risk[cases, None] - risk[None, :]
    concordant = np.count_nonzero(comparable & (diff > 0))
    tied = np.count_nonzero(comparable & (diff == 0))
    return (concordant + 0.5 * tied) / n_pairs


def mann_whitney_auc(positive: np.ndarray, negative: np.ndarray) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie), via average ranks."""
    n_pos, n_neg = len(positive), len(negative)
    ranks = stats.rankdata(np.concatenate([positive, negative]))
    u = ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def horizon_masks(time: np.ndarray, event: np.ndarray, horizon: float) -> Tuple[np.ndarray, np.ndarray]:
    """(positives, negatives) for "event by ``horizon``".

    Subjects censored before the horizon are in neither mask.
    """
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    positive = (event == 1) & (time <= horizon)
    negative = (time > horizon) | ((time == horizon) & (event == 0))
    return positive, negative


def auc_at_horizon(risk: np.ndarray, time: np.ndarray, event: np.ndarray, horizon: float) -> float:
    positive, negative = horizon_masks(time, event, horizon)
    if not positive.any() or not negative.any():
        raise UndefinedMetricError(
            f"AUC undefined at horizon {horizon:g}: "
            f"{int(positive.sum())} positives, {int(negative.sum())} negatives",
            horizon=horizon,
        )
    risk = np.asarray(risk, dtype=float)
    return mann_whitney_auc(risk[positive], risk[negative])


def auc_for_event(risk: np.ndarray, time: np.ndarray, event: np.ndarray) -> float:
    """AUC of the risk score for the event indicator over full follow-up."""
    event = np.asarray(event)
    positive, negative = event == 1, event == 0
    if not positive.any() or not negative.any():
        raise UndefinedMetricError("Overall AUC undefined: events and non-events both required")
    risk = np.asarray(risk, dtype=float)
    return mann_whitney_auc(risk[positive], risk[negative])


# -- RiskTable-level metrics -------------------------------------------------


def c_index(risks: RiskTable, outcomes: SurvivalOutcomes) -> float:
    return concordance(outcomes.align(risks), outcomes.times, outcomes.events)


def horizon_auc(risks: RiskTable, outcomes: SurvivalOutcomes, horizon: float) -> float:
    if horizon <= 0:
        raise ArgumentError(f"horizon must be positive, got {horizon}")
    return auc_at_horizon(outcomes.align(risks), outcomes.times, outcomes.events, horizon)


def overall_auc(risks: RiskTable, outcomes: SurvivalOutcomes) -> float:
    return auc_for_event(outcomes.align(risks), outcomes.times, outcomes.events)


# -- bootstrap ---------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile 95% interval plus the full-sample point estimate.

    Unpacks as ``(lower, upper, point)``.
    """

    lower: float
    upper: float
    point: float
    b: int
    skipped: int = 0

    def __iter__(self) -> Iterator[float]:
        return iter((self.lower, self.upper, self.point))


def resample_indices(n: int, b: int, seed: int) -> List[np.ndarray]:
    """``b`` index draws with replacement, one spawned generator per resample."""
    children = np.random.SeedSequence(seed).spawn(b)
    return [np.random.default_rng(child).integers(0, n, size=n) for child in children]


def _evaluate_resample(kernel: MetricKernel, arrays: Tuple[np.ndarray, ...], idx: np.ndarray) -> Optional[float]:
    try:
        return kernel(*(a[idx] for a in arrays))
    except UndefinedMetricError:
        return None


def _run_resamples(
    kernel: MetricKernel,
    arrays: Tuple[np.ndarray, ...],
    b: int,
    seed: int,
    jobs: int,
) -> List[Optional[float]]:
    draws = resample_indices(len(arrays[0]), b, seed)
    run = partial(_evaluate_resample, kernel, arrays)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run, draws))
    return [run(idx) for idx in draws]


def _check_skips(skipped: int, b: int, what: str):
    if skipped > b / 2:
        raise InstabilityError(f"{what}: {skipped} of {b} bootstrap resamples undefined", skipped=skipped, b=b)
    if skipped:
        logger.warning(f"{what}: skipped {skipped} of {b} undefined bootstrap resamples")


def bootstrap_arrays(
    kernel: MetricKernel,
    risk: np.ndarray,
    time: np.ndarray,
    event: np.ndarray,
    b: int = 1000,
    seed: int = 0,
    jobs: int = 1,
) -> BootstrapResult:
    if b < 1:
        raise ArgumentError(f"b must be >= 1, got {b}")
    point = kernel(risk, time, event)
    values = _run_resamples(kernel, (risk, time, event), b, seed, jobs)
    kept = np.array([v for v in values if v is not None], dtype=float)
    skipped = b - kept.size
    _check_skips(skipped, b, getattr(kernel, "__name__", "metric"))
    lower, upper = np.percentile(kept, [2.5, 97.5])
    return BootstrapResult(lower=float(lower), upper=float(upper), point=float(point), b=b, skipped=skipped)


def bootstrap_ci(
    metric: MetricKernel,
    risks: RiskTable,
    outcomes: SurvivalOutcomes,
    b: int = 1000,
    seed: int = 0,
    jobs: int = 1,
) -> BootstrapResult:
    """Resample subjects with replacement ``b`` times and recompute ``metric``.

    ``metric`` is an array kernel such as ``concordance`` or
    ``partial(auc_at_horizon, horizon=h)``. Undefined resamples are skipped;
    more than half skipped raises InstabilityError.
    """
    return bootstrap_arrays(metric, outcomes.align(risks), outcomes.times, outcomes.events, b, seed, jobs)


@dataclass(frozen=True)
class MetricReport:
    metric: str
    point: Optional[float]
    ci_lower: Optional[float]
    ci_upper: Optional[float]
    n: int
    horizon: Optional[float] = None
    skipped: int = 0
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "metric": self.metric,
            "point": self.point,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "n": self.n,
        }
        if self.horizon is not None:
            data["horizon"] = self.horizon
        if self.skipped:
            data["skipped"] = self.skipped
        if self.error is not None:
            data["error"] = self.error
        return data


def evaluate(
    risks: RiskTable,
    outcomes: SurvivalOutcomes,
    horizons: Sequence[float] = (),
    b: int = 1000,
    seed: int = 0,
    jobs: int = 1,
) -> List[MetricReport]:
    """C-index, overall AUC and one AUC per horizon, each with a bootstrap CI.

    A metric undefined on this sample is reported with ``error`` set instead
    of aborting the whole evaluation.
    """
    risk = outcomes.align(risks)
    jobs_list: List[Tuple[str, Optional[float], MetricKernel]] = [
        ("c_index", None, concordance),
        ("auc", None, auc_for_event),
    ]
    jobs_list += [("auc", float(h), partial(auc_at_horizon, horizon=float(h))) for h in horizons]

    reports = []
    for name, horizon, kernel in jobs_list:
        try:
            result = bootstrap_arrays(kernel, risk, outcomes.times, outcomes.events, b, seed, jobs)
        except (UndefinedMetricError, InstabilityError) as e:
            logger.warning(e.message)
            reports.append(MetricReport(name, None, None, None, len(outcomes), horizon, error=e.message))
            continue
        reports.append(
            MetricReport(
                metric=name,
                point=result.point,
                ci_lower=result.lower,
                ci_upper=result.upper,
                n=len(outcomes),
                horizon=horizon,
                skipped=result.skipped,
            )
        )
    return reports


# -- Kaplan-Meier ------------------------------------------------------------


@dataclass(frozen=True)
class KMCurve:
    """Product-limit step function; row 0 is (0, 1)."""

    times: np.ndarray
    survival: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray

    def survival_at(self, t: float) -> float:
        """Right-continuous lookup: S at the last step time <= t."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.survival[max(k, 0)])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "time": self.times,
                "survival": self.survival,
                "at_risk": self.at_risk,
                "events": self.events,
            }
        )


def km_arrays(time: np.ndarray, event: np.ndarray) -> KMCurve:
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    if time.size == 0:
        raise ArgumentError("Kaplan-Meier needs at least one subject")

    event_times = np.unique(time[event == 1])
    at_risk = np.array([np.count_nonzero(time >= t) for t in event_times], dtype=int)
    deaths = np.array([np.count_nonzero((time == t) & (event == 1)) for t in event_times], dtype=int)
    survival = np.cumprod(1.0 - deaths / at_risk) if event_times.size else np.array([])

    return KMCurve(
        times=np.concatenate([[0.0], event_times]),
        survival=np.concatenate([[1.0], survival]),
        at_risk=np.concatenate([[time.size], at_risk]).astype(int),
        events=np.concatenate([[0], deaths]).astype(int),
    )


def km_curve(outcomes: SurvivalOutcomes) -> KMCurve:
    return km_arrays(outcomes.times, outcomes.events)


@dataclass(frozen=True)
class RiskGroups:
    """High/low assignment of test subjects at the training-median risk."""

    threshold: float
    assignment: Dict[str, str]

    def indicator(self, ids: Sequence[str]) -> np.ndarray:
        return np.array([1 if self.assignment[i] == "high" else 0 for i in ids], dtype=int)

    def ids_in(self, group: str) -> List[str]:
        return [i for i, g in self.assignment.items() if g == group]


def stratify_by_median(train_risks: RiskTable, test_risks: RiskTable) -> RiskGroups:
    """High risk iff test risk > median training risk; ties go low."""
    if len(train_risks) == 0 or len(test_risks) == 0:
        raise ArgumentError("Both risk tables must be non-empty")
    threshold = float(np.median(train_risks.risks()))
    assignment = {
        e.id: ("high" if e.risk > threshold else "low") for e in test_risks.entries.values()
    }
    logger.info(
        f"Median threshold {threshold:.4f}: "
        f"{sum(g == 'high' for g in assignment.values())} high, "
        f"{sum(g == 'low' for g in assignment.values())} low"
    )
    return RiskGroups(threshold=threshold, assignment=assignment)


@dataclass(frozen=True)
class LogRankResult:
    statistic: float
    p_value: float


def logrank_test(group: np.ndarray, time: np.ndarray, event: np.ndarray) -> LogRankResult:
    """Two-sample log-rank test (chi-square, 1 df) of group 1 against group 0."""
    group = np.asarray(group).astype(int)
    time = np.asarray(time, dtype=float)
    event = np.asarray(event)
    if set(np.unique(group)) != {0, 1}:
        raise ArgumentError("logrank_test needs both groups present")

    observed = expected = variance = 0.0
    for t in np.unique(time[event == 1]):
        at_risk = time >= t
        n = np.count_nonzero(at_risk)
        n1 = np.count_nonzero(at_risk & (group == 1))
        dead = (time == t) & (event == 1)
        d = np.count_nonzero(dead)
        observed += np.count_nonzero(dead & (group == 1))
        expected += d * n1 / n
        if n > 1:
            variance += d * (n1 / n) * (1 - n1 / n) * (n - d) / (n - 1)

    if variance <= 0:
        raise UndefinedMetricError("Log-rank statistic undefined: zero variance")
    statistic = (observed - expected) ** 2 / variance
    return LogRankResult(statistic=float(statistic), p_value=float(stats.chi2.sf(statistic, df=1)))


# -- KDE and equivalence -----------------------------------------------------


def silverman_bandwidth(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    sd = float(np.std(samples, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(samples, [75, 25])
    spreads = [s for s in (sd, (q75 - q25) / 1.34) if s > 0]
    if not spreads:
        return KDE_FALLBACK_BANDWIDTH
    return 0.9 * min(spreads) * n ** (-1 / 5)


def kde(samples: Sequence[float], grid: Sequence[float]) -> np.ndarray:
    """Gaussian kernel density of ``samples`` evaluated on ``grid``."""
    samples = np.asarray(samples, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if samples.size == 0:
        raise ArgumentError("kde needs at least one sample")
    bw = silverman_bandwidth(samples)
    return stats.norm.pdf((grid[:, None] - samples[None, :]) / bw).mean(axis=1) / bw


@dataclass(frozen=True)
class EquivalenceReport:
    """Paired C-index difference (a minus b) over shared bootstrap resamples."""

    mean_difference: float
    ci_lower: float
    ci_upper: float
    point_difference: float
    delta: float
    b: int
    skipped: int
    grid: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    differences: np.ndarray = field(repr=False)

    @property
    def within_bound(self) -> bool:
        return -self.delta < self.ci_lower and self.ci_upper < self.delta

    @property
    def verdict(self) -> str:
        return "within" if self.within_bound else "outside"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_difference": self.mean_difference,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "point_difference": self.point_difference,
            "delta": self.delta,
            "b": self.b,
            "skipped": self.skipped,
            "verdict": self.verdict,
        }

    def kde_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"grid": self.grid, "density": self.density})


def _paired_kernel(risk_a: np.ndarray, risk_b: np.ndarray, time: np.ndarray, event: np.ndarray) -> float:
    return concordance(risk_a, time, event) - concordance(risk_b, time, event)


def paired_difference_analysis(
    risks_a: RiskTable,
    risks_b: RiskTable,
    outcomes: SurvivalOutcomes,
    b: int = 1000,
    delta: float = 0.01,
    seed: int = 0,
    grid_size: int = 201,
    jobs: int = 1,
) -> EquivalenceReport:
    """Bootstrap the C-index difference of two risk tables on the same resamples.

    The verdict is "within" when the 95% interval lies inside (-delta, delta).
    """
    if set(risks_a.ids) != set(risks_b.ids):
        raise ArgumentError("Risk tables cover different subject ids")
    if delta <= 0:
        raise ArgumentError(f"delta must be positive, got {delta}")
    if b < 1:
        raise ArgumentError(f"b must be >= 1, got {b}")

    arrays = (outcomes.align(risks_a), outcomes.align(risks_b), outcomes.times, outcomes.events)
    point = _paired_kernel(*arrays)
    values = _run_resamples(_paired_kernel, arrays, b, seed, jobs)
    diffs = np.array([v for v in values if v is not None], dtype=float)
    skipped = b - diffs.size
    _check_skips(skipped, b, "paired C-index difference")

    lower, upper = (float(x) for x in np.percentile(diffs, [2.5, 97.5]))
    mean = float(diffs.mean())

    pad = 0.5 * max(float(np.ptp(diffs)), 2 * delta)
    grid = np.linspace(min(diffs.min(), -delta) - pad, max(diffs.max(), delta) + pad, grid_size)

    report = EquivalenceReport(
        mean_difference=mean,
        ci_lower=lower,
        ci_upper=upper,
        point_difference=float(point),
        delta=delta,
        b=b,
        skipped=skipped,
        grid=grid,
        density=kde(diffs, grid),
        differences=diffs,
    )
    logger.info(
        f"Paired difference: mean {mean:+.4f}, 95% CI [{lower:+.4f}, {upper:+.4f}], "
        f"{report.verdict} +/-{delta}"
    )
    return report
