"""Ablation sweeps: low-to-high ratio N, anchor count K, anchor strategy and
subject order policy."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from survrank.errors import ArgumentError, UndefinedMetricError
from survrank.services.cohort import Cohort
from survrank.services.comparator import ComparatorModel, TrainConfig, train_ranker
from survrank.services.inference import RiskTable, score_cohort, select_anchors
from survrank.services.metrics import EquivalenceReport, SurvivalOutcomes, c_index, paired_difference_analysis
from survrank.services.pairs import SamplingConfig, sample_case_controls

logger = logging.getLogger(__name__)

PARAMS = ("controls", "anchor-count", "anchor-strategy", "order-policy")


@dataclass
class AblationResult:
    param: str
    rows: List[Dict[str, Any]] = field(default_factory=list)
    reports: Dict[str, EquivalenceReport] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def _c_index_or_none(table: RiskTable, outcomes: SurvivalOutcomes) -> Optional[float]:
    try:
        return c_index(table, outcomes.restrict(table.ids))
    except UndefinedMetricError as e:
        logger.warning(e.message)
        return None


def sweep_controls(
    train: Cohort,
    test: Cohort,
    values: Sequence[int],
    train_config: TrainConfig = TrainConfig(),
    k: int = 50,
    strategy: str = "random",
    policy: str = "shuffle",
    seed: int = 0,
) -> AblationResult:
    """Retrain the built-in ranker for each number of controls per case."""
    outcomes = SurvivalOutcomes.from_cohort(test)
    anchors = select_anchors(train, k=k, strategy=strategy, seed=seed)
    result = AblationResult(param="controls")
    for n_controls in values:
        pairs = sample_case_controls(train, SamplingConfig(n_controls=int(n_controls), seed=seed))
        model = train_ranker(pairs, train, train_config)
        table = score_cohort(test, anchors, model, policy=policy, seed=seed)
        c = _c_index_or_none(table, outcomes)
        logger.info(f"N={n_controls}: {len(pairs)} pairs, C-index {c}")
        result.rows.append({"param": "controls", "value": int(n_controls), "c_index": c, "n_pairs": len(pairs)})
    return result


def sweep_anchor_count(
    model: ComparatorModel,
    train: Cohort,
    test: Cohort,
    values: Sequence[int],
    strategy: str = "random",
    policy: str = "shuffle",
    seed: int = 0,
) -> AblationResult:
    """Score the test set with K anchors for each K in ``values``."""
    outcomes = SurvivalOutcomes.from_cohort(test)
    result = AblationResult(param="anchor-count")
    for k in values:
        anchors = select_anchors(train, k=int(k), strategy=strategy, seed=seed)
        table = score_cohort(test, anchors, model, policy=policy, seed=seed)
        c = _c_index_or_none(table, outcomes)
        logger.info(f"K={k}: C-index {c}")
        result.rows.append({"param": "anchor-count", "value": int(k), "k_effective": anchors.k, "c_index": c})
    return result


def _paired(
    param: str,
    labels: Sequence[str],
    tables: Sequence[RiskTable],
    test: Cohort,
    b: int,
    delta: float,
    seed: int,
) -> AblationResult:
    shared = [i for i in tables[0].ids if all(i in t for t in tables[1:])]
    outcomes = SurvivalOutcomes.from_cohort(test).restrict(shared)
    aligned = [RiskTable(entries={i: t[i] for i in shared}) for t in tables]

    report = paired_difference_analysis(aligned[0], aligned[1], outcomes, b=b, delta=delta, seed=seed)
    result = AblationResult(param=param)
    for label, table in zip(labels, aligned):
        result.rows.append({"param": param, "value": label, "c_index": _c_index_or_none(table, outcomes)})
    result.rows.append(
        {
            "param": param,
            "value": f"{labels[0]}-{labels[1]}",
            "c_index": report.mean_difference,
            "ci_lower": report.ci_lower,
            "ci_upper": report.ci_upper,
            "verdict": report.verdict,
        }
    )
    result.reports[f"{labels[0]}-{labels[1]}"] = report
    return result


def compare_anchor_strategies(
    model: ComparatorModel,
    train: Cohort,
    test: Cohort,
    k: int = 50,
    policy: str = "shuffle",
    seed: int = 0,
    b: int = 1000,
    delta: float = 0.01,
) -> AblationResult:
    """Random anchors against event-only anchors on the same bootstrap resamples."""
    tables = [
        score_cohort(test, select_anchors(train, k=k, strategy=s, seed=seed), model, policy=policy, seed=seed)
        for s in ("random", "event_only")
    ]
    return _paired("anchor-strategy", ("random", "event_only"), tables, test, b, delta, seed)


def compare_order_policies(
    model: ComparatorModel,
    train: Cohort,
    test: Cohort,
    k: int = 50,
    strategy: str = "random",
    seed: int = 0,
    b: int = 1000,
    delta: float = 0.01,
) -> AblationResult:
    """Shuffled subject order against subject-always-second."""
    anchors = select_anchors(train, k=k, strategy=strategy, seed=seed)
    tables = [score_cohort(test, anchors, model, policy=p, seed=seed) for p in ("shuffle", "fix_first")]
    return _paired("order-policy", ("shuffle", "fix_first"), tables, test, b, delta, seed)


def parse_values(param: str, text: Optional[str]) -> List[int]:
    """Integer sweep values for ``controls`` / ``anchor-count``."""
    if param not in PARAMS:
        raise ArgumentError(f"Unknown ablation parameter: {param}")
    if param in ("anchor-strategy", "order-policy"):
        return []
    if not text:
        raise ArgumentError(f"--values is required for {param}")
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ArgumentError(f"--values must be comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise ArgumentError(f"--values must be positive integers, got {text!r}")
    return values
