"""Anchor selection and anchor-aggregated risk scores.

A test subject's risk is the share of anchors it is predicted to have the
event before: a comparison counts as a win only when its score is strictly
above 0.5, and indeterminate comparisons drop out of the denominator.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from survrank.errors import ArgumentError, ScoringError
from survrank.services.cohort import Cohort, CohortRecord
from survrank.services.comparator import ComparatorModel
from survrank.services.seeding import derive_seed

logger = logging.getLogger(__name__)

AnchorStrategy = Literal["random", "event_only"]

RISK_COLUMNS = ["id", "risk", "wins", "comparisons", "indeterminate"]


@dataclass(frozen=True)
class AnchorSet:
    """Training records every test subject is compared against."""

    anchors: Tuple[CohortRecord, ...]
    strategy: AnchorStrategy = "random"
    seed: int = 0
    requested_k: Optional[int] = None

    def __post_init__(self):
        if not self.anchors:
            raise ArgumentError("An anchor set needs at least one anchor")
        ids = [a.id for a in self.anchors]
        if len(set(ids)) != len(ids):
            raise ArgumentError("Anchor set contains duplicate ids")
        if self.strategy == "event_only" and any(a.event != 1 for a in self.anchors):
            raise ArgumentError("event_only anchor set contains a censored record")

    @property
    def k(self) -> int:
        return len(self.anchors)

    @property
    def ids(self) -> List[str]:
        return [a.id for a in self.anchors]

    @property
    def shortfall(self) -> bool:
        return self.requested_k is not None and self.k < self.requested_k

    def __len__(self) -> int:
        return self.k

    def __iter__(self) -> Iterator[CohortRecord]:
        return iter(self.anchors)


@dataclass(frozen=True)
class RiskEntry:
    id: str
    risk: float
    wins: int
    comparisons: int
    indeterminate: int


@dataclass
class RiskTable:
    """Risk entries keyed by subject id, in scoring order.

    ``failures`` maps subjects that could not be scored to the reason.
    """

    entries: Dict[str, RiskEntry] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, subject_id: object) -> bool:
        return subject_id in self.entries

    def __getitem__(self, subject_id: str) -> RiskEntry:
        return self.entries[subject_id]

    @property
    def ids(self) -> List[str]:
        return list(self.entries)

    @property
    def partial(self) -> bool:
        return bool(self.failures)

    def risks(self) -> np.ndarray:
        return np.array([e.risk for e in self.entries.values()], dtype=float)

    def risks_for(self, ids: Sequence[str]) -> np.ndarray:
        """Risks aligned to ``ids``; every id must be present."""
        missing = [i for i in ids if i not in self.entries]
        if missing:
            raise ArgumentError(f"Risk table has no entry for ids: {missing[:5]}")
        return np.array([self.entries[i].risk for i in ids], dtype=float)

    @classmethod
    def from_scores(cls, scores: Dict[str, float]) -> "RiskTable":
        """A table of bare scores (e.g. Cox linear predictors); counts are zero."""
        return cls(
            entries={
                rid: RiskEntry(id=rid, risk=float(r), wins=0, comparisons=0, indeterminate=0)
                for rid, r in scores.items()
            }
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(e.id, e.risk, e.wins, e.comparisons, e.indeterminate) for e in self.entries.values()],
            columns=RISK_COLUMNS,
        )

    @classmethod
    def read_csv(cls, path: Path) -> "RiskTable":
        try:
            frame = pd.read_csv(path, dtype={"id": str}, keep_default_na=False)
        except (OSError, ValueError) as e:
            raise ArgumentError(f"Cannot read risk file {path}: {e}") from None
        if list(frame.columns) != RISK_COLUMNS:
            raise ArgumentError(f"Risk file {path} must have columns {','.join(RISK_COLUMNS)}")
        try:
            entries = {
                row.id: RiskEntry(
                    id=row.id,
                    risk=float(row.risk),
                    wins=int(row.wins),
                    comparisons=int(row.comparisons),
                    indeterminate=int(row.indeterminate),
                )
                for row in frame.itertuples(index=False)
            }
        except ValueError as e:
            raise ArgumentError(f"Bad value in risk file {path}: {e}") from None
        return cls(entries=entries)


def select_anchors(
    train: Cohort,
    k: int = 50,
    strategy: AnchorStrategy = "random",
    seed: int = 0,
) -> AnchorSet:
    """Sample ``k`` anchors without replacement from the eligible training pool.

    ``event_only`` restricts the pool to event cases. A pool smaller than
    ``k`` is taken whole and the set is flagged as a shortfall.
    """
    if k < 1:
        raise ArgumentError(f"k must be >= 1, got {k}")
    if strategy not in ("random", "event_only"):
        raise ArgumentError(f"Unknown anchor strategy: {strategy}")

    pool = sorted(
        (r for r in train.records if strategy == "random" or r.event == 1),
        key=lambda r: r.id,
    )
    if not pool:
        raise ArgumentError(f"No eligible anchors in the training cohort (strategy={strategy})")

    if len(pool) <= k:
        chosen = pool
        if len(pool) < k:
            logger.warning(f"Only {len(pool)} eligible anchors for k={k}; using all of them")
    else:
        idx = np.sort(np.random.default_rng(seed).choice(len(pool), size=k, replace=False))
        chosen = [pool[i] for i in idx]

    logger.info(f"Selected {len(chosen)} {strategy} anchors (seed={seed})")
    return AnchorSet(anchors=tuple(chosen), strategy=strategy, seed=seed, requested_k=k)


def _tally(subject_id: str, scores: Sequence[Optional[float]]) -> RiskEntry:
    indeterminate = sum(1 for p in scores if p is None)
    comparisons = len(scores) - indeterminate
    if comparisons == 0:
        raise ScoringError(
            f"All {len(scores)} anchor comparisons for {subject_id!r} were indeterminate",
            subject_id=subject_id,
        )
    wins = sum(1 for p in scores if p is not None and p > 0.5)
    return RiskEntry(
        id=subject_id,
        risk=wins / comparisons,
        wins=wins,
        comparisons=comparisons,
        indeterminate=indeterminate,
    )


def _pair_seeds(seed: int, subject: CohortRecord, anchors: AnchorSet) -> List[int]:
    return [derive_seed(seed, subject.id, a.id) for a in anchors]


def risk_score(
    subject: CohortRecord,
    anchors: AnchorSet,
    model: ComparatorModel,
    order_policy: str = "shuffle",
    seed: int = 0,
) -> RiskEntry:
    if subject.id in anchors.ids:
        raise ArgumentError(f"Subject {subject.id!r} is one of the anchors")
    pairs = [(subject, a) for a in anchors]
    scores = model.score_pairs(pairs, policy=order_policy, seeds=_pair_seeds(seed, subject, anchors))
    return _tally(subject.id, scores)


def score_cohort(
    test: Cohort,
    anchors: AnchorSet,
    model: ComparatorModel,
    policy: str = "shuffle",
    seed: int = 0,
    strict: bool = False,
) -> RiskTable:
    """Score every test record against the shared anchor set.

    All (subject, anchor) comparisons go to the model in one batch so remote
    backends can run them concurrently; results are joined back by index.
    Subjects that cannot be scored land in ``failures`` unless ``strict``.
    """
    table = RiskTable()
    anchor_ids = set(anchors.ids)

    subjects: List[CohortRecord] = []
    for record in test.records:
        if record.id in anchor_ids:
            reason = f"Subject {record.id!r} is one of the anchors"
            if strict:
                raise ArgumentError(reason)
            table.failures[record.id] = reason
            continue
        subjects.append(record)

    if not subjects:
        return table

    pairs = [(s, a) for s in subjects for a in anchors]
    seeds = [x for s in subjects for x in _pair_seeds(seed, s, anchors)]
    scores = model.score_pairs(pairs, policy=policy, seeds=seeds)

    k = anchors.k
    for n, subject in enumerate(subjects):
        try:
            table.entries[subject.id] = _tally(subject.id, scores[n * k:(n + 1) * k])
        except ScoringError as e:
            if strict:
                raise
            logger.error(e.message)
            table.failures[subject.id] = e.message

    logger.info(
        f"Scored {len(table)} subjects against {k} anchors"
        + (f" ({len(table.failures)} failed)" if table.failures else "")
    )
    return table
