"""Comparable-pair construction and nested case-control sampling."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Tuple

import numpy as np
import pandas as pd

from survrank.errors import ArgumentError
from survrank.services.cohort import Cohort
from survrank.services.seeding import derived_rng

logger = logging.getLogger(__name__)

Pair = Tuple[str, str]


@dataclass(frozen=True)
class PairSet:
    """Ordered (earlier_id, later_id) pairs drawn from one cohort."""

    pairs: Tuple[Pair, ...]
    source_cohort: Optional[Cohort] = None

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.pairs)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(list(self.pairs), columns=["earlier_id", "later_id"])


@dataclass(frozen=True)
class SamplingConfig:
    """Nested case-control sampling: up to ``n_controls`` controls per event case."""

    n_controls: int = 10
    seed: int = 0
    event_only_controls: bool = False

    def __post_init__(self):
        if self.n_controls < 1:
            raise ArgumentError(f"n_controls must be >= 1, got {self.n_controls}")


def _sorted_view(cohort: Cohort):
    """Ids, times and events with ids in lexicographic order."""
    order = sorted(range(len(cohort)), key=lambda i: cohort.records[i].id)
    ids = [cohort.records[i].id for i in order]
    times = np.array([cohort.records[i].time for i in order], dtype=float)
    events = np.array([cohort.records[i].event for i in order], dtype=int)
    return ids, times, events


def comparable_pairs(cohort: Cohort) -> PairSet:
    """All (i, j) with e_i = 1 and t_i < t_j, sorted by earlier id then later id."""
    ids, times, events = _sorted_view(cohort)
    pairs: List[Pair] = []
    for i in np.flatnonzero(events == 1):
        later = np.flatnonzero(times > times[i])
        pairs.extend((ids[i], ids[j]) for j in later)
    logger.info(f"Comparable pairs: {len(pairs)} from {len(ids)} records")
    return PairSet(pairs=tuple(pairs), source_cohort=cohort)


def sample_case_controls(cohort: Cohort, config: SamplingConfig) -> PairSet:
    """For each event case draw up to N controls with strictly longer follow-up.

    Each case gets its own generator derived from (seed, case id), so the
    result does not depend on the order cases are visited.
    """
    ids, times, events = _sorted_view(cohort)
    pairs: List[Pair] = []
    short_cases = 0
    for i in np.flatnonzero(events == 1):
        eligible = times > times[i]
        if config.event_only_controls:
            eligible &= events == 1
        pool = np.flatnonzero(eligible)
        if pool.size == 0:
            continue
        if pool.size <= config.n_controls:
            chosen = pool
            short_cases += pool.size < config.n_controls
        else:
            rng = derived_rng(config.seed, ids[i])
            chosen = np.sort(rng.choice(pool, size=config.n_controls, replace=False))
        pairs.extend((ids[i], ids[j]) for j in chosen)

    logger.info(
        f"Sampled {len(pairs)} case-control pairs (N={config.n_controls}, "
        f"{short_cases} cases with fewer eligible controls than N)"
    )
    return PairSet(pairs=tuple(pairs), source_cohort=cohort)


def read_pairs(path: Path, cohort: Optional[Cohort] = None) -> PairSet:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except (OSError, ValueError) as e:
        raise ArgumentError(f"Cannot read pair file {path}: {e}") from None
    if list(frame.columns) != ["earlier_id", "later_id"]:
        raise ArgumentError(f"Pair file {path} must have columns earlier_id,later_id")
    pairs = tuple(zip(frame["earlier_id"], frame["later_id"]))
    if cohort is not None:
        unknown = {i for pair in pairs for i in pair if i not in cohort}
        if unknown:
            raise ArgumentError(f"Pair file references unknown ids: {sorted(unknown)[:5]}")
    return PairSet(pairs=pairs, source_cohort=cohort)
