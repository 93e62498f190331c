"""Cohort ingestion, validation and the deterministic train/test split."""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from survrank.errors import ArgumentError, SchemaError, ValidationError

logger = logging.getLogger(__name__)

MISSING = "unknown"
FeatureValue = Union[str, float, bool]

_NA_TOKENS = {"", "na", "nan", "null", "none", "unknown"}
_BOOL_TOKENS = {"true": True, "false": False, "yes": True, "no": False}


@dataclass(frozen=True)
class CohortRecord:
    """One subject: features, event indicator and follow-up time."""

    id: str
    features: Mapping[str, FeatureValue]
    event: int
    time: float


@dataclass(frozen=True)
class SchemaConfig:
    """Column roles of a cohort file."""

    id: str
    time: str
    event: str
    features: Optional[Tuple[str, ...]] = None

    @classmethod
    def from_dict(cls, data: Mapping) -> "SchemaConfig":
        missing = [k for k in ("id", "time", "event") if not data.get(k)]
        if missing:
            raise SchemaError(f"Schema config must name the {', '.join(missing)} column(s)")
        features = data.get("features")
        return cls(
            id=str(data["id"]),
            time=str(data["time"]),
            event=str(data["event"]),
            features=tuple(str(c) for c in features) if features is not None else None,
        )

    @classmethod
    def from_json(cls, text: str) -> "SchemaConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError(f"Schema config is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise SchemaError("Schema config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: Path) -> "SchemaConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise SchemaError(f"Cannot read schema config {path}: {e}") from e
        return cls.from_json(text)

    def to_dict(self) -> Dict:
        data = {"id": self.id, "time": self.time, "event": self.event}
        if self.features is not None:
            data["features"] = list(self.features)
        return data


@dataclass(frozen=True)
class Cohort:
    """An ordered, validated collection of records sharing one schema."""

    records: Tuple[CohortRecord, ...]
    schema: Tuple[str, ...]
    time_unit: str = "days"
    _index: Dict[str, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        index: Dict[str, int] = {}
        for i, record in enumerate(self.records):
            if not record.id:
                raise ValidationError(f"Row {i} has an empty id", row_id=None)
            if record.id in index:
                raise ValidationError(f"Duplicate id {record.id!r}", row_id=record.id)
            if tuple(record.features.keys()) != self.schema:
                raise ValidationError(
                    f"Record {record.id!r} features do not match the cohort schema",
                    row_id=record.id,
                )
            index[record.id] = i
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[CohortRecord]:
        return iter(self.records)

    def __contains__(self, record_id: object) -> bool:
        return record_id in self._index

    @property
    def ids(self) -> List[str]:
        return [r.id for r in self.records]

    def by_id(self, record_id: str) -> CohortRecord:
        try:
            return self.records[self._index[record_id]]
        except KeyError:
            raise ArgumentError(f"Unknown record id: {record_id!r}") from None

    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records], dtype=float)

    def events(self) -> np.ndarray:
        return np.array([r.event for r in self.records], dtype=int)

    def subset(self, ids: Iterable[str]) -> "Cohort":
        """Records whose id is in ``ids``, in this cohort's row order."""
        wanted = set(ids)
        unknown = wanted - set(self._index)
        if unknown:
            raise ArgumentError(f"Unknown record ids: {sorted(unknown)[:5]}")
        return Cohort(
            records=tuple(r for r in self.records if r.id in wanted),
            schema=self.schema,
            time_unit=self.time_unit,
        )


def _parse_feature_column(values: Sequence[str]) -> List[FeatureValue]:
    """Numbers stay numbers, yes/no/true/false become bools, gaps become 'unknown'."""
    present = [v.strip() for v in values if v.strip().lower() not in _NA_TOKENS]

    if present and all(v.lower() in _BOOL_TOKENS for v in present):
        return [
            _BOOL_TOKENS[v.strip().lower()] if v.strip().lower() not in _NA_TOKENS else MISSING
            for v in values
        ]

    numeric = pd.to_numeric(pd.Series(present, dtype=object), errors="coerce")
    if present and numeric.notna().all() and np.isfinite(numeric.to_numpy(dtype=float)).all():
        return [
            float(v) if v.strip().lower() not in _NA_TOKENS else MISSING for v in values
        ]

    return [v.strip() if v.strip().lower() not in _NA_TOKENS else MISSING for v in values]


def parse_cohort(
    source: Union[str, Path, TextIO],
    schema_config: SchemaConfig,
    delimiter: str = ",",
    time_unit: str = "days",
) -> Cohort:
    """Read a delimiter-separated cohort file and validate it.

    Raises SchemaError when a named column is absent and ValidationError
    (carrying the offending row id) for bad times, events or duplicate ids.
    """
    try:
        frame = pd.read_csv(
            source,
            sep=delimiter,
            dtype=str,
            keep_default_na=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"Cohort file is empty: {e}") from e

    columns = list(frame.columns)
    required = [schema_config.id, schema_config.time, schema_config.event]
    missing = [c for c in required if c not in columns]
    if missing:
        raise SchemaError(f"Missing required column(s): {', '.join(missing)}", columns=columns)

    if schema_config.features is not None:
        absent = [c for c in schema_config.features if c not in columns]
        if absent:
            raise SchemaError(f"Missing feature column(s): {', '.join(absent)}", columns=columns)
        feature_columns = list(schema_config.features)
    else:
        feature_columns = [c for c in columns if c not in required]

    parsed_features = {c: _parse_feature_column(frame[c].tolist()) for c in feature_columns}

    records: List[CohortRecord] = []
    seen = set()
    for row_number, (raw_id, raw_time, raw_event) in enumerate(
        zip(frame[schema_config.id], frame[schema_config.time], frame[schema_config.event])
    ):
        record_id = raw_id.strip()
        if not record_id:
            raise ValidationError(f"Row {row_number + 1} has an empty id", row_id=None)
        if record_id in seen:
            raise ValidationError(f"Duplicate id {record_id!r}", row_id=record_id)
        seen.add(record_id)

        try:
            time = float(raw_time)
        except ValueError:
            raise ValidationError(
                f"Row {record_id!r}: time {raw_time!r} is not a number", row_id=record_id
            ) from None
        if not math.isfinite(time) or time <= 0:
            raise ValidationError(
                f"Row {record_id!r}: time must be positive, got {raw_time!r}", row_id=record_id
            )

        try:
            event_value = float(raw_event)
        except ValueError:
            event_value = float("nan")
        if event_value not in (0.0, 1.0):
            raise ValidationError(
                f"Row {record_id!r}: event must be 0 or 1, got {raw_event!r}", row_id=record_id
            )

        features = {c: parsed_features[c][row_number] for c in feature_columns}
        records.append(CohortRecord(id=record_id, features=features, event=int(event_value), time=time))

    cohort = Cohort(records=tuple(records), schema=tuple(feature_columns), time_unit=time_unit)
    logger.info(
        f"Parsed cohort: {len(cohort)} rows, {len(feature_columns)} features, "
        f"{int(cohort.events().sum()) if len(cohort) else 0} events"
    )
    return cohort


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_cohort(cohort: Cohort, test_fraction: float = 0.2, seed: int = 0) -> Tuple[Cohort, Cohort]:
    """Seeded shuffle of the sorted ids, test = prefix, train = the rest.

    Membership depends only on (ids, fraction, seed); both halves keep the
    cohort's row order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ArgumentError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    if len(cohort) == 0:
        raise ArgumentError("Cannot split an empty cohort")

    ids = sorted(cohort.ids)
    n_test = round_half_up(test_fraction * len(ids))
    order = np.random.default_rng(seed).permutation(len(ids))
    test_ids = {ids[i] for i in order[:n_test]}

    test = Cohort(
        records=tuple(r for r in cohort.records if r.id in test_ids),
        schema=cohort.schema,
        time_unit=cohort.time_unit,
    )
    train = Cohort(
        records=tuple(r for r in cohort.records if r.id not in test_ids),
        schema=cohort.schema,
        time_unit=cohort.time_unit,
    )
    logger.info(f"Split cohort: {len(train)} train, {len(test)} test (seed={seed})")
    return train, test


def _render_cell(value: FeatureValue) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def format_number(value: float) -> str:
    """Shortest round-trip text, no trailing zeros (79.0 -> '79')."""
    if float(value).is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(float(value))


def cohort_to_frame(cohort: Cohort, schema_config: SchemaConfig) -> pd.DataFrame:
    """Tabular form using the schema config's column names."""
    rows = []
    for r in cohort.records:
        row = {
            schema_config.id: r.id,
            schema_config.time: format_number(r.time),
            schema_config.event: str(r.event),
        }
        row.update({c: _render_cell(v) for c, v in r.features.items()})
        rows.append(row)
    columns = [schema_config.id, schema_config.time, schema_config.event, *cohort.schema]
    return pd.DataFrame(rows, columns=columns)
