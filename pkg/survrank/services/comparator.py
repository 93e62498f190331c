"""Pairwise comparison contract and the built-in logistic difference ranker.

The ranker scores an ordered pair as ``sigmoid(w . (phi(x_i) - phi(x_j)))``,
the probability that subject i has the event first, and is trained by
mini-batch gradient descent on ``-sum log p(i, j)`` over comparable pairs.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy.special import expit

from survrank.errors import ArgumentError, DegenerateFeaturizationError, FeaturizationError
from survrank.services.cohort import MISSING, Cohort, CohortRecord
from survrank.services.pairs import PairSet

logger = logging.getLogger(__name__)

RANKER_FORMAT = "survrank.ranker/v1"
EPSILON = 1e-12


@dataclass(frozen=True)
class ComparisonScore:
    """Probability that the first record of a pair has the event earlier."""

    p_first_earlier: float

    def __post_init__(self):
        if not 0.0 <= self.p_first_earlier <= 1.0:
            raise ArgumentError(f"Comparison probability out of range: {self.p_first_earlier}")


class ComparatorModel(Protocol):
    """Anything that scores ordered record pairs.

    ``score_pairs`` returns, for each (subject, anchor) pair, the probability
    that the subject has the event first, or None when the comparison was
    indeterminate. ``seeds`` drive prompt ordering for backends that care.
    """

    def score_pairs(
        self,
        pairs: Sequence[Tuple[CohortRecord, CohortRecord]],
        policy: str = "shuffle",
        seeds: Optional[Sequence[int]] = None,
    ) -> List[Optional[float]]:
        ...


# -- featurization -----------------------------------------------------------


@dataclass
class ColumnEncoding:
    name: str
    kind: str  # "numeric" or "categorical"
    mean: float = 0.0
    scale: float = 1.0
    categories: List[str] = field(default_factory=list)
    fill: Any = None
    drop_first: bool = False

    @property
    def encoded_categories(self) -> List[str]:
        return self.categories[1:] if self.drop_first else self.categories

    @property
    def width(self) -> int:
        return 1 if self.kind == "numeric" else len(self.encoded_categories)


def _as_number(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, (int, float)):
        return float(value)
    return None


@dataclass
class Featurizer:
    """Column -> numeric encoding learned from a training cohort.

    Numeric and boolean columns are standardized by the training mean and
    standard deviation (``standardize=False`` keeps raw values); other
    columns are one-hot encoded. Missing numeric values take the training
    mean, missing categories the training mode. With ``drop_first`` the
    first category of each column is the all-zeros reference level, which
    keeps the design full rank for models without an intercept shift.
    """

    columns: List[ColumnEncoding]
    standardize: bool = True

    @classmethod
    def fit(cls, cohort: Cohort, standardize: bool = True, drop_first: bool = False) -> "Featurizer":
        encodings: List[ColumnEncoding] = []
        for name in cohort.schema:
            values = [r.features[name] for r in cohort.records]
            present = [v for v in values if not (isinstance(v, str) and v == MISSING)]
            numbers = [_as_number(v) for v in present]

            if present and all(n is not None for n in numbers):
                arr = np.array(numbers, dtype=float)
                mean = float(arr.mean())
                sd = float(arr.std())
                encodings.append(
                    ColumnEncoding(
                        name=name,
                        kind="numeric",
                        mean=mean if standardize else 0.0,
                        scale=(sd if sd > 0 else 1.0) if standardize else 1.0,
                        fill=mean,
                    )
                )
            else:
                labels = [str(v) for v in present]
                categories = sorted(set(labels))
                mode = max(categories, key=lambda c: (labels.count(c), c)) if categories else MISSING
                encodings.append(
                    ColumnEncoding(
                        name=name,
                        kind="categorical",
                        categories=categories,
                        fill=mode,
                        drop_first=drop_first,
                    )
                )
        return cls(columns=encodings, standardize=standardize)

    @property
    def dimension(self) -> int:
        return sum(c.width for c in self.columns)

    @property
    def feature_names(self) -> List[str]:
        names: List[str] = []
        for c in self.columns:
            if c.kind == "numeric":
                names.append(c.name)
            else:
                names.extend(f"{c.name}={cat}" for cat in c.encoded_categories)
        return names

    def transform(self, records: Sequence[CohortRecord]) -> np.ndarray:
        """Encode records into an (n, dimension) matrix."""
        matrix = np.zeros((len(records), self.dimension), dtype=float)
        for row, record in enumerate(records):
            offset = 0
            for col in self.columns:
                if col.name not in record.features:
                    raise FeaturizationError(
                        f"Record {record.id!r} lacks feature {col.name!r} required by the model"
                    )
                value = record.features[col.name]
                if col.kind == "numeric":
                    number = _as_number(value)
                    if number is None:
                        if isinstance(value, str) and value == MISSING:
                            number = col.fill
                        else:
                            raise FeaturizationError(
                                f"Record {record.id!r}: {col.name!r} value {value!r} is not numeric"
                            )
                    matrix[row, offset] = (number - col.mean) / col.scale
                else:
                    label = str(value)
                    if isinstance(value, str) and value == MISSING:
                        label = str(col.fill)
                    if label in col.encoded_categories:
                        matrix[row, offset + col.encoded_categories.index(label)] = 1.0
                    # unseen and reference categories encode as all zeros
                offset += col.width
        return matrix

    def is_degenerate(self, matrix: np.ndarray) -> bool:
        return matrix.shape[1] == 0 or bool(np.all(np.ptp(matrix, axis=0) == 0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "standardize": self.standardize,
            "columns": [
                {
                    "name": c.name,
                    "kind": c.kind,
                    "mean": c.mean,
                    "scale": c.scale,
                    "categories": c.categories,
                    "fill": c.fill,
                    "drop_first": c.drop_first,
                }
                for c in self.columns
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Featurizer":
        return cls(
            columns=[ColumnEncoding(**c) for c in data["columns"]],
            standardize=bool(data.get("standardize", True)),
        )


# -- the ranker --------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 0.5
    batch_size: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ArgumentError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ArgumentError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ArgumentError(f"batch_size must be positive, got {self.batch_size}")


def pair_probability(z: np.ndarray) -> np.ndarray:
    """sigmoid(z), computed so that p(z) + p(-z) == 1 holds exactly."""
    z = np.asarray(z, dtype=float)
    pos = expit(np.abs(z))
    return np.where(z >= 0, pos, 1.0 - pos)


@dataclass
class RankerModel:
    """Linear difference ranker; the bias is fixed at 0 (unidentifiable)."""

    featurizer: Featurizer
    weights: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)
    bias: float = 0.0

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.featurizer.dimension,):
            raise ArgumentError(
                f"Weight dimension {self.weights.shape} does not match featurization "
                f"dimension {self.featurizer.dimension}"
            )

    def linear_scores(self, encoded: np.ndarray) -> np.ndarray:
        """Per-record w . phi(x); exact (correctly rounded) sums row by row."""
        return np.array([math.fsum(row * self.weights) for row in encoded], dtype=float)

    def compare(self, rec_i: CohortRecord, rec_j: CohortRecord) -> ComparisonScore:
        s_i, s_j = self.linear_scores(self.featurizer.transform([rec_i, rec_j]))
        return ComparisonScore(float(pair_probability(s_i - s_j)))

    def score_pairs(
        self,
        pairs: Sequence[Tuple[CohortRecord, CohortRecord]],
        policy: str = "shuffle",
        seeds: Optional[Sequence[int]] = None,
    ) -> List[Optional[float]]:
        # subject order never reaches a prompt here, so policy and seeds are unused
        if not pairs:
            return []
        unique: Dict[str, CohortRecord] = {}
        for a, b in pairs:
            unique.setdefault(a.id, a)
            unique.setdefault(b.id, b)
        order = {rid: k for k, rid in enumerate(unique)}
        scores = self.linear_scores(self.featurizer.transform(list(unique.values())))
        z = np.array([scores[order[a.id]] - scores[order[b.id]] for a, b in pairs])
        return [float(p) for p in pair_probability(z)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": RANKER_FORMAT,
            "featurization": self.featurizer.to_dict(),
            "feature_names": self.featurizer.feature_names,
            "weights": [float(w) for w in self.weights],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RankerModel":
        if data.get("format") != RANKER_FORMAT:
            raise ArgumentError(f"Not a ranker model file (format={data.get('format')!r})")
        return cls(
            featurizer=Featurizer.from_dict(data["featurization"]),
            weights=np.array(data["weights"], dtype=float),
            metadata=dict(data.get("metadata", {})),
        )


def compare(model: RankerModel, rec_i: CohortRecord, rec_j: CohortRecord) -> ComparisonScore:
    return model.compare(rec_i, rec_j)


def rank_loss_and_gradient(weights: np.ndarray, diffs: np.ndarray) -> Tuple[float, np.ndarray]:
    """Summed -log p over rows of ``diffs`` (phi_i - phi_j) and its gradient.

    Probabilities are clamped at 1e-12; the clamped region has zero gradient.
    """
    p = pair_probability(diffs @ weights)
    clamped = p < EPSILON
    loss = float(-np.log(np.maximum(p, EPSILON)).sum())
    coef = np.where(clamped, 0.0, -(1.0 - p))
    return loss, diffs.T @ coef


def _pair_differences(model_or_featurizer: Featurizer, pairs: PairSet, cohort: Cohort) -> np.ndarray:
    ids = sorted({i for pair in pairs for i in pair})
    index = {rid: k for k, rid in enumerate(ids)}
    encoded = model_or_featurizer.transform([cohort.by_id(rid) for rid in ids])
    first = encoded[[index[a] for a, _ in pairs]]
    second = encoded[[index[b] for _, b in pairs]]
    return first - second


def rank_loss(model: RankerModel, pair_batch: PairSet, cohort: Optional[Cohort] = None) -> float:
    """-sum log p(i, j) over the batch (records resolved via ``cohort``)."""
    if len(pair_batch) == 0:
        raise ArgumentError("rank_loss needs a non-empty batch")
    source = cohort if cohort is not None else pair_batch.source_cohort
    if source is None:
        raise ArgumentError("rank_loss needs a cohort to resolve pair ids")
    diffs = _pair_differences(model.featurizer, pair_batch, source)
    loss, _ = rank_loss_and_gradient(model.weights, diffs)
    return loss


def train_ranker(
    pairs: PairSet,
    cohort: Cohort,
    config: TrainConfig = TrainConfig(),
    standardize: bool = True,
) -> RankerModel:
    """Fit the ranker by mini-batch gradient descent from zero weights.

    Each step moves along the batch-mean gradient; batch order is a seeded
    permutation per epoch. The per-epoch mean loss is kept in
    ``metadata["loss_trace"]``.
    """
    if len(pairs) == 0:
        raise ArgumentError("train_ranker needs at least one pair")
    unknown = {i for pair in pairs for i in pair if i not in cohort}
    if unknown:
        raise ArgumentError(f"Pairs reference ids missing from the cohort: {sorted(unknown)[:5]}")

    featurizer = Featurizer.fit(cohort, standardize=standardize)
    if featurizer.is_degenerate(featurizer.transform(list(cohort.records))):
        raise DegenerateFeaturizationError("Every encoded feature is constant over the training cohort")

    diffs = _pair_differences(featurizer, pairs, cohort)
    weights = np.zeros(featurizer.dimension, dtype=float)
    rng = np.random.default_rng(config.seed)
    n = diffs.shape[0]
    loss_trace: List[float] = []

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = diffs[order[start:start + config.batch_size]]
            _, grad = rank_loss_and_gradient(weights, batch)
            weights -= config.learning_rate * grad / batch.shape[0]
        epoch_loss, _ = rank_loss_and_gradient(weights, diffs)
        loss_trace.append(epoch_loss / n)
        logger.debug(f"Epoch {epoch + 1}/{config.epochs}: mean rank loss {epoch_loss / n:.6f}")

    if loss_trace:
        logger.info(f"Trained ranker on {n} pairs: final mean loss {loss_trace[-1]:.4f}")

    return RankerModel(
        featurizer=featurizer,
        weights=weights,
        metadata={
            "loss_trace": loss_trace,
            "n_pairs": n,
            "epochs": config.epochs,
            "learning_rate": config.learning_rate,
            "batch_size": config.batch_size,
            "seed": config.seed,
        },
    )
