"""Synthetic proportional-hazards cohorts with known ground truth.

Event times are exponential with rate ``baseline_rate * exp(beta . x)``,
censoring times exponential with ``censor_rate``; the observed time is the
minimum and the event flag says which came first.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from survrank.errors import ArgumentError
from survrank.services.artifacts import write_cohort, write_csv, write_json
from survrank.services.cohort import Cohort, CohortRecord, SchemaConfig

logger = logging.getLogger(__name__)

MIN_TIME = 1e-12


@dataclass(frozen=True)
class FeatureSpec:
    """``normal`` (standard normal) or ``bernoulli`` with success probability ``q``."""

    kind: str = "normal"
    q: float = 0.5

    def __post_init__(self):
        if self.kind not in ("normal", "bernoulli"):
            raise ArgumentError(f"Unknown feature distribution: {self.kind}")
        if self.kind == "bernoulli" and not 0.0 < self.q < 1.0:
            raise ArgumentError(f"Bernoulli q must lie in (0, 1), got {self.q}")

    @classmethod
    def parse(cls, text: str) -> "FeatureSpec":
        """``normal``, ``bernoulli`` or ``bernoulli:0.3``."""
        kind, _, q = text.strip().lower().partition(":")
        if q:
            try:
                return cls(kind=kind, q=float(q))
            except ValueError:
                raise ArgumentError(f"Bad feature spec: {text!r}") from None
        return cls(kind=kind)

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "normal":
            return rng.standard_normal(n)
        return (rng.random(n) < self.q).astype(float)

    def __str__(self) -> str:
        return self.kind if self.kind == "normal" else f"bernoulli:{self.q:g}"


@dataclass(frozen=True)
class SynthConfig:
    n: int = 2000
    beta: Tuple[float, ...] = (1.0, -0.5)
    baseline_rate: float = 0.1
    censor_rate: float = 0.1
    features: Tuple[FeatureSpec, ...] = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ArgumentError(f"n must be >= 2, got {self.n}")
        if self.baseline_rate <= 0 or self.censor_rate <= 0:
            raise ArgumentError("baseline_rate and censor_rate must be positive")
        if not self.beta:
            raise ArgumentError("beta needs at least one coefficient")
        if self.features and len(self.features) != len(self.beta):
            raise ArgumentError(
                f"{len(self.features)} feature specs for {len(self.beta)} coefficients"
            )

    @property
    def feature_specs(self) -> Tuple[FeatureSpec, ...]:
        return self.features or tuple(FeatureSpec() for _ in self.beta)

    @property
    def feature_names(self) -> Tuple[str, ...]:
        return tuple(f"x{k + 1}" for k in range(len(self.beta)))

    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "beta": list(self.beta),
            "baseline_rate": self.baseline_rate,
            "censor_rate": self.censor_rate,
            "features": [str(f) for f in self.feature_specs],
            "seed": self.seed,
        }


SYNTH_SCHEMA = SchemaConfig(id="id", time="time", event="event")


def _subject_id(k: int, n: int) -> str:
    # zero padding keeps lexicographic order equal to generation order
    return f"s{k:0{len(str(n - 1))}d}"


def generate_ph_cohort(config: SynthConfig) -> Tuple[Cohort, Dict[str, float]]:
    """Draw a cohort and the true linear predictor beta . x per subject id."""
    rng = np.random.default_rng(config.seed)
    specs = config.feature_specs
    X = np.column_stack([spec.draw(rng, config.n) for spec in specs])
    linear_predictor = X @ np.asarray(config.beta, dtype=float)

    event_time = rng.exponential(1.0 / (config.baseline_rate * np.exp(linear_predictor)))
    censor_time = rng.exponential(1.0 / config.censor_rate, size=config.n)
    observed = np.maximum(np.minimum(event_time, censor_time), MIN_TIME)
    event = (event_time <= censor_time).astype(int)

    names = config.feature_names
    records = []
    truth: Dict[str, float] = {}
    for k in range(config.n):
        rid = _subject_id(k, config.n)
        features = {
            name: (bool(X[k, c]) if spec.kind == "bernoulli" else float(X[k, c]))
            for c, (name, spec) in enumerate(zip(names, specs))
        }
        records.append(CohortRecord(id=rid, features=features, event=int(event[k]), time=float(observed[k])))
        truth[rid] = float(linear_predictor[k])

    cohort = Cohort(records=tuple(records), schema=names)
    logger.info(
        f"Generated {config.n} synthetic subjects, event fraction {event.mean():.3f} (seed={config.seed})"
    )
    return cohort, truth


def truth_frame(truth: Dict[str, float]) -> pd.DataFrame:
    return pd.DataFrame(list(truth.items()), columns=["id", "true_linear_predictor"])


def write_synth(config: SynthConfig, out_dir: Path) -> Dict[str, Path]:
    """Write cohort.csv, schema.json and the truth.csv sidecar into ``out_dir``."""
    cohort, truth = generate_ph_cohort(config)
    out_dir = Path(out_dir)
    paths = {
        "cohort": write_cohort(out_dir / "cohort.csv", cohort, SYNTH_SCHEMA),
        "schema": write_json(out_dir / "schema.json", SYNTH_SCHEMA.to_dict()),
        "truth": write_csv(out_dir / "truth.csv", truth_frame(truth)),
    }
    return paths


def read_truth(path: Path, ids: Optional[Sequence[str]] = None) -> Dict[str, float]:
    frame = pd.read_csv(path, dtype={"id": str})
    truth = dict(zip(frame["id"], frame["true_linear_predictor"].astype(float)))
    if ids is not None:
        missing = [i for i in ids if i not in truth]
        if missing:
            raise ArgumentError(f"Truth sidecar has no entry for ids: {missing[:5]}")
    return truth
