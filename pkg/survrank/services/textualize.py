"""Natural-language rendering of records and pairwise comparison prompts.

Each feature becomes a ``"{column} is {value}"`` statement; statements are
joined with ``"; "``. Prompts come from UTF-8 template files holding the
placeholders ``{INSTANCE_A}`` and ``{INSTANCE_B}`` exactly once each.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from survrank.config.settings import TEMPLATES_DIR
from survrank.errors import ArgumentError
from survrank.services.cohort import CohortRecord, FeatureValue, format_number

OrderPolicy = Literal["shuffle", "fix_first"]

PLACEHOLDER_A = "{INSTANCE_A}"
PLACEHOLDER_B = "{INSTANCE_B}"
SEPARATOR = "; "


def render_value(value: FeatureValue) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (int, float)):
        return format_number(float(value))
    return str(value)


def serialize_record(record: CohortRecord, columns: Optional[Sequence[str]] = None) -> str:
    """Render ``record`` as "col is value" statements in ``columns`` order."""
    if columns is None:
        columns = list(record.features.keys())
    unknown = [c for c in columns if c not in record.features]
    if unknown:
        raise ArgumentError(f"Unknown column(s) for record {record.id!r}: {', '.join(unknown)}")
    return SEPARATOR.join(f"{c} is {render_value(record.features[c])}" for c in columns)


@dataclass(frozen=True)
class PromptTemplate:
    """A comparison prompt with two instance slots.

    ``body`` is the template text; the other fields are views of it: the
    preamble (role and terminology), the question paragraph introducing the
    instances, and the answer instruction after them.
    """

    body: str
    name: str = "custom"
    instance_labels: Tuple[str, str] = ("a", "b")

    def __post_init__(self):
        if self.body.count(PLACEHOLDER_A) != 1 or self.body.count(PLACEHOLDER_B) != 1:
            raise ArgumentError(
                f"Template {self.name!r} must contain {PLACEHOLDER_A} and {PLACEHOLDER_B} exactly once"
            )
        if self.body.index(PLACEHOLDER_A) > self.body.index(PLACEHOLDER_B):
            raise ArgumentError(f"Template {self.name!r} must place {PLACEHOLDER_A} before {PLACEHOLDER_B}")
        if len(self.instance_labels) != 2 or self.instance_labels[0] == self.instance_labels[1]:
            raise ArgumentError("Template needs two distinct instance labels")

    @property
    def _head(self) -> str:
        head = self.body[: self.body.index(PLACEHOLDER_A)]
        # drop the partial line carrying the "a. " label
        return head[: head.rfind("\n") + 1] if "\n" in head else ""

    @property
    def preamble(self) -> str:
        paragraphs = [p for p in self._head.strip().split("\n\n") if p.strip()]
        return "\n\n".join(paragraphs[:-1])

    @property
    def question(self) -> str:
        paragraphs = [p for p in self._head.strip().split("\n\n") if p.strip()]
        return paragraphs[-1] if paragraphs else ""

    @property
    def answer_instruction(self) -> str:
        tail = self.body[self.body.index(PLACEHOLDER_B) + len(PLACEHOLDER_B):]
        return tail.strip()

    def render(self, instance_a: str, instance_b: str) -> str:
        return self.body.replace(PLACEHOLDER_A, instance_a).replace(PLACEHOLDER_B, instance_b)


def load_template(source: Union[str, Path]) -> PromptTemplate:
    """Load a shipped template by name ("icu", "fracture") or a template file."""
    path = Path(source)
    if not path.exists():
        shipped = TEMPLATES_DIR / f"{source}.txt"
        if not shipped.exists():
            raise ArgumentError(f"Template not found: {source}")
        path = shipped
    return PromptTemplate(body=path.read_text(encoding="utf-8"), name=path.stem)


@dataclass(frozen=True)
class PairPrompt:
    """A rendered prompt plus the label -> record id mapping needed to decode answers."""

    text: str
    mapping: Dict[str, str]
    order_policy: OrderPolicy
    first_id: str

    def record_for(self, label: str) -> str:
        try:
            return self.mapping[label]
        except KeyError:
            raise ArgumentError(f"Unknown label {label!r}") from None

    def label_of(self, record_id: str) -> str:
        for label, rid in self.mapping.items():
            if rid == record_id:
                return label
        raise ArgumentError(f"Record {record_id!r} is not part of this prompt")


def build_pair_prompt(
    template: PromptTemplate,
    rec_i: CohortRecord,
    rec_j: CohortRecord,
    policy: OrderPolicy = "shuffle",
    seed: int = 0,
    columns: Optional[Sequence[str]] = None,
) -> PairPrompt:
    """Render a prompt comparing ``rec_i`` (subject) with ``rec_j`` (anchor).

    ``fix_first`` always puts ``rec_j`` under the first label; ``shuffle``
    flips a seeded fair coin.
    """
    if rec_i.id == rec_j.id:
        raise ArgumentError(f"Cannot compare record {rec_i.id!r} with itself")
    if policy == "fix_first":
        i_first = False
    elif policy == "shuffle":
        i_first = bool(np.random.default_rng(seed).random() < 0.5)
    else:
        raise ArgumentError(f"Unknown order policy: {policy}")

    first, second = (rec_i, rec_j) if i_first else (rec_j, rec_i)
    label_a, label_b = template.instance_labels
    text = template.render(serialize_record(first, columns), serialize_record(second, columns))
    return PairPrompt(
        text=text,
        mapping={label_a: first.id, label_b: second.id},
        order_policy=policy,
        first_id=rec_i.id,
    )
