"""Tests for record serialization and pair prompts."""

import pytest

from survrank.errors import ArgumentError
from survrank.services.cohort import MISSING, CohortRecord
from survrank.services.textualize import (
    PromptTemplate,
    build_pair_prompt,
    load_template,
    serialize_record,
)


def record(rid="r1", **features):
    return CohortRecord(id=rid, features=features, event=1, time=1.0)


def test_serialize_in_column_order():
    rec = record(age=79.0, sex="M", heart_rate=112.5)
    assert serialize_record(rec) == "age is 79; sex is M; heart_rate is 112.5"
    assert serialize_record(rec, ["sex", "age"]) == "sex is M; age is 79"


def test_serialize_bool_and_missing():
    rec = record(ventilated=True, smoker=False, bmi=MISSING)
    assert serialize_record(rec) == "ventilated is yes; smoker is no; bmi is unknown"


def test_serialize_empty_column_list():
    assert serialize_record(record(age=1.0), []) == ""


def test_serialize_unknown_column():
    with pytest.raises(ArgumentError):
        serialize_record(record(age=1.0), ["weight"])


def test_template_requires_both_placeholders_once():
    with pytest.raises(ArgumentError):
        PromptTemplate(body="only {INSTANCE_A}")
    with pytest.raises(ArgumentError):
        PromptTemplate(body="{INSTANCE_A} {INSTANCE_B} {INSTANCE_A}")


def test_shipped_templates():
    icu = load_template("icu")
    fracture = load_template("fracture")

    assert icu.question.startswith("You are a genius ICU specialist")
    assert icu.answer_instruction == "Please provide your answer (a or b)."
    assert "Previous fracture" in fracture.preamble
    assert fracture.question.startswith("You are given descriptions of two patients")


def test_missing_template():
    with pytest.raises(ArgumentError):
        load_template("no-such-template")


def test_fix_first_puts_anchor_first():
    template = load_template("icu")
    subject, anchor = record("s", code=1.0), record("n", code=2.0)

    prompt = build_pair_prompt(template, subject, anchor, policy="fix_first")

    assert prompt.mapping == {"a": "n", "b": "s"}
    assert "a. code is 2\nb. code is 1" in prompt.text
    assert prompt.first_id == "s"
    assert prompt.label_of("s") == "b"
    assert prompt.record_for("a") == "n"
    with pytest.raises(ArgumentError):
        prompt.record_for("c")


def test_shuffle_is_seeded_and_uses_both_orders():
    template = load_template("icu")
    subject, anchor = record("s", code=1.0), record("n", code=2.0)

    firsts = [build_pair_prompt(template, subject, anchor, seed=s).mapping["a"] for s in range(64)]
    again = [build_pair_prompt(template, subject, anchor, seed=s).mapping["a"] for s in range(64)]

    assert firsts == again
    assert set(firsts) == {"s", "n"}


def test_shuffle_is_fair_over_many_seeds():
    template = load_template("icu")
    subject, anchor = record("s", code=1.0), record("n", code=2.0)

    seeds = 10_000
    subject_first = sum(build_pair_prompt(template, subject, anchor, seed=s).mapping["a"] == "s" for s in range(seeds))

    assert 0.47 <= subject_first / seeds <= 0.53


def test_prompt_rejects_self_and_unknown_policy():
    template = load_template("icu")
    rec = record("s", code=1.0)
    with pytest.raises(ArgumentError):
        build_pair_prompt(template, rec, rec)
    with pytest.raises(ArgumentError):
        build_pair_prompt(template, rec, record("n", code=2.0), policy="alternate")
