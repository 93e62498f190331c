"""Tests for the synthetic proportional-hazards generator."""

import numpy as np
import pytest

from survrank.errors import ArgumentError
from survrank.services.cohort import parse_cohort
from survrank.services.metrics import concordance
from survrank.services.synth import (
    SYNTH_SCHEMA,
    FeatureSpec,
    SynthConfig,
    generate_ph_cohort,
    read_truth,
    write_synth,
)


def test_shape_and_ids():
    cohort, truth = generate_ph_cohort(SynthConfig(n=12, seed=1))
    assert len(cohort) == 12
    assert cohort.ids[0] == "s00" and cohort.ids[-1] == "s11"
    assert cohort.ids == sorted(cohort.ids)
    assert cohort.schema == ("x1", "x2")
    assert set(truth) == set(cohort.ids)
    assert np.all(cohort.times() > 0)


def test_seeded():
    a, truth_a = generate_ph_cohort(SynthConfig(n=50, seed=3))
    b, truth_b = generate_ph_cohort(SynthConfig(n=50, seed=3))
    c, _ = generate_ph_cohort(SynthConfig(n=50, seed=4))
    assert a.records == b.records and truth_a == truth_b
    assert a.records != c.records


def test_equal_rates_give_half_events():
    cohort, _ = generate_ph_cohort(SynthConfig(n=10_000, beta=(0.0,), baseline_rate=0.1, censor_rate=0.1, seed=2))
    assert cohort.events().mean() == pytest.approx(0.5, abs=0.03)


def test_heavy_censoring_gives_few_events():
    cohort, _ = generate_ph_cohort(SynthConfig(n=2000, beta=(0.5,), baseline_rate=1e-6, censor_rate=1.0, seed=2))
    assert cohort.events().mean() < 0.01


def test_null_effect_has_constant_truth():
    cohort, truth = generate_ph_cohort(SynthConfig(n=200, beta=(0.0, 0.0), seed=5))
    risk = np.array([truth[i] for i in cohort.ids])
    assert np.all(risk == 0.0)
    assert concordance(risk, cohort.times(), cohort.events()) == 0.5


def test_true_predictor_beats_permutation(rng):
    cohort, truth = generate_ph_cohort(SynthConfig(n=1000, seed=6))
    risk = np.array([truth[i] for i in cohort.ids])
    times, events = cohort.times(), cohort.events()
    assert concordance(risk, times, events) > concordance(rng.permutation(risk), times, events)


def test_bernoulli_features_are_bool():
    config = SynthConfig(n=100, beta=(0.3, 1.0), features=(FeatureSpec.parse("normal"), FeatureSpec.parse("bernoulli:0.3")), seed=7)
    cohort, truth = generate_ph_cohort(config)
    values = [r.features["x2"] for r in cohort]
    assert all(isinstance(v, bool) for v in values)
    record = cohort.records[0]
    assert truth[record.id] == pytest.approx(0.3 * record.features["x1"] + 1.0 * float(record.features["x2"]))
    assert config.to_dict()["features"] == ["normal", "bernoulli:0.3"]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n=1),
        dict(baseline_rate=0.0),
        dict(censor_rate=-1.0),
        dict(beta=()),
        dict(beta=(1.0,), features=(FeatureSpec(), FeatureSpec())),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ArgumentError):
        SynthConfig(**kwargs)


def test_feature_spec_validation():
    with pytest.raises(ArgumentError):
        FeatureSpec.parse("poisson")
    with pytest.raises(ArgumentError):
        FeatureSpec.parse("bernoulli:1.5")
    with pytest.raises(ArgumentError):
        FeatureSpec.parse("bernoulli:often")


def test_write_synth_round_trip(tmp_path):
    config = SynthConfig(n=40, seed=8)
    paths = write_synth(config, tmp_path)

    cohort = parse_cohort(paths["cohort"], SYNTH_SCHEMA)
    truth = read_truth(paths["truth"], cohort.ids)
    expected, expected_truth = generate_ph_cohort(config)

    assert cohort.ids == expected.ids
    assert cohort.events().tolist() == expected.events().tolist()
    assert cohort.times() == pytest.approx(expected.times(), rel=1e-9)
    assert [truth[i] for i in cohort.ids] == pytest.approx([expected_truth[i] for i in cohort.ids], rel=1e-9)
