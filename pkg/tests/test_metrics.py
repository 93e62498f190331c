"""Tests for discrimination metrics, bootstrap, Kaplan-Meier and equivalence."""

from functools import partial

import numpy as np
import pytest
from scipy.integrate import trapezoid

from survrank.errors import ArgumentError, InstabilityError, UndefinedMetricError
from survrank.services.inference import RiskTable
from survrank.services.metrics import (
    SurvivalOutcomes,
    auc_at_horizon,
    bootstrap_arrays,
    bootstrap_ci,
    c_index,
    concordance,
    evaluate,
    horizon_auc,
    kde,
    km_arrays,
    km_curve,
    logrank_test,
    overall_auc,
    paired_difference_analysis,
    stratify_by_median,
)
from survrank.services.synth import SynthConfig, generate_ph_cohort


def outcomes(times, events, prefix="s"):
    ids = tuple(f"{prefix}{k}" for k in range(len(times)))
    return SurvivalOutcomes(ids=ids, times=np.asarray(times, dtype=float), events=np.asarray(events))


def table(out, risks):
    return RiskTable.from_scores(dict(zip(out.ids, risks)))


def brute_force_c(risk, time, event):
    num = den = 0.0
    for i in range(len(time)):
        for j in range(len(time)):
            if event[i] == 1 and time[i] < time[j]:
                den += 1
                num += 1.0 if risk[i] > risk[j] else 0.5 if risk[i] == risk[j] else 0.0
    return num / den


# -- C-index ------------------------------------------------------------------


def test_c_index_example():
    out = outcomes([1, 2, 3], [1, 1, 0])
    assert c_index(table(out, [0.9, 0.7, 0.8]), out) == pytest.approx(2 / 3, abs=1e-4)


def test_c_index_perfect_and_reversed():
    out = outcomes([1, 2, 3, 4], [1, 1, 1, 0])
    assert c_index(table(out, [4, 3, 2, 1]), out) == 1.0
    assert c_index(table(out, [1, 2, 3, 4]), out) == 0.0
    assert c_index(table(out, [1, 1, 1, 1]), out) == 0.5


def test_c_index_undefined():
    with pytest.raises(UndefinedMetricError):
        concordance(np.array([0.1, 0.2]), np.array([1.0, 2.0]), np.array([0, 0]))
    with pytest.raises(UndefinedMetricError):
        concordance(np.array([0.1, 0.2]), np.array([2.0, 2.0]), np.array([1, 1]))


def test_concordance_matches_brute_force(rng):
    time = rng.integers(1, 15, size=60).astype(float)
    event = (rng.random(60) < 0.6).astype(int)
    risk = np.round(rng.normal(size=60), 1)
    assert concordance(risk, time, event) == pytest.approx(brute_force_c(risk, time, event), abs=1e-12)


def test_concordance_invariant_to_monotone_transform(rng):
    time = rng.exponential(5, size=50)
    event = (rng.random(50) < 0.5).astype(int)
    risk = rng.normal(size=50)
    assert concordance(np.exp(3 * risk) + 2, time, event) == concordance(risk, time, event)


def test_risk_table_must_match_outcomes():
    out = outcomes([1, 2, 3], [1, 1, 0])
    with pytest.raises(ArgumentError):
        c_index(RiskTable.from_scores({"s0": 0.1, "s1": 0.2}), out)


# -- AUC ----------------------------------------------------------------------


def test_horizon_auc_example():
    out = outcomes([3, 7, 4], [1, 1, 0])
    assert horizon_auc(table(out, [0.9, 0.1, 0.5]), out, 5) == 1.0
    # subject censored before the horizon is excluded from both groups
    assert horizon_auc(table(out, [0.1, 0.9, 0.5]), out, 5) == 0.0


def test_horizon_auc_ties_and_boundaries():
    out = outcomes([5, 5, 8], [1, 0, 0])
    # t == h with an event is positive; t == h censored is negative
    assert horizon_auc(table(out, [0.7, 0.2, 0.2]), out, 5) == 1.0
    assert horizon_auc(table(out, [0.5, 0.5, 0.5]), out, 5) == 0.5


def test_horizon_auc_undefined():
    out = outcomes([6, 7, 8], [1, 1, 0])
    with pytest.raises(UndefinedMetricError):
        horizon_auc(table(out, [0.1, 0.2, 0.3]), out, 5)
    with pytest.raises(ArgumentError):
        horizon_auc(table(out, [0.1, 0.2, 0.3]), out, 0)


def test_overall_auc():
    out = outcomes([1, 2, 3, 4], [1, 0, 1, 0])
    assert overall_auc(table(out, [0.9, 0.1, 0.8, 0.3]), out) == 1.0
    with pytest.raises(UndefinedMetricError):
        overall_auc(table(out, [0.1] * 4), outcomes([1, 2, 3, 4], [1, 1, 1, 1]))


def test_auc_matches_pairwise_count(rng):
    time = rng.exponential(5, size=80)
    event = (rng.random(80) < 0.6).astype(int)
    risk = np.round(rng.normal(size=80), 1)
    positive = (event == 1) & (time <= 4)
    negative = time > 4
    pos, neg = risk[positive], risk[negative]
    expected = ((pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()) / (
        pos.size * neg.size
    )
    assert auc_at_horizon(risk, time, event, 4) == pytest.approx(expected, abs=1e-12)


# -- bootstrap ----------------------------------------------------------------


def random_outcomes(rng, n=80):
    out = outcomes(rng.exponential(5, size=n), (rng.random(n) < 0.6).astype(int))
    return out, table(out, rng.normal(size=n))


def test_bootstrap_is_seeded(rng):
    out, risks = random_outcomes(rng)
    first = bootstrap_ci(concordance, risks, out, b=100, seed=4)
    again = bootstrap_ci(concordance, risks, out, b=100, seed=4)
    threaded = bootstrap_ci(concordance, risks, out, b=100, seed=4, jobs=3)
    other = bootstrap_ci(concordance, risks, out, b=100, seed=5)

    assert first == again == threaded
    assert (first.lower, first.upper) != (other.lower, other.upper)
    lower, upper, point = first
    assert lower <= point <= upper
    assert point == c_index(risks, out)


def test_bootstrap_constant_risk(rng):
    out = outcomes(np.arange(1, 51, dtype=float), np.ones(50, dtype=int))
    lower, upper, point = bootstrap_ci(concordance, table(out, [0.3] * 50), out, b=50, seed=1)
    assert lower == upper == point == 0.5


def test_bootstrap_horizon_kernel(rng):
    out, risks = random_outcomes(rng, n=120)
    result = bootstrap_ci(partial(auc_at_horizon, horizon=3.0), risks, out, b=50)
    assert 0.0 <= result.lower <= result.upper <= 1.0


def test_bootstrap_instability():
    # one comparable pair: a resample is defined only when it draws both members (p ~ 0.4)
    event = np.zeros(20, dtype=int)
    event[18] = 1
    out = outcomes(np.arange(1, 21, dtype=float), event)
    with pytest.raises(InstabilityError):
        bootstrap_ci(concordance, table(out, np.linspace(1, 0, 20)), out, b=400)


def test_bootstrap_rejects_zero_resamples(rng):
    out, risks = random_outcomes(rng)
    with pytest.raises(ArgumentError):
        bootstrap_ci(concordance, risks, out, b=0)


def test_evaluate_reports_undefined_metrics(rng):
    out, risks = random_outcomes(rng, n=60)
    reports = evaluate(risks, out, horizons=[2.0, 1e6], b=50, seed=0)

    assert [(r.metric, r.horizon) for r in reports] == [
        ("c_index", None),
        ("auc", None),
        ("auc", 2.0),
        ("auc", 1e6),
    ]
    assert reports[0].point == pytest.approx(c_index(risks, out))
    assert reports[-1].error is not None and reports[-1].point is None
    assert "error" not in reports[0].to_dict()


def _population_c(config, draws=10):
    values = []
    for k in range(draws):
        cohort, truth = generate_ph_cohort(SynthConfig(**{**config, "n": 2000, "seed": 10_000 + k}))
        values.append(concordance(np.array([truth[i] for i in cohort.ids]), cohort.times(), cohort.events()))
    return float(np.mean(values))


@pytest.mark.slow
def test_bootstrap_coverage():
    config = dict(beta=(1.0, -0.5), baseline_rate=0.1, censor_rate=0.15)
    target = _population_c(config)

    covered = 0
    replications = 200
    for rep in range(replications):
        cohort, truth = generate_ph_cohort(SynthConfig(**config, n=500, seed=rep))
        risk = np.array([truth[i] for i in cohort.ids])
        result = bootstrap_arrays(concordance, risk, cohort.times(), cohort.events(), b=200, seed=rep)
        covered += result.lower <= target <= result.upper

    assert 0.90 <= covered / replications <= 0.98


# -- Kaplan-Meier and stratification ------------------------------------------


def test_km_example():
    curve = km_arrays(np.array([1, 2, 3, 4, 5.0]), np.array([1, 0, 1, 0, 0]))
    assert km_curve(outcomes([1, 2, 3, 4, 5], [1, 0, 1, 0, 0])).survival.tolist() == curve.survival.tolist()
    assert curve.times.tolist() == [0.0, 1.0, 3.0]
    assert curve.survival_at(1) == pytest.approx(0.8)
    assert curve.survival_at(2) == pytest.approx(0.8)
    assert curve.survival_at(3) == pytest.approx(0.5333, abs=1e-4)
    assert curve.survival_at(0.5) == 1.0
    assert curve.at_risk.tolist() == [5, 5, 3]


def test_km_without_events():
    curve = km_arrays(np.array([1.0, 2.0]), np.array([0, 0]))
    assert curve.times.tolist() == [0.0]
    assert curve.survival_at(100) == 1.0


def test_km_reaches_zero():
    curve = km_arrays(np.array([1.0, 2.0]), np.array([1, 1]))
    assert curve.survival.tolist() == [1.0, 0.5, 0.0]
    assert np.all(np.diff(curve.survival) <= 0)


def test_km_needs_subjects():
    with pytest.raises(ArgumentError):
        km_arrays(np.array([]), np.array([]))


def test_stratify_by_training_median():
    train = RiskTable.from_scores({"a": 0.2, "b": 0.4, "c": 0.6})
    test = RiskTable.from_scores({"x": 0.5, "y": 0.4})

    groups = stratify_by_median(train, test)

    assert groups.threshold == pytest.approx(0.4)
    assert groups.assignment == {"x": "high", "y": "low"}
    assert groups.indicator(["y", "x"]).tolist() == [0, 1]
    assert stratify_by_median(RiskTable.from_scores({"a": 0.2, "b": 0.4, "c": 0.6, "d": 0.8}), test).threshold == (
        pytest.approx(0.5)
    )


def test_logrank_separated_groups():
    time = np.concatenate([np.arange(1, 31), np.arange(31, 61)]).astype(float)
    event = np.ones(60, dtype=int)
    group = np.array([1] * 30 + [0] * 30)
    result = logrank_test(group, time, event)
    assert result.p_value < 1e-3


def test_logrank_interleaved_groups():
    time = np.arange(1, 61, dtype=float)
    event = np.ones(60, dtype=int)
    group = np.arange(60) % 2
    assert logrank_test(group, time, event).p_value > 0.5
    with pytest.raises(ArgumentError):
        logrank_test(np.zeros(60), time, event)


# -- KDE and equivalence ------------------------------------------------------


def test_kde_integrates_to_one(rng):
    grid = np.linspace(-10, 10, 4001)
    density = kde(rng.normal(size=200), grid)
    assert trapezoid(density, grid) == pytest.approx(1.0, abs=0.01)


def test_kde_single_sample_peaks_at_it():
    grid = np.array([0.1, 0.2, 0.3, 0.4])
    assert grid[np.argmax(kde([0.3], grid))] == 0.3


def test_kde_symmetric_samples():
    grid = np.linspace(-3, 3, 61)
    density = kde([-1.0, 1.0], grid)
    assert density == pytest.approx(density[::-1])


def test_paired_difference_against_itself(rng):
    out, risks = random_outcomes(rng)
    report = paired_difference_analysis(risks, risks, out, b=100, delta=0.01)

    assert report.mean_difference == 0.0
    assert (report.ci_lower, report.ci_upper) == (0.0, 0.0)
    assert report.verdict == "within"
    assert len(report.grid) == len(report.density) == 201
    assert report.to_dict()["verdict"] == "within"


def test_paired_difference_detects_worse_ranking(rng):
    n = 150
    out = outcomes(rng.exponential(5, size=n), (rng.random(n) < 0.7).astype(int))
    good = table(out, -out.times)
    noise = table(out, rng.normal(size=n))

    report = paired_difference_analysis(good, noise, out, b=100, delta=0.01)

    assert report.ci_lower > 0.01
    assert report.verdict == "outside"


def test_paired_difference_validation(rng):
    out, risks = random_outcomes(rng)
    other = RiskTable.from_scores({i: 0.0 for i in out.ids[:-1]})
    with pytest.raises(ArgumentError):
        paired_difference_analysis(risks, other, out)
    with pytest.raises(ArgumentError):
        paired_difference_analysis(risks, risks, out, delta=0)
