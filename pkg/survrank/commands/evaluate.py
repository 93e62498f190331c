"""Eval command - C-index, AUCs and optional paired equivalence analysis."""

import time
from pathlib import Path
from typing import Optional

import typer

from survrank.commands.common import (
    ConfigOption,
    SchemaOption,
    emit,
    handle_errors,
    load_cohort_file,
    load_risk_table,
    load_schema,
    parse_floats,
    resolve_config,
)
from survrank.display.components import (
    format_duration,
    print_header,
    print_key_value,
    print_metric_table,
    print_section,
    print_success,
    print_warning,
)
from survrank.errors import ArgumentError
from survrank.services.artifacts import write_csv, write_json, write_manifest
from survrank.services.inference import RiskTable
from survrank.services.metrics import SurvivalOutcomes, evaluate, paired_difference_analysis


@handle_errors
def evaluate_command(
    risks: Path = typer.Argument(..., help="Risk CSV to evaluate."),
    test: Path = typer.Argument(..., help="Cohort CSV holding the outcomes."),
    schema: Optional[Path] = SchemaOption,
    horizons: Optional[str] = typer.Option(None, "--horizons", help="Comma-separated AUC horizons."),
    bootstrap: Optional[int] = typer.Option(None, "--bootstrap", "-b", help="Bootstrap resamples (1000)."),
    against: Optional[Path] = typer.Option(None, "--against", help="Second risk CSV for a paired C-index comparison."),
    delta: Optional[float] = typer.Option(None, "--delta", help="Equivalence bound (0.01)."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    jobs: Optional[int] = typer.Option(None, "--jobs", "-j", help="Threads for bootstrap resamples."),
    svg: bool = typer.Option(False, "--svg", help="Also render the difference density as SVG."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory."),
    config: Optional[Path] = ConfigOption,
):
    """Evaluate risk scores against observed outcomes."""
    cfg = resolve_config(
        config,
        test=str(test),
        schema=str(schema) if schema else None,
        horizons=parse_floats(horizons, "--horizons"),
        bootstrap=bootstrap,
        delta=delta,
        seed=seed,
        jobs=jobs,
        out=str(out) if out else None,
    )
    if cfg.out is None:
        raise ArgumentError("--out is required")
    out_dir = Path(cfg.out)

    table = load_risk_table(risks)
    cohort = load_cohort_file(cfg.test, load_schema(cfg.schema))
    outcomes = SurvivalOutcomes.from_cohort(cohort)
    unscored = len(outcomes) - len(table)
    if unscored > 0:
        print_warning(f"{unscored} subjects have no risk score and are left out")
    outcomes = outcomes.restrict(table.ids)

    started = time.perf_counter()
    reports = evaluate(table, outcomes, cfg.horizons, b=cfg.bootstrap, seed=cfg.seed, jobs=cfg.jobs)
    outputs = {"metrics": str(write_json(out_dir / "metrics.json", [r.to_dict() for r in reports]))}
    summary = {"command": "eval", "metrics": [r.to_dict() for r in reports]}

    equivalence = None
    if against is not None:
        other = load_risk_table(against)
        shared = [i for i in table.ids if i in other]
        equivalence = paired_difference_analysis(
            RiskTable(entries={i: table[i] for i in shared}),
            RiskTable(entries={i: other[i] for i in shared}),
            outcomes.restrict(shared),
            b=cfg.bootstrap,
            delta=cfg.delta,
            seed=cfg.seed,
            jobs=cfg.jobs,
        )
        outputs["equivalence"] = str(write_json(out_dir / "equivalence.json", equivalence.to_dict()))
        outputs["kde"] = str(write_csv(out_dir / "kde.csv", equivalence.kde_frame()))
        if svg:
            from survrank.services.plotting import plot_kde

            outputs["kde_svg"] = str(plot_kde(equivalence, out_dir / "kde.svg"))
        summary["equivalence"] = equivalence.to_dict()

    summary["outputs"] = outputs
    write_manifest(out_dir, "eval", cfg.to_dict(), seeds={"seed": cfg.seed}, outputs=outputs)

    print_header("eval")
    print_metric_table(reports)
    if equivalence is not None:
        print_section("Paired C-index difference")
        print_key_value("mean", f"{equivalence.mean_difference:+.4f}")
        print_key_value("95% CI", f"[{equivalence.ci_lower:+.4f}, {equivalence.ci_upper:+.4f}]")
        print_key_value("verdict", f"{equivalence.verdict} ±{equivalence.delta:g}")
    print_success(f"Evaluated in {format_duration(time.perf_counter() - started)}")
    emit(summary)
