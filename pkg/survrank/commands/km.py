"""KM command - median risk stratification, KM curves and hazard ratio."""

from pathlib import Path
from typing import Optional

import pandas as pd
import typer

from survrank.commands.common import (
    ConfigOption,
    SchemaOption,
    emit,
    handle_errors,
    load_cohort_file,
    load_risk_table,
    load_schema,
    resolve_config,
)
from survrank.display.colors import COLORS
from survrank.display.components import console, format_count, print_header, print_key_value, print_success, print_warning
from survrank.errors import ArgumentError, ConvergenceError, RankError, SeparationError, UndefinedMetricError
from survrank.services.artifacts import write_csv, write_json, write_manifest
from survrank.services.baseline_cox import hazard_ratio
from survrank.services.metrics import SurvivalOutcomes, km_curve, logrank_test, stratify_by_median


@handle_errors
def km(
    train_risks: Path = typer.Argument(..., help="Training risk CSV (sets the median threshold)."),
    test_risks: Path = typer.Argument(..., help="Test risk CSV."),
    test: Path = typer.Argument(..., help="Test cohort CSV."),
    schema: Optional[Path] = SchemaOption,
    svg: bool = typer.Option(False, "--svg", help="Also render the curves as SVG."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory."),
    config: Optional[Path] = ConfigOption,
):
    """Kaplan-Meier curves for high- and low-risk groups."""
    cfg = resolve_config(config, test=str(test), schema=str(schema) if schema else None, out=str(out) if out else None)
    if cfg.out is None:
        raise ArgumentError("--out is required")
    out_dir = Path(cfg.out)

    train_table = load_risk_table(train_risks)
    test_table = load_risk_table(test_risks)
    outcomes = SurvivalOutcomes.from_cohort(load_cohort_file(cfg.test, load_schema(cfg.schema))).restrict(test_table.ids)

    groups = stratify_by_median(train_table, test_table)
    curves = {}
    frames = []
    for label in ("high", "low"):
        ids = groups.ids_in(label)
        if not ids:
            print_warning(f"No subjects in the {label}-risk group")
            continue
        curves[label] = km_curve(outcomes.restrict(ids))
        frames.append(curves[label].to_frame().assign(group=label))

    km_frame = pd.concat(frames, ignore_index=True)[["group", "time", "survival", "at_risk", "events"]]
    outputs = {"km": str(write_csv(out_dir / "km.csv", km_frame))}

    summary = {
        "command": "km",
        "threshold": groups.threshold,
        "n_high": len(groups.ids_in("high")),
        "n_low": len(groups.ids_in("low")),
    }
    indicator = groups.indicator(outcomes.ids)
    try:
        summary["hazard_ratio"] = hazard_ratio(groups, outcomes).to_dict()
    except (SeparationError, RankError, ConvergenceError, ArgumentError) as e:
        print_warning(e.message)
        summary["hazard_ratio"] = {"error": e.to_dict()}
    try:
        lr = logrank_test(indicator, outcomes.times, outcomes.events)
        summary["logrank"] = {"statistic": lr.statistic, "p_value": lr.p_value}
    except (ArgumentError, UndefinedMetricError) as e:
        summary["logrank"] = {"error": e.to_dict()}

    outputs["summary"] = str(write_json(out_dir / "km.json", summary))
    if svg and curves:
        from survrank.services.plotting import plot_km

        outputs["svg"] = str(plot_km(curves, out_dir / "km.svg"))
    summary["outputs"] = outputs
    write_manifest(out_dir, "km", cfg.to_dict(), outputs=outputs)

    print_header("km")
    print_key_value("threshold", f"{groups.threshold:.4f}")
    console.print(f"  [{COLORS['high']}]high[/] {format_count(summary['n_high'])}   [{COLORS['low']}]low[/] {format_count(summary['n_low'])}")
    hr = summary["hazard_ratio"]
    if "hr" in hr:
        print_key_value("hazard ratio", f"{hr['hr']:.2f} ({hr['ci_lower']:.2f}, {hr['ci_upper']:.2f}), p={hr['p_value']:.2g}")
    print_success(f"Wrote curves to {out_dir}")
    emit(summary)
