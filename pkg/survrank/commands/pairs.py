"""Pairs command - comparable pairs or nested case-control samples."""

from pathlib import Path
from typing import Optional

import typer

from survrank.commands.common import (
    ConfigOption,
    SchemaOption,
    emit,
    handle_errors,
    load_cohort_file,
    load_schema,
    resolve_config,
)
from survrank.display.components import format_count, print_header, print_key_value, print_success
from survrank.errors import ArgumentError
from survrank.services.artifacts import write_csv, write_manifest
from survrank.services.pairs import SamplingConfig, comparable_pairs, sample_case_controls


@handle_errors
def pairs(
    cohort: Path = typer.Argument(..., help="Training cohort CSV."),
    schema: Optional[Path] = SchemaOption,
    n_controls: Optional[int] = typer.Option(None, "--n-controls", "-n", help="Controls per event case (10)."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    all_pairs: bool = typer.Option(False, "--all", help="Emit every comparable pair instead of sampling."),
    event_only_controls: Optional[bool] = typer.Option(
        None, "--event-only-controls", help="Draw controls only among later event cases."
    ),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output pair CSV."),
    config: Optional[Path] = ConfigOption,
):
    """Build the (earlier_id, later_id) training pairs."""
    cfg = resolve_config(
        config,
        cohort=str(cohort),
        schema=str(schema) if schema else None,
        n_controls=n_controls,
        seed=seed,
        event_only_controls=event_only_controls,
        out=str(out) if out else None,
    )
    if cfg.out is None:
        raise ArgumentError("--out is required")

    data = load_cohort_file(cfg.cohort, load_schema(cfg.schema))
    if all_pairs:
        pair_set = comparable_pairs(data)
    else:
        pair_set = sample_case_controls(
            data,
            SamplingConfig(n_controls=cfg.n_controls, seed=cfg.seed, event_only_controls=cfg.event_only_controls),
        )

    out_path = write_csv(Path(cfg.out), pair_set.to_frame())
    write_manifest(out_path, "pairs", cfg.to_dict(), seeds={"seed": cfg.seed}, outputs={"pairs": str(out_path)})

    print_header("pairs")
    print_key_value("mode", "all comparable" if all_pairs else f"N={cfg.n_controls} controls per case")
    print_key_value("pairs", format_count(len(pair_set)))
    print_success(f"Wrote {out_path}")
    emit({"command": "pairs", "n_pairs": len(pair_set), "all": all_pairs, "outputs": {"pairs": str(out_path)}})
