"""Split command - deterministic train/test split."""

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
from survrank.services.artifacts import write_cohort, write_json, write_manifest
from survrank.services.cohort import split_cohort


@handle_errors
def split(
    cohort: Path = typer.Argument(..., help="Cohort CSV."),
    schema: Optional[Path] = SchemaOption,
    test_fraction: Optional[float] = typer.Option(None, "--test-fraction", help="Share of subjects held out (0.2)."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory."),
    config: Optional[Path] = ConfigOption,
):
    """Split a cohort into train.csv and test.csv."""
    cfg = resolve_config(
        config,
        cohort=str(cohort),
        schema=str(schema) if schema else None,
        test_fraction=test_fraction,
        seed=seed,
        out=str(out) if out else None,
    )
    if cfg.out is None:
        raise ArgumentError("--out is required")
    out_dir = Path(cfg.out)

    schema_config = load_schema(cfg.schema)
    data = load_cohort_file(cfg.cohort, schema_config)
    train, test = split_cohort(data, test_fraction=cfg.test_fraction, seed=cfg.seed)

    outputs = {
        "train": str(write_cohort(out_dir / "train.csv", train, schema_config)),
        "test": str(write_cohort(out_dir / "test.csv", test, schema_config)),
        "schema": str(write_json(out_dir / "schema.json", schema_config.to_dict())),
    }
    write_manifest(out_dir, "split", cfg.to_dict(), seeds={"seed": cfg.seed}, outputs=outputs)

    print_header("split")
    print_key_value("train", format_count(len(train)))
    print_key_value("test", format_count(len(test)))
    print_success(f"Wrote split to {out_dir}")
    emit({"command": "split", "n_train": len(train), "n_test": len(test), "outputs": outputs, "seed": cfg.seed})
