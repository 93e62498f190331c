"""Train command - fit the pairwise ranker or the Cox baseline."""

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
    load_schema,
    resolve_config,
)
from survrank.display.components import format_count, format_duration, print_header, print_key_value, print_success
from survrank.errors import ArgumentError
from survrank.services.artifacts import write_json, write_manifest
from survrank.services.baseline_cox import fit_cox
from survrank.services.comparator import TrainConfig, train_ranker
from survrank.services.pairs import SamplingConfig, read_pairs, sample_case_controls


@handle_errors
def train(
    cohort: Path = typer.Argument(..., help="Training cohort CSV."),
    schema: Optional[Path] = SchemaOption,
    pairs: Optional[Path] = typer.Option(None, "--pairs", "-p", help="Pair CSV (sampled on the fly if omitted)."),
    kind: str = typer.Option("ranker", "--kind", help="ranker or cox."),
    n_controls: Optional[int] = typer.Option(None, "--n-controls", "-n", help="Controls per event case (10)."),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Training epochs (20)."),
    learning_rate: Optional[float] = typer.Option(None, "--learning-rate", help="Step size (0.5)."),
    batch_size: Optional[int] = typer.Option(None, "--batch-size", help="Pairs per step (64)."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output model JSON."),
    config: Optional[Path] = ConfigOption,
):
    """Train a model and save it as JSON."""
    if kind not in ("ranker", "cox"):
        raise ArgumentError(f"--kind must be ranker or cox, got {kind!r}")
    cfg = resolve_config(
        config,
        cohort=str(cohort),
        schema=str(schema) if schema else None,
        pairs=str(pairs) if pairs else None,
        n_controls=n_controls,
        epochs=epochs,
        learning_rate=learning_rate,
        batch_size=batch_size,
        seed=seed,
        out=str(out) if out else None,
    )
    if cfg.out is None:
        raise ArgumentError("--out is required")

    data = load_cohort_file(cfg.cohort, load_schema(cfg.schema))
    started = time.perf_counter()
    summary = {"command": "train", "kind": kind, "n": len(data)}

    if kind == "cox":
        model = fit_cox(data)
        summary.update(
            coefficients=dict(zip(model.featurizer.feature_names, model.coefficients.tolist())),
            iterations=model.iterations,
        )
    else:
        if cfg.pairs:
            pair_set = read_pairs(Path(cfg.pairs), data)
        else:
            pair_set = sample_case_controls(
                data,
                SamplingConfig(n_controls=cfg.n_controls, seed=cfg.seed, event_only_controls=cfg.event_only_controls),
            )
        model = train_ranker(
            pair_set,
            data,
            TrainConfig(epochs=cfg.epochs, learning_rate=cfg.learning_rate, batch_size=cfg.batch_size, seed=cfg.seed),
        )
        trace = model.metadata["loss_trace"]
        summary.update(n_pairs=len(pair_set), final_loss=trace[-1] if trace else None)

    out_path = write_json(Path(cfg.out), model.to_dict())
    write_manifest(out_path, "train", {**cfg.to_dict(), "kind": kind}, seeds={"seed": cfg.seed}, outputs={"model": str(out_path)})
    summary["outputs"] = {"model": str(out_path)}

    print_header(f"train ({kind})")
    print_key_value("subjects", format_count(len(data)))
    if "n_pairs" in summary:
        print_key_value("pairs", format_count(summary["n_pairs"]))
    print_success(f"Wrote {out_path} in {format_duration(time.perf_counter() - started)}")
    emit(summary)
