"""Synth command - generate a synthetic proportional-hazards cohort."""

import time
from pathlib import Path
from typing import Optional

import typer

from survrank.commands.common import ConfigOption, emit, handle_errors, parse_floats, resolve_config
from survrank.display.components import format_count, format_duration, print_header, print_key_value, print_success
from survrank.errors import ArgumentError
from survrank.services.artifacts import write_manifest
from survrank.services.synth import FeatureSpec, SynthConfig, write_synth


@handle_errors
def synth(
    n: int = typer.Option(2000, "--n", help="Number of subjects."),
    beta: str = typer.Option("1.0,-0.5", "--beta", help="True log-hazard coefficients, comma-separated."),
    features: Optional[str] = typer.Option(
        None, "--features", help="Per-feature distribution: normal or bernoulli:q (default all normal)."
    ),
    baseline_rate: float = typer.Option(0.1, "--baseline-rate", help="Baseline event rate."),
    censor_rate: float = typer.Option(0.1, "--censor-rate", help="Censoring rate."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory."),
    config: Optional[Path] = ConfigOption,
):
    """Generate a synthetic cohort with a ground-truth sidecar."""
    cfg = resolve_config(config, seed=seed, out=str(out) if out else None)
    if cfg.out is None:
        raise ArgumentError("--out is required")
    out_dir = Path(cfg.out)

    specs = tuple(FeatureSpec.parse(f) for f in features.split(",")) if features else ()
    synth_config = SynthConfig(
        n=n,
        beta=tuple(parse_floats(beta, "--beta")),
        baseline_rate=baseline_rate,
        censor_rate=censor_rate,
        features=specs,
        seed=cfg.seed,
    )

    started = time.perf_counter()
    paths = write_synth(synth_config, out_dir)
    outputs = {k: str(p) for k, p in paths.items()}
    write_manifest(out_dir, "synth", synth_config.to_dict(), seeds={"seed": cfg.seed}, outputs=outputs)

    print_header("synth")
    print_key_value("subjects", format_count(n))
    print_key_value("output", str(out_dir))
    print_success(f"Wrote synthetic cohort in {format_duration(time.perf_counter() - started)}")
    emit({"command": "synth", "n": n, "outputs": outputs, "seed": cfg.seed})
