"""Ablate command - sweeps over N and K, and paired strategy comparisons."""

import time
from pathlib import Path
from typing import Optional

import typer

from survrank.commands.common import (
    ConfigOption,
    SchemaOption,
    build_remote_comparator,
    emit,
    handle_errors,
    load_cohort_file,
    load_model,
    load_schema,
    resolve_config,
)
from survrank.display.components import format_duration, print_header, print_success, print_sweep
from survrank.errors import ArgumentError
from survrank.services import ablation
from survrank.services.artifacts import write_csv, write_json, write_manifest
from survrank.services.baseline_cox import CoxModel
from survrank.services.comparator import TrainConfig, train_ranker
from survrank.services.llm_client import RemoteComparator
from survrank.services.pairs import SamplingConfig, sample_case_controls


@handle_errors
def ablate(
    train: Path = typer.Argument(..., help="Training cohort CSV."),
    test: Path = typer.Argument(..., help="Test cohort CSV."),
    schema: Optional[Path] = SchemaOption,
    param: str = typer.Option(..., "--param", help="controls, anchor-count, anchor-strategy or order-policy."),
    values: Optional[str] = typer.Option(None, "--values", help="Comma-separated sweep values."),
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Ranker JSON (trained on the fly if omitted)."),
    backend: Optional[str] = typer.Option(None, "--backend", help="builtin or remote."),
    base_url: Optional[str] = typer.Option(None, "--base-url", help="Chat-completions endpoint base URL."),
    model_id: Optional[str] = typer.Option(None, "--model-id", help="Remote model identifier."),
    template: Optional[str] = typer.Option(None, "--template", help="Prompt template name or file (icu)."),
    cache: Optional[Path] = typer.Option(None, "--cache", help="JSON-lines response cache."),
    symmetrize: Optional[bool] = typer.Option(None, "--symmetrize", help="Ask both subject orders and average."),
    max_in_flight: Optional[int] = typer.Option(None, "--max-in-flight", help="Concurrent remote requests (4)."),
    n_controls: Optional[int] = typer.Option(None, "--n-controls", "-n", help="Controls per case (10)."),
    epochs: Optional[int] = typer.Option(None, "--epochs", help="Training epochs (20)."),
    k: Optional[int] = typer.Option(None, "--k", help="Number of anchors (50)."),
    anchors: Optional[str] = typer.Option(None, "--anchors", help="random or event_only."),
    order_policy: Optional[str] = typer.Option(None, "--order-policy", help="shuffle or fix_first."),
    bootstrap: Optional[int] = typer.Option(None, "--bootstrap", "-b", help="Bootstrap resamples (1000)."),
    delta: Optional[float] = typer.Option(None, "--delta", help="Equivalence bound (0.01)."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    svg: bool = typer.Option(False, "--svg", help="Also render the sweep as SVG."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory."),
    config: Optional[Path] = ConfigOption,
):
    """Run one ablation and write ablation.csv."""
    sweep_values = ablation.parse_values(param, values)
    cfg = resolve_config(
        config,
        train=str(train),
        test=str(test),
        schema=str(schema) if schema else None,
        model=str(model) if model else None,
        backend=backend,
        base_url=base_url,
        model_id=model_id,
        template=template,
        cache=str(cache) if cache else None,
        symmetrize=symmetrize,
        max_in_flight=max_in_flight,
        n_controls=n_controls,
        epochs=epochs,
        k=k,
        anchor_strategy=anchors,
        order_policy=order_policy,
        bootstrap=bootstrap,
        delta=delta,
        seed=seed,
        out=str(out) if out else None,
    )
    if cfg.out is None:
        raise ArgumentError("--out is required")
    out_dir = Path(cfg.out)

    schema_config = load_schema(cfg.schema)
    train_cohort = load_cohort_file(cfg.train, schema_config)
    test_cohort = load_cohort_file(cfg.test, schema_config)
    train_config = TrainConfig(epochs=cfg.epochs, learning_rate=cfg.learning_rate, batch_size=cfg.batch_size, seed=cfg.seed)

    comparator = None
    started = time.perf_counter()
    if param == "controls":
        if cfg.backend == "remote":
            raise ArgumentError("The controls sweep retrains the builtin ranker; use --backend builtin")
        result = ablation.sweep_controls(
            train_cohort, test_cohort, sweep_values, train_config,
            k=cfg.k, strategy=cfg.anchor_strategy, policy=cfg.order_policy, seed=cfg.seed,
        )
    else:
        if cfg.backend == "remote":
            comparator = build_remote_comparator(cfg)
        elif cfg.model:
            comparator = load_model(cfg.model)
            if isinstance(comparator, CoxModel):
                raise ArgumentError("Ablations need a pairwise ranker, not a Cox model")
        else:
            pairs = sample_case_controls(train_cohort, SamplingConfig(n_controls=cfg.n_controls, seed=cfg.seed))
            comparator = train_ranker(pairs, train_cohort, train_config)

        if param == "anchor-count":
            result = ablation.sweep_anchor_count(
                comparator, train_cohort, test_cohort, sweep_values,
                strategy=cfg.anchor_strategy, policy=cfg.order_policy, seed=cfg.seed,
            )
        elif param == "anchor-strategy":
            result = ablation.compare_anchor_strategies(
                comparator, train_cohort, test_cohort,
                k=cfg.k, policy=cfg.order_policy, seed=cfg.seed, b=cfg.bootstrap, delta=cfg.delta,
            )
        else:
            result = ablation.compare_order_policies(
                comparator, train_cohort, test_cohort,
                k=cfg.k, strategy=cfg.anchor_strategy, seed=cfg.seed, b=cfg.bootstrap, delta=cfg.delta,
            )

    frame = result.to_frame()
    outputs = {"ablation": str(write_csv(out_dir / "ablation.csv", frame))}
    for name, report in result.reports.items():
        outputs[f"equivalence_{name}"] = str(write_json(out_dir / f"equivalence_{name}.json", report.to_dict()))
        outputs[f"kde_{name}"] = str(write_csv(out_dir / f"kde_{name}.csv", report.kde_frame()))

    if svg:
        from survrank.services import plotting

        if result.reports:
            for name, report in result.reports.items():
                outputs[f"kde_{name}_svg"] = str(plotting.plot_kde(report, out_dir / f"kde_{name}.svg"))
        else:
            outputs["svg"] = str(plotting.plot_sweep(frame, out_dir / "ablation.svg"))

    write_manifest(out_dir, "ablate", {**cfg.to_dict(), "param": param, "values": sweep_values}, seeds={"seed": cfg.seed}, outputs=outputs)

    print_header(f"ablate ({param})")
    print_sweep(result.rows)
    print_success(f"Finished in {format_duration(time.perf_counter() - started)}")
    summary = {"command": "ablate", "param": param, "rows": result.rows, "outputs": outputs}
    if isinstance(comparator, RemoteComparator):
        summary["indeterminate"] = comparator.indeterminate
        summary["network_calls"] = comparator.client.network_calls
    emit(summary)
