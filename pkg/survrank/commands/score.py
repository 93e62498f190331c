"""Score command - anchor-aggregated risk for test subjects."""

import time
from pathlib import Path
from typing import Optional, Union

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
from survrank.config import RunConfig
from survrank.display.components import (
    format_count,
    format_duration,
    print_header,
    print_key_value,
    print_success,
    print_warning,
)
from survrank.errors import ArgumentError
from survrank.services.artifacts import write_csv, write_manifest
from survrank.services.baseline_cox import CoxModel
from survrank.services.cohort import Cohort
from survrank.services.comparator import ComparatorModel
from survrank.services.inference import AnchorSet, RiskTable, score_cohort, select_anchors
from survrank.services.llm_client import RemoteComparator


def score_with(
    model: Union[ComparatorModel, CoxModel],
    cohort: Cohort,
    anchors: Optional[AnchorSet],
    cfg: RunConfig,
    strict: bool,
) -> RiskTable:
    if isinstance(model, CoxModel):
        return RiskTable.from_scores(dict(zip(cohort.ids, model.linear_predictors(list(cohort.records)))))
    return score_cohort(cohort, anchors, model, policy=cfg.order_policy, seed=cfg.seed, strict=strict)


@handle_errors
def score(
    train: Path = typer.Argument(..., help="Training cohort CSV (anchor pool)."),
    test: Path = typer.Argument(..., help="Cohort CSV to score."),
    schema: Optional[Path] = SchemaOption,
    model: Optional[Path] = typer.Option(None, "--model", "-m", help="Ranker or Cox model JSON."),
    backend: Optional[str] = typer.Option(None, "--backend", help="builtin or remote."),
    base_url: Optional[str] = typer.Option(None, "--base-url", help="Chat-completions endpoint base URL."),
    model_id: Optional[str] = typer.Option(None, "--model-id", help="Remote model identifier."),
    template: Optional[str] = typer.Option(None, "--template", help="Prompt template name or file (icu)."),
    cache: Optional[Path] = typer.Option(None, "--cache", help="JSON-lines response cache."),
    symmetrize: Optional[bool] = typer.Option(None, "--symmetrize", help="Ask both subject orders and average."),
    max_in_flight: Optional[int] = typer.Option(None, "--max-in-flight", help="Concurrent remote requests (4)."),
    k: Optional[int] = typer.Option(None, "--k", help="Number of anchors (50)."),
    anchors: Optional[str] = typer.Option(None, "--anchors", help="random or event_only."),
    order_policy: Optional[str] = typer.Option(None, "--order-policy", help="shuffle or fix_first."),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed."),
    strict: bool = typer.Option(False, "--strict", help="Fail on the first subject that cannot be scored."),
    train_out: Optional[Path] = typer.Option(None, "--train-out", help="Also score the training cohort here."),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output risk CSV."),
    config: Optional[Path] = ConfigOption,
):
    """Score subjects against a shared anchor set."""
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
        k=k,
        anchor_strategy=anchors,
        order_policy=order_policy,
        seed=seed,
        out=str(out) if out else None,
    )
    if cfg.out is None:
        raise ArgumentError("--out is required")

    schema_config = load_schema(cfg.schema)
    train_cohort = load_cohort_file(cfg.train, schema_config)
    test_cohort = load_cohort_file(cfg.test, schema_config)

    if cfg.backend == "remote":
        comparator = build_remote_comparator(cfg)
    elif cfg.model:
        comparator = load_model(cfg.model)
    else:
        raise ArgumentError("--model is required for the builtin backend")

    anchor_set = None
    if not isinstance(comparator, CoxModel):
        anchor_set = select_anchors(train_cohort, k=cfg.k, strategy=cfg.anchor_strategy, seed=cfg.seed)

    started = time.perf_counter()
    table = score_with(comparator, test_cohort, anchor_set, cfg, strict)
    out_path = write_csv(Path(cfg.out), table.to_frame())
    outputs = {"risks": str(out_path)}

    if train_out is not None:
        # anchors cannot score themselves; they are recorded as failures
        train_table = score_with(comparator, train_cohort, anchor_set, cfg, strict=False)
        outputs["train_risks"] = str(write_csv(train_out, train_table.to_frame()))

    write_manifest(out_path, "score", cfg.to_dict(), seeds={"seed": cfg.seed}, outputs=outputs)

    summary = {
        "command": "score",
        "n_scored": len(table),
        "failures": table.failures,
        "outputs": outputs,
    }
    if anchor_set is not None:
        summary.update(k=anchor_set.k, anchor_strategy=anchor_set.strategy, shortfall=anchor_set.shortfall)
    if isinstance(comparator, RemoteComparator):
        summary["indeterminate"] = comparator.indeterminate
        summary["network_calls"] = comparator.client.network_calls

    print_header("score")
    print_key_value("scored", format_count(len(table)))
    if anchor_set is not None:
        print_key_value("anchors", f"{anchor_set.k} {anchor_set.strategy}")
    if table.failures:
        print_warning(f"{len(table.failures)} subjects could not be scored")
    print_success(f"Wrote {out_path} in {format_duration(time.perf_counter() - started)}")
    emit(summary)
