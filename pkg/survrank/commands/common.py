"""Shared plumbing for subcommands: config resolution, input loading,
JSON summaries and error reporting."""

import functools
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import orjson
import typer

from survrank.config import RunConfig, get_settings, load_run_config
from survrank.config.credentials import get_api_key
from survrank.display.components import print_error
from survrank.errors import ArgumentError, SurvRankError
from survrank.services.artifacts import read_json
from survrank.services.baseline_cox import COX_FORMAT, CoxModel
from survrank.services.cohort import Cohort, SchemaConfig, parse_cohort
from survrank.services.comparator import RANKER_FORMAT, RankerModel
from survrank.services.inference import RiskTable
from survrank.services.llm_client import ChatCompletionsClient, EndpointConfig, RemoteComparator
from survrank.services.textualize import load_template

logger = logging.getLogger(__name__)

DEFAULT_SCHEMA = SchemaConfig(id="id", time="time", event="event")

ConfigOption = typer.Option(None, "--config", "-c", help="JSON run config; flags override it.")
SchemaOption = typer.Option(None, "--schema", "-s", help="Schema config JSON naming id/time/event columns.")


def emit(summary: Dict[str, Any]):
    """Print the machine-readable summary on stdout."""
    typer.echo(orjson.dumps(summary, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY).decode("utf-8"))


def handle_errors(func: Callable) -> Callable:
    """Turn SurvRankError into an {"error": ...} object on stdout and exit 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except SurvRankError as e:
            logger.debug("Command failed", exc_info=True)
            print_error(e.message)
            emit({"error": e.to_dict()})
            raise typer.Exit(code=1)

    return wrapper


def resolve_config(config: Optional[Path], **overrides: Any) -> RunConfig:
    return load_run_config(config, **overrides)


def load_schema(path: Optional[Union[str, Path]]) -> SchemaConfig:
    if path is None:
        return DEFAULT_SCHEMA
    return SchemaConfig.load(Path(path))


def load_cohort_file(path: Union[str, Path], schema: SchemaConfig) -> Cohort:
    path = Path(path)
    if not path.exists():
        raise ArgumentError(f"Cohort file not found: {path}")
    return parse_cohort(path, schema)


def load_risk_table(path: Union[str, Path]) -> RiskTable:
    path = Path(path)
    if not path.exists():
        raise ArgumentError(f"Risk file not found: {path}")
    return RiskTable.read_csv(path)


def load_model(path: Union[str, Path]) -> Union[RankerModel, CoxModel]:
    """Load a ranker or Cox model file, dispatching on its format tag."""
    data = read_json(path)
    fmt = data.get("format") if isinstance(data, dict) else None
    if fmt == RANKER_FORMAT:
        return RankerModel.from_dict(data)
    if fmt == COX_FORMAT:
        return CoxModel.from_dict(data)
    raise ArgumentError(f"Unrecognized model file {path} (format={fmt!r})")


def build_remote_comparator(cfg: RunConfig) -> RemoteComparator:
    settings = get_settings()
    endpoint = EndpointConfig(
        base_url=cfg.base_url or settings.base_url,
        model_id=cfg.model_id or settings.model_id,
        temperature=cfg.temperature,
        max_in_flight=cfg.max_in_flight,
        timeout=cfg.timeout,
        cache_path=Path(cfg.cache) if cfg.cache else None,
        api_key=get_api_key(),
    )
    if not endpoint.model_id:
        raise ArgumentError("--model-id is required for the remote backend")
    return RemoteComparator(
        client=ChatCompletionsClient(endpoint),
        template=load_template(cfg.template),
        symmetrize=cfg.symmetrize,
    )


def parse_floats(text: Optional[str], name: str) -> Optional[list]:
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ArgumentError(f"{name} must be comma-separated numbers, got {text!r}") from None
