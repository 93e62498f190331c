"""Atomic artifact writers and the run manifest."""

import logging
import os
import platform
import tempfile
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Optional, Union

import orjson
import pandas as pd

from survrank.errors import ArgumentError
from survrank.services.cohort import Cohort, SchemaConfig, cohort_to_frame

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
MANIFEST_NAME = "manifest.json"
MANIFEST_PACKAGES = ("survrank", "numpy", "pandas", "scipy", "httpx", "orjson", "typer", "rich")


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """Write to a temp file beside ``path`` then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except FileNotFoundError:
            pass
        raise
    logger.debug(f"Wrote {path} ({len(data)} bytes)")
    return path


def write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dumps_json(obj: Any) -> bytes:
    return orjson.dumps(
        obj,
        option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY,
    ) + b"\n"


def write_json(path: Path, obj: Any) -> Path:
    return atomic_write_bytes(path, dumps_json(obj))


def read_json(path: Union[str, Path]) -> Any:
    try:
        return orjson.loads(Path(path).read_bytes())
    except (OSError, orjson.JSONDecodeError) as e:
        raise ArgumentError(f"Cannot read JSON file {path}: {e}") from e


def write_csv(path: Path, frame: pd.DataFrame) -> Path:
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return write_text(path, text)


def write_cohort(path: Path, cohort: Cohort, schema_config: SchemaConfig) -> Path:
    """Cohort CSV under the schema config's column names (re-parses identically)."""
    return write_csv(path, cohort_to_frame(cohort, schema_config))


def package_versions() -> Dict[str, Optional[str]]:
    versions: Dict[str, Optional[str]] = {}
    for name in MANIFEST_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def manifest_path(out: Path) -> Path:
    """manifest.json inside an output directory, or <file>.manifest.json beside an output file."""
    out = Path(out)
    if out.suffix:
        return out.with_name(f"{out.name}.manifest.json")
    return out / MANIFEST_NAME


def write_manifest(
    out: Path,
    command: str,
    config: Dict[str, Any],
    seeds: Optional[Dict[str, int]] = None,
    outputs: Optional[Dict[str, str]] = None,
) -> Path:
    """Provenance record: command, resolved config, seeds and versions."""
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds or {},
        "outputs": outputs or {},
        "versions": package_versions(),
        "python": platform.python_version(),
    }
    return write_json(manifest_path(out), manifest)
