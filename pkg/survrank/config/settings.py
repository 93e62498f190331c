"""Settings and run configuration for Survrank."""

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from dotenv import load_dotenv

from survrank.errors import ArgumentError

PACKAGE_DIR = Path(__file__).parent.parent
TEMPLATES_DIR = PACKAGE_DIR / "templates"

Backend = Literal["builtin", "remote"]
AnchorStrategy = Literal["random", "event_only"]
OrderPolicy = Literal["shuffle", "fix_first"]


@dataclass
class Settings:
    """Process-wide settings (paths and remote endpoint defaults)."""

    # Paths
    config_dir: Path = field(
        default_factory=lambda: Path(os.environ.get("SURVRANK_HOME", Path.home() / ".survrank"))
    )

    # Remote comparator defaults
    base_url: str = "http://localhost:8000"
    model_id: str = ""

    def __post_init__(self):
        """Ensure paths are Path objects."""
        if isinstance(self.config_dir, str):
            self.config_dir = Path(self.config_dir)

        self.base_url = os.environ.get("SURVRANK_BASE_URL", self.base_url)
        self.model_id = os.environ.get("SURVRANK_MODEL_ID", self.model_id)

    @property
    def credentials_path(self) -> Path:
        return self.config_dir / "credentials.json"


# Singleton settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get the settings singleton (loads .env on first use)."""
    global _settings
    if _settings is None:
        load_dotenv()
        _settings = Settings()
    return _settings


@dataclass
class RunConfig:
    """Every pipeline parameter a subcommand may read.

    Defaults follow the reference setup: 8:2 split, K = 50 random anchors,
    shuffled subject order, 1,000 bootstrap resamples, equivalence bound 0.01.
    """

    # Paths
    cohort: Optional[str] = None
    train: Optional[str] = None
    test: Optional[str] = None
    schema: Optional[str] = None
    template: str = "icu"
    model: Optional[str] = None
    pairs: Optional[str] = None
    out: Optional[str] = None

    # Split / pairs
    test_fraction: float = 0.2
    n_controls: int = 10
    event_only_controls: bool = False

    # Training
    epochs: int = 20
    learning_rate: float = 0.5
    batch_size: int = 64

    # Inference
    k: int = 50
    anchor_strategy: AnchorStrategy = "random"
    order_policy: OrderPolicy = "shuffle"
    backend: Backend = "builtin"

    # Evaluation
    horizons: List[float] = field(default_factory=list)
    bootstrap: int = 1000
    delta: float = 0.01

    # Remote comparator
    base_url: Optional[str] = None
    model_id: Optional[str] = None
    temperature: float = 0.00001
    max_in_flight: int = 4
    timeout: float = 30.0
    cache: Optional[str] = None
    symmetrize: bool = False

    seed: int = 0
    jobs: int = 1

    def validate(self) -> "RunConfig":
        """Check ranges; raise ArgumentError on the first violation."""
        if not 0.0 < self.test_fraction < 1.0:
            raise ArgumentError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")
        for name in ("n_controls", "epochs", "batch_size", "k", "bootstrap", "max_in_flight", "jobs"):
            value = getattr(self, name)
            # epochs=0 is a legal "return the initialization" request
            if value < (0 if name == "epochs" else 1):
                raise ArgumentError(f"{name} must be positive, got {value}")
        if self.learning_rate <= 0:
            raise ArgumentError(f"learning_rate must be positive, got {self.learning_rate}")
        if any(h <= 0 for h in self.horizons):
            raise ArgumentError(f"horizons must be positive, got {self.horizons}")
        if self.delta <= 0:
            raise ArgumentError(f"delta must be positive, got {self.delta}")
        if self.temperature < 0:
            raise ArgumentError(f"temperature must be >= 0, got {self.temperature}")
        if self.anchor_strategy not in ("random", "event_only"):
            raise ArgumentError(f"Unknown anchor strategy: {self.anchor_strategy}")
        if self.order_policy not in ("shuffle", "fix_first"):
            raise ArgumentError(f"Unknown order policy: {self.order_policy}")
        if self.backend not in ("builtin", "remote"):
            raise ArgumentError(f"Unknown backend: {self.backend}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def load_run_config(path: Optional[Path] = None, **overrides: Any) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus flag overrides.

    Overrides whose value is None are ignored, so unset flags never clobber
    the file. Unknown keys in the file are rejected.
    """
    known = {f.name for f in fields(RunConfig)}
    data: Dict[str, Any] = {}

    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ArgumentError(f"Cannot read config file {path}: {e}") from e
        if not isinstance(data, dict):
            raise ArgumentError(f"Config file {path} must hold a JSON object")
        unknown = sorted(set(data) - known)
        if unknown:
            raise ArgumentError(f"Unknown config keys: {', '.join(unknown)}")

    for key, value in overrides.items():
        if key not in known:
            raise ArgumentError(f"Unknown config key: {key}")
        if value is not None:
            data[key] = value

    if "horizons" in data:
        data["horizons"] = [float(h) for h in data["horizons"]]

    return RunConfig(**data).validate()
