"""
Core configuration for the Malicious Ad URL Detector.

Process settings are loaded from environment variables (optionally a .env
file). Run settings come from a JSON config file with CLI flag overrides.
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path as _Path
from typing import Any, Dict, List, Optional

# Load .env if available
_env_path = _Path(__file__).parent.parent / ".env"
if _env_path.exists():
    try:
        from dotenv import load_dotenv
        load_dotenv(_env_path)
    except ImportError:
        pass

from core.errors import ConfigInvalid


def get_env(key: str, default: Optional[str] = None) -> Optional[str]:
    """Get environment variable with optional default."""
    return os.environ.get(key, default)


def get_env_int(key: str, default: int = 0) -> int:
    """Get integer environment variable."""
    try:
        return int(os.environ.get(key, str(default)))
    except ValueError:
        return default


def get_env_float(key: str, default: float = 0.0) -> float:
    """Get float environment variable."""
    try:
        return float(os.environ.get(key, str(default)))
    except ValueError:
        return default


def get_env_bool(key: str, default: bool = False) -> bool:
    """Get boolean environment variable."""
    val = os.environ.get(key, str(default)).lower()
    return val in ("true", "1", "yes", "on")


_ROOT = _Path(__file__).parent.parent


class Settings:
    """Application settings."""

    # Project
    PROJECT_NAME: str = "Malicious Ad URL Detector"
    DEBUG: bool = get_env_bool("DEBUG", False)
    LOG_LEVEL: str = get_env("LOG_LEVEL", "INFO")

    # Database (feature cache + run registry)
    DATABASE_URL: str = get_env(
        "DATABASE_URL",
        f"sqlite:///{_ROOT / 'data' / 'detector.db'}",
    )
    FEATURE_CACHE_ENABLED: bool = get_env_bool("FEATURE_CACHE_ENABLED", False)
    RUN_REGISTRY_ENABLED: bool = get_env_bool("RUN_REGISTRY_ENABLED", True)

    # Bundled snapshots (suffix list, dictionary, word lists)
    RESOURCES_DIR: str = get_env("RESOURCES_DIR", str(_ROOT / "resources"))

    # Live providers
    TAVILY_API_KEY: str = get_env("TAVILY_API_KEY", "")
    REQUEST_TIMEOUT: int = get_env_int("REQUEST_TIMEOUT", 30)
    SEARCH_MAX_RESULTS: int = get_env_int("SEARCH_MAX_RESULTS", 60)

    # Extraction
    EXTRACT_WORKERS: int = get_env_int("EXTRACT_WORKERS", 8)


settings = Settings()


PROVIDER_MODES = ("live", "record", "replay")
MODEL_KINDS = ("random_forest", "adaboost", "gradient_boost", "regularized_boost")


@dataclass(frozen=True)
class ProviderConfig:
    """Web provider mode and fixture location."""

    mode: str = "replay"
    fixtures_dir: str = "fixtures"


@dataclass(frozen=True)
class ModelConfig:
    """Ensemble hyperparameters."""

    kinds: List[str] = field(default_factory=lambda: list(MODEL_KINDS))
    n_estimators: int = 100
    min_leaf: int = 1
    rf_max_depth: int = 10
    rf_max_features: str = "sqrt"
    ada_base_depth: int = 2
    gb_learning_rate: float = 0.1
    gb_max_depth: int = 3
    reg_lambda: float = 1.0
    reg_gamma: float = 0.0
    grid: List[int] = field(default_factory=lambda: [1, 100, 200, 500, 1000, 1500])


@dataclass(frozen=True)
class AttackSettings:
    """ZOO attack settings used by the ``attack`` command."""

    confidences: List[float] = field(default_factory=lambda: [50.0, 100.0])
    solver: str = "adam"
    probe_k: float = 0.1
    step_h: float = 0.1
    budget: int = 1000
    box_delta: float = 3.0
    max_samples: int = 200


@dataclass(frozen=True)
class ClusterConfig:
    restarts: int = 5
    max_iter: int = 300


@dataclass(frozen=True)
class PathsConfig:
    out: str = "runs/latest"
    inputs: List[str] = field(default_factory=list)


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration of a single CLI run."""

    seed: int = 42
    today: str = "2023-01-01"
    train_fraction: float = 0.7
    folds: int = 10
    providers: ProviderConfig = field(default_factory=ProviderConfig)
    models: ModelConfig = field(default_factory=ModelConfig)
    attack: AttackSettings = field(default_factory=AttackSettings)
    cluster: ClusterConfig = field(default_factory=ClusterConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _build(cls, data: Dict[str, Any], where: str):
    """Build a (nested) config dataclass from a JSON object, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{where}: expected an object")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigInvalid(f"{where}: unknown keys {unknown}")
    kwargs: Dict[str, Any] = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if dataclasses.is_dataclass(current):
            kwargs[name] = _build(type(current), value, f"{where}.{name}")
        elif isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigInvalid(f"{where}.{name}: expected a boolean")
            kwargs[name] = value
        elif isinstance(current, (int, float)) and not isinstance(current, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigInvalid(f"{where}.{name}: expected a number")
            kwargs[name] = type(current)(value)
        elif isinstance(current, list):
            if not isinstance(value, list):
                raise ConfigInvalid(f"{where}.{name}: expected a list")
            kwargs[name] = list(value)
        else:
            if not isinstance(value, str):
                raise ConfigInvalid(f"{where}.{name}: expected a string")
            kwargs[name] = value
    return cls(**kwargs)


def validate_run_config(cfg: RunConfig) -> RunConfig:
    """Check value ranges; raises ConfigInvalid."""
    if cfg.providers.mode not in PROVIDER_MODES:
        raise ConfigInvalid(f"providers.mode must be one of {PROVIDER_MODES}")
    if not 0.0 < cfg.train_fraction < 1.0:
        raise ConfigInvalid("train_fraction must lie in (0, 1)")
    if cfg.folds not in (5, 10):
        raise ConfigInvalid("folds must be 5 or 10")
    bad_kinds = [k for k in cfg.models.kinds if k not in MODEL_KINDS]
    if bad_kinds or not cfg.models.kinds:
        raise ConfigInvalid(f"models.kinds must be a non-empty subset of {MODEL_KINDS}")
    if cfg.models.n_estimators < 1 or cfg.models.min_leaf < 1:
        raise ConfigInvalid("models.n_estimators and models.min_leaf must be >= 1")
    if not 1 <= cfg.models.gb_max_depth <= 5:
        raise ConfigInvalid("models.gb_max_depth must lie in [1, 5]")
    if cfg.models.reg_lambda < 0 or cfg.models.reg_gamma < 0:
        raise ConfigInvalid("models.reg_lambda and models.reg_gamma must be >= 0")
    if cfg.attack.solver not in ("adam", "newton"):
        raise ConfigInvalid("attack.solver must be 'adam' or 'newton'")
    if cfg.attack.probe_k <= 0 or cfg.attack.step_h <= 0 or cfg.attack.box_delta <= 0:
        raise ConfigInvalid("attack.probe_k, attack.step_h and attack.box_delta must be > 0")
    if cfg.attack.budget < 0 or cfg.attack.max_samples < 1:
        raise ConfigInvalid("attack.budget must be >= 0 and attack.max_samples >= 1")
    if any(c < 0 for c in cfg.attack.confidences):
        raise ConfigInvalid("attack.confidences must be >= 0")
    if cfg.cluster.restarts < 1 or cfg.cluster.max_iter < 1:
        raise ConfigInvalid("cluster.restarts and cluster.max_iter must be >= 1")
    try:
        from datetime import date
        date.fromisoformat(cfg.today)
    except ValueError as e:
        raise ConfigInvalid(f"today must be an ISO date: {e}") from e
    return cfg


def load_run_config(
    path: Optional[str] = None,
    seed: Optional[int] = None,
    providers: Optional[str] = None,
    out: Optional[str] = None,
    fixtures: Optional[str] = None,
) -> RunConfig:
    """Load a RunConfig from JSON and apply CLI overrides."""
    data: Dict[str, Any] = {}
    if path:
        p = _Path(path)
        if not p.exists():
            raise ConfigInvalid(f"config file not found: {path}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigInvalid(f"config file is not valid JSON: {e}") from e
    cfg = _build(RunConfig, data, "config")

    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    if providers is not None or fixtures is not None:
        cfg = dataclasses.replace(
            cfg,
            providers=dataclasses.replace(
                cfg.providers,
                mode=providers or cfg.providers.mode,
                fixtures_dir=fixtures or cfg.providers.fixtures_dir,
            ),
        )
    if out is not None:
        cfg = dataclasses.replace(cfg, paths=dataclasses.replace(cfg.paths, out=out))
    return validate_run_config(cfg)


def derive_seed(root: int, name: str) -> int:
    """Expand the root seed into a per-module seed: sha256("root:name")[:8] & (2**63 - 1)."""
    digest = hashlib.sha256(f"{root}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & ((1 << 63) - 1)
