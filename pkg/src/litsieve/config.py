"""Run configuration and input query types.

Precedence when loading: explicit overrides (CLI flags) > environment
variables > config file > built-in defaults. API keys are read from the
environment only.
"""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigInvalid

logger = logging.getLogger(__name__)

ENV_PREFIX = "LITSIEVE_"
SECRET_FIELDS = {"llm_api_key", "embedding_api_key"}


@dataclass(frozen=True)
class InputQuery:
    title: str
    abstract: str

    def __post_init__(self) -> None:
        if not isinstance(self.title, str) or not self.title.strip():
            raise ValueError("query title must be non-empty")
        if not isinstance(self.abstract, str) or not self.abstract.strip():
            raise ValueError("query abstract must be non-empty")


@dataclass(frozen=True)
class PipelineConfig:
    keyword_min: int = 5
    keyword_max: int = 10
    max_per_keyword: int = 20
    iqr_multiplier: float = 0.5
    provider_id: str = "minilm"
    llm_model_id: str = "gemini-2.0-flash"
    request_delay_ms: int = 3000
    output_dir: Path = Path("out")
    cache_dir: Path = Path(".litsieve-cache")
    llm_api_url: str | None = None
    embedding_api_url: str | None = None
    fetch_pdfs: bool = True
    # secrets: never read from files
    llm_api_key: str | None = field(default=None, repr=False)
    embedding_api_key: str | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        validate(self)

    def cache_fingerprint(self) -> dict:
        """Config fields that change pipeline results (paths and secrets excluded)."""
        return {
            "keyword_min": self.keyword_min, "keyword_max": self.keyword_max,
            "max_per_keyword": self.max_per_keyword, "iqr_multiplier": self.iqr_multiplier,
            "provider_id": self.provider_id, "llm_model_id": self.llm_model_id,
        }


def validate(cfg: PipelineConfig) -> None:
    for name in ("keyword_min", "keyword_max", "max_per_keyword", "request_delay_ms"):
        v = getattr(cfg, name)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigInvalid(name, v, "expected an integer")
    if cfg.keyword_min < 1:
        raise ConfigInvalid("keyword_min", cfg.keyword_min, "must be >= 1")
    if cfg.keyword_max < cfg.keyword_min:
        raise ConfigInvalid("keyword_max", cfg.keyword_max,
                            f"must be >= keyword_min ({cfg.keyword_min})")
    if cfg.max_per_keyword < 1:
        raise ConfigInvalid("max_per_keyword", cfg.max_per_keyword, "must be >= 1")
    if cfg.request_delay_ms < 0:
        raise ConfigInvalid("request_delay_ms", cfg.request_delay_ms, "must be >= 0")
    m = cfg.iqr_multiplier
    if isinstance(m, bool) or not isinstance(m, (int, float)) or not m >= 0 or m == float("inf"):
        raise ConfigInvalid("iqr_multiplier", m, "must be a finite number >= 0")
    if not cfg.provider_id:
        raise ConfigInvalid("provider_id", cfg.provider_id, "must be non-empty")
    if not cfg.llm_model_id:
        raise ConfigInvalid("llm_model_id", cfg.llm_model_id, "must be non-empty")


_FIELDS = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _coerce(name: str, raw: Any) -> Any:
    default = _FIELDS[name].default
    if raw is None:
        return None
    try:
        if isinstance(default, bool):
            if isinstance(raw, str):
                low = raw.strip().lower()
                if low in ("1", "true", "yes", "on"):
                    return True
                if low in ("0", "false", "no", "off"):
                    return False
                raise ValueError(raw)
            return bool(raw)
        if isinstance(default, int):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, Path):
            return Path(raw)
    except (TypeError, ValueError):
        raise ConfigInvalid(name, raw) from None
    return str(raw)


def load_config(file: str | os.PathLike | None = None,
                env: Mapping[str, str] | None = None,
                overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Build a validated config from defaults, a YAML/JSON file, the
    environment and explicit overrides (highest precedence).

    Environment variables are ``LITSIEVE_<FIELD>`` (upper case), plus the
    conventional ``LLM_API_KEY``, ``LLM_API_URL``, ``EMBEDDING_API_URL`` and
    ``EMBEDDING_API_KEY``.
    """
    env = os.environ if env is None else env
    values: dict[str, Any] = {}

    if file is not None:
        path = Path(file)
        if path.exists():
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
            if not isinstance(data, dict):
                raise ConfigInvalid("<file>", str(path), "top level must be a mapping")
            for k, v in data.items():
                if k in SECRET_FIELDS:
                    raise ConfigInvalid(k, "<redacted>", "secrets are accepted only via environment")
                if k not in _FIELDS:
                    raise ConfigInvalid(k, v, "unknown field")
                values[k] = _coerce(k, v)
        else:
            logger.info("config file %s not found; using defaults", path)

    plain_env = {"LLM_API_URL": "llm_api_url", "EMBEDDING_API_URL": "embedding_api_url",
                 "LLM_API_KEY": "llm_api_key", "EMBEDDING_API_KEY": "embedding_api_key"}
    for var, name in plain_env.items():
        if env.get(var):
            values[name] = env[var]
    for name in _FIELDS:
        if name in SECRET_FIELDS:
            continue
        var = ENV_PREFIX + name.upper()
        if var in env:
            values[name] = _coerce(name, env[var])

    for k, v in (overrides or {}).items():
        if v is None:
            continue
        if k in SECRET_FIELDS:
            raise ConfigInvalid(k, "<redacted>", "secrets are accepted only via environment")
        if k not in _FIELDS:
            raise ConfigInvalid(k, v, "unknown field")
        values[k] = _coerce(k, v)

    return PipelineConfig(**values)
