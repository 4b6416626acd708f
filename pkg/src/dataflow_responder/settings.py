"""Engine settings from defaults, environment, a YAML file and CLI flags."""

import logging
from pathlib import Path
from typing import Any

import yaml
from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from dataflow_responder.errors import ConfigError

logger = logging.getLogger(__name__)


class EngineSettings(BaseSettings):
    """Tunable engine parameters; environment variables use the ``RESPONDER_`` prefix."""

    model_config = SettingsConfigDict(env_prefix="RESPONDER_", extra="forbid")

    beam_size: int = Field(default=5, ge=1, description="Beam size K")
    max_len: int = Field(default=40, ge=1, description="Maximum response tokens")
    max_depth: int = Field(default=64, ge=1, description="Expansion and derivation depth")
    length_norm: float = Field(default=0.0, ge=0.0, description="Length normalization exponent")
    renormalize: bool = Field(default=True, description="Renormalize after masking")
    ngram_order: int = Field(default=3, ge=1, description="n-gram order")
    ngram_k: float = Field(default=0.1, gt=0.0, description="Add-k constant")
    trigger_weight: float = Field(default=1.0, ge=0.0, description="Prompt trigger scale")
    trigger_clip: float = Field(default=3.0, gt=0.0, description="Bound on trigger log-lifts")
    remote_timeout: float = Field(default=10.0, gt=0.0, description="Remote request timeout (s)")
    log_level: str = Field(default="WARNING", description="Root log level")


def load_settings(config: Path | None = None, **overrides: Any) -> EngineSettings:
    """Resolve settings: flags over YAML over environment over defaults.

    Args:
        config: Optional YAML file with setting names as keys.
        **overrides: Flag values; ``None`` means "not given".

    Returns:
        The settings.

    Raises:
        ConfigError: On unreadable YAML, unknown keys or invalid values.
    """
    values: dict[str, Any] = {}
    if config is not None:
        try:
            loaded = yaml.safe_load(config.read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {config}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {config} must be a mapping")
        values.update({str(k).replace("-", "_"): v for k, v in loaded.items()})
        logger.debug("loaded %d settings from %s", len(loaded), config)
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return EngineSettings(**values)
    except ValidationError as exc:
        messages = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid settings: {messages}") from exc
