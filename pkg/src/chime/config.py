"""Runtime configuration with layered precedence.

Values resolve as CLI flag > CHIME_* environment variable > JSON config
file > built-in default. The config file is plain JSON with the same key
names as the dataclass fields.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from chime.errors import InvalidInputError
from chime.llm import ChatBackend, EmbeddingProvider, LiveChatBackend, ScriptedBackend, make_provider

ENV_PREFIX = "CHIME_"
_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class PipelineConfig:
    backend_url: str | None = None
    backend_model: str = "default"
    backend_script: str | None = None
    embedding_provider: str = "hashed-bow"
    temperature: float = 0.0
    threshold: float = 0.7
    k: int = 4
    store_path: str = "chime.db"
    transcript_dir: str | None = None
    mt_enabled: bool = True
    cove_enabled: bool = True

    def __post_init__(self):
        if not 0 < self.threshold < 1:
            raise InvalidInputError(f"threshold must be in (0, 1): {self.threshold}")
        if self.k < 1:
            raise InvalidInputError(f"retrieval k must be >= 1: {self.k}")
        if self.temperature < 0:
            raise InvalidInputError(f"temperature must be >= 0: {self.temperature}")

    def ablation_stages(self) -> tuple[str, ...]:
        stages = []
        if not self.cove_enabled:
            stages.append("cove")
        if not self.mt_enabled:
            stages.append("mt")
        return tuple(stages)


def _coerce(name: str, kind: type, value: Any) -> Any:
    if value is None or isinstance(value, kind):
        return value
    text = str(value).strip()
    if kind is bool:
        lowered = text.lower()
        if lowered in _TRUE_WORDS:
            return True
        if lowered in _FALSE_WORDS:
            return False
        raise InvalidInputError(f"config {name}: not a boolean: {value!r}")
    try:
        return kind(text)
    except ValueError as exc:
        raise InvalidInputError(f"config {name}: {exc}") from exc


def load_config(
    config_path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> PipelineConfig:
    env = os.environ if env is None else env
    values: dict[str, Any] = {}

    if config_path is not None:
        path = Path(config_path)
        try:
            file_values = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(file_values, dict):
            raise InvalidInputError(f"config {path} must hold a JSON object")
        unknown = set(file_values) - {f.name for f in fields(PipelineConfig)}
        if unknown:
            raise InvalidInputError(f"config {path}: unknown keys {sorted(unknown)}")
        values.update(file_values)

    for field in fields(PipelineConfig):
        env_key = ENV_PREFIX + field.name.upper()
        if env_key in env:
            values[field.name] = env[env_key]

    if overrides:
        for key, value in overrides.items():
            if value is not None:
                values[key] = value

    field_types = {"temperature": float, "threshold": float, "k": int,
                   "mt_enabled": bool, "cove_enabled": bool}
    for name, kind in field_types.items():
        if name in values:
            values[name] = _coerce(name, kind, values[name])
    return PipelineConfig(**values)


def make_backend(config: PipelineConfig) -> ChatBackend:
    if config.backend_script:
        try:
            return ScriptedBackend.load(config.backend_script)
        except OSError as exc:
            raise InvalidInputError(f"cannot read backend script: {exc}") from exc
    if config.backend_url:
        return LiveChatBackend(config.backend_url, config.backend_model)
    raise InvalidInputError("no chat backend configured: set backend_script or backend_url")


def make_embedder(config: PipelineConfig) -> EmbeddingProvider:
    return make_provider(config.embedding_provider, base_url=config.backend_url)
