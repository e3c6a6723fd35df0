"""Run configuration: defaults, key=value file loading, validation.

Config files are plain `key = value` lines with `#` comments.  Values
are coerced to the declared field type; unknown keys are an error so a
typo cannot silently fall back to a default.  API keys are never read
from config files, only from the environment variable named by
api_key_env.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(Exception):
    pass


@dataclass
class Config:
    # generation
    temperature: float = 0.5
    max_tokens: int = 4096
    prompt_budget: int = 24000
    model_id: str = ""
    endpoint: str = ""
    embed_model_id: str = ""
    embed_endpoint: str = ""
    api_key_env: str = "PROOFKIT_API_KEY"
    retry_count: int = 3
    price_input: float = 0.0
    price_output: float = 0.0
    # retrieval
    depth: int = 3
    lemma_top_k: int = 5
    embed_dim: int = 64
    comment_threshold: int = 40
    knowledge_budget: int = 8000
    use_code: bool = True
    use_lemma: bool = True
    use_verus: bool = True
    # refinement
    max_attempts: int = 10
    workers: int = 1
    # verifier
    toolchain_bin: str = "verus"
    toolchain_flags: str = ""
    toolchain_version: str = ""
    verify_timeout: float = 120.0
    # stores
    lemma_store_dir: str = "lemma_store"
    verus_store_dir: str = "verus_store"
    sessions_dir: str = "sessions"

    def validate(self) -> None:
        positive = [
            "max_tokens", "prompt_budget", "retry_count", "depth",
            "lemma_top_k", "embed_dim", "comment_threshold",
            "knowledge_budget", "max_attempts", "workers",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.verify_timeout <= 0:
            raise ConfigError(f"verify_timeout must be positive, got {self.verify_timeout}")
        nonnegative = ["temperature", "price_input", "price_output"]
        for name in nonnegative:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must not be negative, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_BOOL_WORDS = {
    "true": True, "yes": True, "on": True, "1": True,
    "false": False, "no": False, "off": False, "0": False,
}


def _coerce(raw: str, target_type, key: str):
    raw = raw.strip()
    if target_type is bool:
        try:
            return _BOOL_WORDS[raw.lower()]
        except KeyError:
            raise ConfigError(f"{key}: expected a boolean, got {raw!r}") from None
    try:
        return target_type(raw)
    except ValueError:
        raise ConfigError(f"{key}: expected {target_type.__name__}, got {raw!r}") from None


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Config from an optional key=value file plus programmatic overrides."""
    values: dict = {}
    types = {f.name: f.type for f in fields(Config)}
    concrete = {f.name: type(getattr(Config(), f.name)) for f in fields(Config)}
    if path is not None:
        text = Path(path).read_text()
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected key = value, got {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            if key not in types:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(raw, concrete[key], key)
    for key, value in (overrides or {}).items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = value
    config = Config(**values)
    config.validate()
    return config
