"""Experiment configuration loading and validation."""

import json
from importlib import resources

import jsonschema

from ..errors import ConfigError
from .defaults import PIPELINES, _deep_merge, config_defaults

__all__ = ["load_config", "validate_config", "parse_config"]


def _schema_for(pipeline: str) -> dict:
    ref = resources.files("fingerloc.schemas") / f"{pipeline}.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_config(cfg: dict) -> None:
    """Check a fully merged config against its pipeline's shipped schema."""
    pipeline = cfg.get("pipeline")
    if pipeline not in PIPELINES:
        raise ConfigError(
            f"pipeline must be one of {sorted(PIPELINES)}, got {pipeline!r}",
            path="pipeline",
        )
    validator = jsonschema.Draft202012Validator(_schema_for(pipeline))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {err.message}", path=path)


def parse_config(raw: dict) -> dict:
    """Merge a raw user config over the pipeline defaults and validate."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    pipeline = raw.get("pipeline")
    if pipeline not in PIPELINES:
        raise ConfigError(
            f"pipeline must be one of {sorted(PIPELINES)}, got {pipeline!r}",
            path="pipeline",
        )
    if raw.get("version") != 1:
        raise ConfigError("config version must be 1", path="version")
    cfg = _deep_merge(config_defaults(pipeline), raw)
    validate_config(cfg)
    return cfg


def load_config(path) -> dict:
    """Read, merge, and validate a JSON experiment config file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(raw)
