"""
Run configuration: defaults < environment (.env) < config file < flags.
"""

import logging
import os
from pathlib import Path
from typing import Any, Mapping, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import ValidationError

from errors import ConfigError
from schemas import RunConfig

logger = logging.getLogger(__name__)

# Load environment variables from .env file
env_path = Path(__file__).parent.parent / ".env"
load_dotenv(env_path)

ENV_PREFIX = "SPECKLE_"

CONFIG_KEYS = {
    "replicates", "looks", "filters", "significance", "seed", "side", "background_mean",
    "line_mean", "workers", "looks_mode", "dedupe", "lee_window",
}
PHANTOM_KEYS = {"side": "side", "background_mean": "background_mean", "line_mean": "line_mean"}
RENAMED_KEYS = {"looks": "looks_list", "seed": "base_seed"}
LIST_KEYS = {"looks", "filters"}


def split_list(text: str) -> list[str]:
    """Split a comma-separated value, dropping blanks."""
    return [item.strip() for item in str(text).split(",") if item.strip()]


def environment_values() -> dict[str, str]:
    """Config keys found as SPECKLE_<KEY> environment variables."""
    values = {}
    for key in CONFIG_KEYS:
        value = os.environ.get(ENV_PREFIX + key.upper())
        if value is not None and value != "":
            values[key] = value
    return values


def file_values(config_path: Path) -> dict[str, str]:
    """
    Read an INI-style key=value config file.

    Raises:
        ConfigError: if the file is missing or holds an unknown key
    """
    if not config_path.is_file():
        raise ConfigError(f"config file not found: {config_path}")
    values = {k.strip().lower(): v for k, v in dotenv_values(config_path).items() if v is not None}
    unknown = sorted(set(values) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys in {config_path}: {', '.join(unknown)}")
    return values


def build_run_config(values: Mapping[str, Any], output: Optional[Path] = None) -> RunConfig:
    """
    Turn flat key=value settings into a validated RunConfig.

    Raises:
        ConfigError: if any value fails validation
    """
    fields: dict[str, Any] = {}
    phantom: dict[str, Any] = {}
    for key, value in values.items():
        if key in LIST_KEYS and isinstance(value, str):
            value = split_list(value)
        if key == "lee_window" and isinstance(value, str):
            # Literal[3, 5, 7] does not coerce strings
            try:
                value = int(value)
            except ValueError:
                raise ConfigError(f"lee_window must be 3, 5 or 7, got {value!r}") from None
        if key in PHANTOM_KEYS:
            phantom[PHANTOM_KEYS[key]] = value
        else:
            fields[RENAMED_KEYS.get(key, key)] = value
    if phantom:
        fields["phantom"] = phantom
    if output is not None:
        fields["output"] = output
    try:
        return RunConfig(**fields)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"invalid configuration value for {location}: {first['msg']}") from None


def load_run_config(
    config_path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    output: Optional[Path] = None,
) -> RunConfig:
    """Merge environment, config file and flag overrides (None means unset)."""
    values: dict[str, Any] = environment_values()
    if config_path is not None:
        values.update(file_values(config_path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    config = build_run_config(values, output)
    logger.info("effective configuration: %s", config.model_dump_json())
    return config


def manifest_path(output: Path) -> Path:
    return output.with_name(output.name + ".manifest.txt")


def write_manifest(config: RunConfig, output: Path) -> Path:
    """Write the effective configuration next to the results file."""
    path = manifest_path(output)
    path.write_text(config.model_dump_json(indent=2) + "\n")
    return path
