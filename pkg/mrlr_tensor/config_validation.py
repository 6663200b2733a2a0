# File: mrlr_tensor/config_validation.py
from argparse import Namespace
import logging
import os
from typing import Optional, Dict, Any
from pathlib import Path

import yaml
from pydantic import (
    BaseModel,
    Field,
    ValidationError,
    ConfigDict,
)

from .constants import AlsDefaults, EngineDefaults, EnvVars
from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)


# --- Pydantic Models for Configuration Schema ---
class AlsConfig(BaseModel):
    """Settings of one alternating least squares fit."""

    max_sweeps: int = Field(
        AlsDefaults.MAX_SWEEPS,
        ge=1,
        description="Maximum number of full ALS sweeps over all modes.",
    )
    rel_tol: float = Field(
        AlsDefaults.REL_TOL,
        ge=0.0,
        allow_inf_nan=False,
        description="Stop when the fit error changes by less than rel_tol times the previous error.",
    )
    seed: int = Field(
        AlsDefaults.SEED,
        ge=0,
        description="Seed of the factor initialization; restart k uses seed + k.",
    )
    restarts: int = Field(
        AlsDefaults.RESTARTS,
        ge=1,
        description="Number of random restarts; the best fit is kept.",
    )

    model_config = ConfigDict(extra="forbid", frozen=True)


class RunConfig(BaseModel):
    """Pydantic schema for the YAML configuration file and CLI overrides."""

    als: AlsConfig = Field(default_factory=AlsConfig, description="ALS settings shared by every stage and baseline.")
    threads: int = Field(
        EngineDefaults.THREADS,
        ge=1,
        description="Worker threads for restarts and sweep points.",
    )
    refinement_cycles: int = Field(
        EngineDefaults.REFINEMENT_CYCLES,
        ge=0,
        description="Extra passes re-fitting every stage against the residual of all others.",
    )
    reverse: bool = Field(default=False, description="Fit stages fine-to-coarse instead of coarse-to-fine.")
    record_timing: bool = Field(
        default=True,
        description="Write wall seconds to CSV; disable for byte-identical reruns.",
    )

    model_config = ConfigDict(extra="ignore")


# Flat CLI argument names that override nested ALS settings
_ALS_CLI_KEYS = {
    "max_sweeps": "max_sweeps",
    "tol": "rel_tol",
    "seed": "seed",
    "restarts": "restarts",
}

_RUN_CLI_KEYS = ("threads", "refinement_cycles", "reverse", "record_timing")


# --- Validation Function ---
def validate_and_parse_config(config_dict: Dict[str, Any]) -> RunConfig:
    """
    Validates a raw configuration dictionary against the RunConfig schema.
    Raises ConfigurationError if validation fails.
    """
    try:
        validated_config = RunConfig.model_validate(config_dict)
        logger.debug("Configuration dictionary parsed and validated successfully against schema.")
        return validated_config
    except ValidationError as e:
        error_messages = []
        for error in e.errors():
            loc_parts = [str(loc_item) for loc_item in error.get("loc", ())]
            loc_str = " -> ".join(loc_parts) if loc_parts else "Model Level"
            msg = error.get("msg", "Unknown validation error")
            error_messages.append(f"Location '{loc_str}': {msg}")
            logger.error(f"Validation error at {loc_str}: {msg} (input: {error.get('input', 'N/A')})")

        raise ConfigurationError(
            "Configuration validation failed",
            context={
                "validation_errors": error_messages,
                "config_dict_keys": list(config_dict.keys()),
            }
        )


def _read_yaml(config_path: str) -> Dict[str, Any]:
    config_file = Path(config_path)
    if not config_file.is_file():
        raise ConfigurationError(f"Config file not found: {config_path}", config_file=config_path)
    try:
        with open(config_file, "r", encoding="utf-8") as f:
            yaml_config = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(
            f"Invalid YAML syntax in configuration file: {config_path}",
            config_file=config_path,
            context={"yaml_error": str(e)},
        )
    except OSError as e:
        raise ConfigurationError(
            f"Cannot read configuration file: {config_path}",
            config_file=config_path,
            context={"error": str(e)},
        )

    if yaml_config is None:
        return {}
    if not isinstance(yaml_config, dict):
        raise ConfigurationError(
            "Configuration file must contain a mapping",
            config_file=config_path,
            context={"loaded_type": type(yaml_config).__name__},
        )
    logger.debug(f"Loaded configuration from {config_path}")
    return yaml_config


def load_config(config_path: Optional[str], cli_args: Optional[Namespace] = None) -> RunConfig:
    """
    Loads configuration from a YAML file, merges explicit CLI arguments and the
    MRLR_THREADS environment fallback, and returns a validated RunConfig.

    Precedence: CLI flag > YAML file > environment (threads only) > defaults.
    """
    raw_config: Dict[str, Any] = {}

    # 1. YAML file
    if config_path:
        raw_config.update(_read_yaml(config_path))

    # 2. Environment fallback for threads
    env_threads = os.environ.get(EnvVars.THREADS)
    if env_threads and "threads" not in raw_config:
        raw_config["threads"] = env_threads
        logger.debug(f"Using {EnvVars.THREADS}={env_threads}")

    # 3. CLI arguments (only those explicitly provided)
    cli_dict = vars(cli_args) if cli_args is not None else {}
    als_section = raw_config.get("als") or {}
    overridden_keys = set()
    for cli_key, als_key in _ALS_CLI_KEYS.items():
        if cli_dict.get(cli_key) is not None and isinstance(als_section, dict):
            als_section = dict(als_section)
            als_section[als_key] = cli_dict[cli_key]
            overridden_keys.add(cli_key)
    for key in _RUN_CLI_KEYS:
        if cli_dict.get(key) is not None:
            raw_config[key] = cli_dict[key]
            overridden_keys.add(key)
    if als_section:
        raw_config["als"] = als_section
    if overridden_keys:
        logger.debug(f"Overridden config keys from CLI arguments: {sorted(overridden_keys)}")

    return validate_and_parse_config(raw_config)
