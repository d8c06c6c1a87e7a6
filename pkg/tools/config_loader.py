"""Read and write the flat simulation config document."""
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from pydantic import ValidationError

from core.config import DiffusionParams, DriftTable, HazardParams, SimConfig
from utils.tracing import log_event

# Keys of the flat document; everything else is rejected.
CONFIG_KEYS = ("n", "dt", "omega", "x0", "seed", "alpha", "beta", "sigma_scale", "drift_knots")


class ConfigError(ValueError):
    """Invalid configuration document or value."""


def _format_validation_error(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        field = ".".join(str(part) for part in item["loc"]) or "config"
        lines.append(f"{field}: {item['msg']}")
    return "\n".join(lines)


def config_from_mapping(data: Dict[str, Any]) -> SimConfig:
    """Build a SimConfig from the flat key-value mapping."""
    for key in data:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}'")

    fields: Dict[str, Any] = {key: data[key] for key in ("n", "dt", "omega", "x0", "seed") if key in data}
    try:
        hazard = {key: data[key] for key in ("alpha", "beta") if key in data}
        if hazard:
            fields["hazard"] = HazardParams(**hazard)
        if "sigma_scale" in data:
            fields["diffusion"] = DiffusionParams(scale=data["sigma_scale"])
        if "drift_knots" in data:
            knots = data["drift_knots"]
            if not isinstance(knots, (list, tuple)):
                raise ConfigError("drift_knots: expected a list of [age, value] pairs")
            fields["drift"] = DriftTable(knots=tuple(tuple(pair) for pair in knots))
        return SimConfig(**fields)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from None
    except TypeError as e:
        raise ConfigError(f"drift_knots: {e}") from None


def parse_config(text: str) -> SimConfig:
    """Parse a YAML (or JSON) config document; missing keys take the defaults."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config document is not valid YAML: {e}") from None

    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config document must be a key-value mapping")
    return config_from_mapping(data)


def load_config(path: Union[str, Path]) -> SimConfig:
    """Read and parse a config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from None

    config = parse_config(text)
    log_event("CONFIG", f"Loaded {path}: n={config.n}, dt={config.dt}, omega={config.omega}, seed={config.seed}")
    return config


def config_echo(config: SimConfig) -> Dict[str, Any]:
    """Flat document that parse_config turns back into an equal SimConfig."""
    return {
        "n": config.n,
        "dt": config.dt,
        "omega": config.omega,
        "x0": config.x0,
        "seed": config.seed,
        "alpha": config.hazard.alpha,
        "beta": config.hazard.beta,
        "sigma_scale": config.diffusion.scale,
        "drift_knots": [[age, value] for age, value in config.drift.knots],
    }


def render_config(config: SimConfig) -> str:
    """YAML rendering of config_echo."""
    return yaml.safe_dump(config_echo(config), sort_keys=False, default_flow_style=None)


def apply_overrides(
    config: SimConfig,
    seed: Optional[int] = None,
    n: Optional[int] = None,
) -> SimConfig:
    """Apply command-line overrides on top of a loaded config."""
    echo = config_echo(config)
    if seed is not None:
        echo["seed"] = seed
    if n is not None:
        echo["n"] = n
    return config_from_mapping(echo)
