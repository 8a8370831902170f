"""Line-oriented ``key = value`` configuration files.

Units are fixed: energies and capacity in uWh, the sample period in hours,
ratios and thresholds as fractions. ``#`` starts a comment. Keys not given
keep their defaults, so an empty file yields the reference node.
"""
from __future__ import annotations

from pathlib import Path

from .core import EnergyTable
from .engine import SimConfig


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


def _int(text: str) -> int:
    return int(text.replace("_", ""))


def _float(text: str) -> float:
    return float(text)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _opt_float(text: str) -> float | None:
    return None if text.lower() in ("none", "auto") else float(text)


def _str(text: str) -> str:
    return text.strip("\"'")


# energy table keys -> EnergyTable field
ENERGY_KEYS = {
    "sleep_uwh": "sleep_per_iteration",
    "capture_uwh": "image_capture",
    "infer_uwh": "infer",
    "upload_uwh": "upload",
    "train_uwh": "train_per_image",
}

# config keys -> (SimConfig field, parser, unit/doc)
KEYS: dict[str, tuple[str, object, str]] = {
    "battery_capacity_uwh": ("battery_capacity", _int, "uWh"),
    "anomaly_ratio": ("anomaly_ratio", _float, "fraction of samples, 0..1"),
    "classification_reset": ("classification_reset", _int, "anomalies per successful retrain"),
    "sample_period_hours": ("sample_period_hours", _float, "hours"),
    "policy": ("policy", _str, "static | dynamic | autonomous"),
    "static_threshold": ("static_threshold", _int, "images"),
    "dynamic_threshold": ("dynamic_threshold", _int, "initial images"),
    "dynamic_min_threshold": ("dynamic_min_threshold", _int, "images"),
    "dynamic_reduce_after": ("dynamic_reduce_after", _int, "consecutive successes"),
    "validation_threshold": ("validation_threshold", _float, "accuracy, 0..1"),
    "n_cap": ("n_cap", _int, "images"),
    "seed": ("seed", _int, "64-bit unsigned"),
    "online_learning": ("online_learning", _bool, "boolean"),
    "reward": ("reward", _str, "relative | savings | energy"),
    "anomaly_value_uwh": ("anomaly_value_uwh", _opt_float, "uWh per anomaly, or none"),
    "alpha": ("alpha", _float, "learning rate"),
    "gamma": ("gamma", _float, "discount"),
    "epsilon": ("epsilon", _float, "initial exploration"),
    "alpha_decay": ("alpha_decay", _float, "per decision"),
    "epsilon_decay": ("epsilon_decay", _float, "per decision"),
    "visit_power": ("visit_power", _float, "0 disables visit-count step sizes"),
    "train_episodes": ("train_episodes", _int, "episodes"),
    "train_capacity_divisor": ("train_capacity_divisor", _int, "training battery = capacity / divisor"),
    "exploring_starts": ("exploring_starts", _bool, "boolean"),
    "train_start_max": ("train_start_max", _int, "images"),
}
KEYS.update({k: (k, _int, "uWh") for k in ENERGY_KEYS})


def _build(values: dict) -> SimConfig:
    energy = {ENERGY_KEYS[k]: values.pop(k) for k in list(values) if k in ENERGY_KEYS}
    return SimConfig(energy_table=EnergyTable(**energy), **values)


def parse_config(text: str) -> SimConfig:
    values: dict = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in KEYS:
            raise ConfigError("unknown key", lineno, key)
        if key in seen:
            raise ConfigError("duplicate key", lineno, key)
        seen.add(key)
        field, parse, _unit = KEYS[key]
        try:
            parsed = parse(value)
        except ValueError as exc:
            raise ConfigError(f"malformed value {value!r} ({exc})", lineno, key) from None
        # single-key range checks so the error can point at the line; energy
        # ordering rules involve several keys and are checked at the end
        try:
            if key in ENERGY_KEYS:
                if parsed <= 0:
                    raise ValueError("energies must be positive")
            else:
                _build({field: parsed})
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), lineno, key) from None
        values[field] = parsed
    try:
        config = _build(values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return config


def load_config(path: str | Path | None) -> SimConfig:
    """Read a config file; ``None`` gives the defaults."""
    if path is None:
        return SimConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(config: SimConfig) -> str:
    """Inverse of :func:`parse_config` for every documented key."""
    lines = []
    for key, (field, _parse, unit) in KEYS.items():
        if key in ENERGY_KEYS:
            value = getattr(config.energy_table, ENERGY_KEYS[key])
        else:
            value = getattr(config, field)
        lines.append(f"{key} = {'none' if value is None else value}  # {unit}")
    return "\n".join(lines) + "\n"
