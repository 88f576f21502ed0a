"""
Configuration Module
Numeric defaults from the environment (.env) with optional YAML overrides.
"""

import os
from dataclasses import dataclass, asdict, fields, replace
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from errors import ValidationError

load_dotenv()


@dataclass(frozen=True)
class Settings:
    """Tolerances and sizes used across the numerical modules."""

    grid_size: int = 4096
    clark_grid: int = 65536
    taylor_degree: int = 256
    toeplitz_buffer: int = 32
    tail_tol: float = 1e-8
    clark_n: int = 64
    clark_tail_tol: float = 0.1
    ls_ridge: float = 1e-12
    ls_max_condition: float = 1e14
    outer_tol: float = 1e-5
    limit_tol: float = 1e-6
    cluster_tol: float = 1e-6
    converge_beta: float = 0.25
    converge_ratio: float = 0.5
    stall_rtol: float = 1e-3
    converged_floor: float = 1e-10
    log_level: str = "WARNING"
    progress: bool = False
    cache_dir: str = ".cache"
    redis_url: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


# environment variable -> settings field
ENV_KEYS = {
    'HB_GRID': 'grid_size',
    'HB_CLARK_GRID': 'clark_grid',
    'HB_TAYLOR': 'taylor_degree',
    'HB_TOEPLITZ_BUFFER': 'toeplitz_buffer',
    'HB_TAIL_TOL': 'tail_tol',
    'HB_CLARK_N': 'clark_n',
    'HB_CLARK_TAIL_TOL': 'clark_tail_tol',
    'HB_LS_RIDGE': 'ls_ridge',
    'HB_LS_MAX_CONDITION': 'ls_max_condition',
    'HB_OUTER_TOL': 'outer_tol',
    'HB_LIMIT_TOL': 'limit_tol',
    'HB_CLUSTER_TOL': 'cluster_tol',
    'HB_CONVERGE_BETA': 'converge_beta',
    'HB_CONVERGE_RATIO': 'converge_ratio',
    'HB_STALL_RTOL': 'stall_rtol',
    'HB_CONVERGED_FLOOR': 'converged_floor',
    'HB_LOG_LEVEL': 'log_level',
    'HB_PROGRESS': 'progress',
    'HB_CACHE_DIR': 'cache_dir',
    'REDIS_URL': 'redis_url',
}

_current: Optional[Settings] = None


def deep_merge(base: Dict, override: Dict) -> Dict:
    """
    Merge two dictionaries, nested dictionaries key by key.

    Args:
        base: Base dictionary
        override: Values taking precedence

    Returns:
        New merged dictionary
    """
    result = base.copy()
    for key, value in override.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = deep_merge(result[key], value)
        else:
            result[key] = value
    return result


def _coerce(name: str, value: Any) -> Any:
    kinds = {f.name: f.type for f in fields(Settings)}
    kind = kinds[name]
    if value is None:
        return None
    if kind in (bool, 'bool'):
        if isinstance(value, str):
            return value.strip().lower() in ('1', 'true', 'yes', 'on')
        return bool(value)
    if kind in (int, 'int'):
        return int(float(value))
    if kind in (float, 'float'):
        return float(value)
    return str(value)


def check_grid(M: int, name: str = "grid") -> int:
    """Grid sizes are powers of two in [16, 2**20]."""
    M = int(M)
    if M < 16 or M > 2 ** 20 or M & (M - 1):
        raise ValidationError(
            f"{name} must be a power of two in [16, 2^20], got {M}",
            {'field': name, 'value': M}
        )
    return M


def load_settings(config_path: Optional[str] = None) -> Settings:
    """
    Build settings from defaults, the environment and an optional YAML file.

    Args:
        config_path: YAML override file (defaults to $HB_CONFIG or hb.yaml)

    Returns:
        Settings instance
    """
    values = Settings().to_dict()

    for env_key, name in ENV_KEYS.items():
        raw = os.getenv(env_key)
        if raw is not None and raw != "":
            values[name] = _coerce(name, raw)

    config_path = config_path or os.getenv("HB_CONFIG", "hb.yaml")
    if config_path and os.path.exists(config_path):
        with open(config_path, 'r') as f:
            overrides = yaml.safe_load(f) or {}
        if not isinstance(overrides, dict):
            raise ValidationError(f"config file {config_path} must hold a mapping")
        unknown = set(overrides) - set(values)
        if unknown:
            raise ValidationError(
                f"unknown settings in {config_path}: {sorted(unknown)}",
                {'unknown': sorted(unknown)}
            )
        values = deep_merge(values, {k: _coerce(k, v) for k, v in overrides.items()})

    settings = Settings(**values)
    check_grid(settings.grid_size, 'grid_size')
    check_grid(settings.clark_grid, 'clark_grid')
    return settings


def get_settings() -> Settings:
    """Process-wide settings, loaded on first use."""
    global _current
    if _current is None:
        _current = load_settings()
    return _current


def update_settings(**overrides) -> Settings:
    """Replace selected fields of the process-wide settings."""
    global _current
    unknown = set(overrides) - set(Settings().to_dict())
    if unknown:
        raise ValidationError(f"unknown settings: {sorted(unknown)}")
    updated = replace(get_settings(), **overrides)
    check_grid(updated.grid_size, 'grid_size')
    check_grid(updated.clark_grid, 'clark_grid')
    _current = updated
    return _current


def reset_settings() -> Settings:
    """Drop overrides and reload from the environment."""
    global _current
    _current = None
    return get_settings()
