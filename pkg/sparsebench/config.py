"""
Runtime settings.

Values are resolved in order: defaults, then an optional YAML/TOML file (a top-level mapping or a
``sparsebench`` table), then ``SPARSEBENCH_*`` environment variables.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from os import PathLike
from typing import Any

from sparsebench.errors import ParameterError
from sparsebench.fs import config_load

ENV_PREFIX = "SPARSEBENCH_"
ENV_KEYS = ("log_level", "log_file", "workers", "progress")
TRUTHY = ("1", "true", "yes", "on")
FALSY = ("0", "false", "no", "off")


@dataclass
class Settings:
    log_level: str = "INFO"
    log_file: str | None = None
    workers: int = 1
    progress: bool = True
    enumeration_budget: int = 10**6
    lp_tol: float = 1e-9
    lp_maxiter: int = 200

    def __post_init__(self):
        if self.workers < 1:
            raise ParameterError("workers", self.workers, "must be >= 1")
        if self.enumeration_budget < 1:
            raise ParameterError("enumeration_budget", self.enumeration_budget, "must be >= 1")
        if not 0 < self.lp_tol < 1:
            raise ParameterError("lp_tol", self.lp_tol, "must be in (0, 1)")
        self.log_level = self.log_level.upper()


def _parse_bool(name: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in TRUTHY:
        return True
    if text in FALSY:
        return False
    raise ParameterError(name, value, f"must be one of {TRUTHY + FALSY}")


def _coerce(name: str, value: Any) -> Any:
    types = {f.name: f.type for f in fields(Settings)}
    kind = types[name]
    try:
        if kind == "bool":
            return _parse_bool(name, value)
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
    except (TypeError, ValueError):
        raise ParameterError(name, value, f"must be {kind}") from None
    if value in ("", None):
        return None
    return str(value)


def load_settings(path: str | PathLike | None = None, environ=None) -> Settings:
    """
    Build `Settings` from defaults, an optional config file and the environment.

    Args:
        path (str | PathLike, optional): YAML or TOML file.
        environ (Mapping, optional): Environment to read. Defaults to ``os.environ``.

    Raises:
        ParameterError: on unknown keys or values that cannot be converted.
    """
    values: dict[str, Any] = {}
    known = {f.name for f in fields(Settings)}
    if path is not None:
        data = config_load(path)
        data = data.get("sparsebench", data)
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ParameterError(key, value, f"is not a setting, expected one of {sorted(known)}")
            values[key] = _coerce(key, value)
    environ = os.environ if environ is None else environ
    for key in ENV_KEYS:
        env_name = ENV_PREFIX + key.upper()
        if env_name in environ:
            values[key] = _coerce(key, environ[env_name])
    return Settings(**values)


__all__ = ["Settings", "load_settings"]
