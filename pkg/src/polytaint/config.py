"""Tool configuration: a flat TOML file plus ``--key=value`` overrides."""
from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .checker import CheckConfig
from .infer import SearchConfig


class ConfigError(Exception):
    pass


# key -> (section, attribute, type)
KEYS: dict[str, tuple[str, str, type]] = {
    "annotated_packages": ("check", "annotated_packages", str),
    "sources": ("check", "sources", list),
    "sinks": ("check", "sinks", list),
    "sanitizers": ("check", "sanitizers", list),
    "stub_paths": ("check", "stub_paths", list),
    "emit_fixes": ("check", "emit_fixes", bool),
    "construct_defaulting": ("check", "construct_defaulting", bool),
    "generics_fixes": ("check", "generics_fixes", bool),
    "polytaint_fixes": ("check", "polytaint_fixes", bool),
    "jobs": ("check", "jobs", int),
    "poly_depth": ("search", "poly_depth", int),
    "search_depth": ("search", "outer_depth", int),
    "local_opt": ("search", "local_opt", bool),
    "batching": ("search", "batching", bool),
    "in_place": ("search", "in_place", bool),
    "max_anns_per_warning": ("search", "max_anns_per_warning", int),
    "budget": ("search", "budget", int),
    "src_dirs": ("paths", "src_dirs", list),
    "stub_dir": ("paths", "stub_dir", str),
    "cache_dir": ("paths", "cache_dir", str),
    "out_dir": ("paths", "out_dir", str),
}
PATH_KEYS = {"stub_paths", "src_dirs", "stub_dir", "cache_dir", "out_dir"}


@dataclass
class ToolConfig:
    check: CheckConfig = field(default_factory=CheckConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    src_dirs: list[str] = field(default_factory=lambda: ["."])
    stub_dir: Optional[str] = None
    cache_dir: str = ".polytaint-cache"
    out_dir: str = "polytaint-out"

    @property
    def stub_paths(self) -> list[str]:
        paths = list(self.check.stub_paths)
        if self.stub_dir:
            paths.append(self.stub_dir)
        return paths


def _coerce(key: str, value: Any, typ: type):
    if typ is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "1", "yes", "on"):
            return True
        if isinstance(value, str) and value.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if typ is int:
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if typ is list:
        if isinstance(value, str):
            return [v.strip() for v in value.split(",") if v.strip()]
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            return list(value)
        raise ConfigError(f"{key}: expected a list of strings")
    if not isinstance(value, str):
        raise ConfigError(f"{key}: expected a string")
    return value


def build_config(values: dict[str, Any], base_dir: Path | str = ".", check_paths: bool = True) -> ToolConfig:
    """Assemble a ToolConfig from flat key/values; relative paths resolve against ``base_dir``."""
    base_dir = Path(base_dir)
    check: dict[str, Any] = {}
    search: dict[str, Any] = {}
    paths: dict[str, Any] = {}
    for key, raw in values.items():
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}")
        section, attr, typ = KEYS[key]
        v = _coerce(key, raw, typ)
        if key in PATH_KEYS:
            if isinstance(v, list):
                v = [str(base_dir / x) if not os.path.isabs(x) else x for x in v]
            else:
                v = str(base_dir / v) if not os.path.isabs(v) else v
        {"check": check, "search": search, "paths": paths}[section][attr] = v
    for k in ("sources", "sinks", "sanitizers", "stub_paths"):
        if k in check:
            check[k] = tuple(check[k])
    try:
        re.compile(check.get("annotated_packages", ".*"))
    except re.error as e:
        raise ConfigError(f"annotated_packages is not a valid regular expression: {e}") from None
    for s in check.get("sinks", ()):
        if ":" in s and not s.rpartition(":")[2].isdigit():
            raise ConfigError(f"sink {s!r}: parameter index must be an integer")
    # outputs default to the directory holding the configuration
    paths.setdefault("cache_dir", str(base_dir / ".polytaint-cache"))
    paths.setdefault("out_dir", str(base_dir / "polytaint-out"))
    try:
        cfg = ToolConfig(CheckConfig(**check), SearchConfig(**search), **paths)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if check_paths:
        for p in list(cfg.src_dirs) + cfg.stub_paths:
            if not Path(p).exists():
                raise ConfigError(f"path does not exist: {p}")
    return cfg


def load_config(path: Optional[str], overrides: Optional[dict[str, Any]] = None,
                check_paths: bool = True) -> ToolConfig:
    values: dict[str, Any] = {}
    base = Path(".")
    if path is not None:
        p = Path(path)
        try:
            values = tomllib.loads(p.read_text())
        except (OSError, tomllib.TOMLDecodeError) as e:
            raise ConfigError(f"{path}: {e}") from None
        base = p.parent
    cfg_values = dict(values)
    for k, v in (overrides or {}).items():
        cfg_values[k] = v
    # overrides given on the command line are relative to the working directory
    rel_cli = {k for k in (overrides or {}) if k in PATH_KEYS}
    if rel_cli:
        file_part = {k: v for k, v in cfg_values.items() if k not in rel_cli}
        cfg = build_config(file_part, base, check_paths=False)
        cli_part = build_config({k: cfg_values[k] for k in rel_cli}, ".", check_paths=False)
        for k in rel_cli:
            section, attr, _ = KEYS[k]
            target = cfg if section == "paths" else getattr(cfg, section)
            src = cli_part if section == "paths" else getattr(cli_part, section)
            setattr(target, attr, getattr(src, attr))
        if check_paths:
            for p in list(cfg.src_dirs) + cfg.stub_paths:
                if not Path(p).exists():
                    raise ConfigError(f"path does not exist: {p}")
        return cfg
    return build_config(cfg_values, base, check_paths)
