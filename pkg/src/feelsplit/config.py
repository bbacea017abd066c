"""Run configuration files.

Configs are INI-style text with one section per component::

    [run]
    scheme = proposed
    rounds = 100

    [training]
    learning_rate = 0.001

A resolved ``run_meta.json`` written by a previous run is accepted in place of
an INI file.  ``--set section.key=value`` overrides are applied last.  Every
error names the offending key path and, when it came from a file, its line.
"""

from __future__ import annotations

import configparser
import dataclasses
import json
import re
import typing
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .data import GlobalDataSpec
from .energy import FleetConfig
from .learning import TrainingConfig
from .selection import SelectionConfig
from .similarity import SimilarityConfig
from .simulation import BenchConfig, RunConfig

SECTIONS: dict[str, type] = {
    "data": GlobalDataSpec,
    "training": TrainingConfig,
    "similarity": SimilarityConfig,
    "selection": SelectionConfig,
    "fleet": FleetConfig,
    "bench": BenchConfig,
}
RUN_KEYS = tuple(f.name for f in dataclasses.fields(RunConfig) if f.name not in SECTIONS)
REQUIRED = {("run", "scheme")}


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None, source: str | None = None):
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        elif line:
            where = f"line {line}: "
        if key:
            where += f"{key}: "
        super().__init__(where + message)
        self.key = key
        self.line = line


# ---------------------------------------------------------------------------
# value coercion


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(value: Any, tp: Any) -> Any:
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null")):
            return None
        return _coerce(value, inner[0])
    if origin is tuple:
        items = [v for v in value.split(",") if v.strip()] if isinstance(value, str) else list(value)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(_coerce(v, args[0]) for v in items)
        if len(items) != len(args):
            raise TypeError(f"expected {len(args)} comma-separated values, got {len(items)}")
        return tuple(_coerce(v, a) for v, a in zip(items, args))
    if tp is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.strip().lower() in _TRUE | _FALSE:
            return value.strip().lower() in _TRUE
        raise TypeError(f"expected a boolean, got {value!r}")
    if tp is int:
        if isinstance(value, bool) or isinstance(value, float):
            raise TypeError(f"expected an integer, got {value!r}")
        if isinstance(value, int):
            return value
        try:
            return int(str(value).strip())
        except ValueError:
            raise TypeError(f"expected an integer, got {value!r}") from None
    if tp is float:
        if isinstance(value, bool):
            raise TypeError(f"expected a number, got {value!r}")
        try:
            return float(str(value).strip()) if isinstance(value, str) else float(value)
        except (TypeError, ValueError):
            raise TypeError(f"expected a number, got {value!r}") from None
    if tp is str:
        if not isinstance(value, str):
            raise TypeError(f"expected a string, got {value!r}")
        return value.strip().strip('"').strip("'")
    raise TypeError(f"unsupported field type {tp!r}")


def _hints(cls: type) -> dict[str, Any]:
    return typing.get_type_hints(cls)


# ---------------------------------------------------------------------------
# locating keys in source text for error messages


class _Locator:
    def __init__(self, text: str | None, source: str | None):
        self.lines = text.splitlines() if text else []
        self.source = source

    def line_of(self, section: str, key: str | None = None) -> int | None:
        in_section = False
        header = re.compile(r'^\s*(\[\s*(?P<ini>[^\]]+?)\s*\]|"(?P<json>[^"]+)"\s*:\s*\{)')
        for no, line in enumerate(self.lines, start=1):
            m = header.match(line)
            if m:
                name = m.group("ini") or m.group("json")
                in_section = name == section
                if in_section and key is None:
                    return no
                continue
            if in_section and key is not None and re.match(rf'^\s*"?{re.escape(key)}"?\s*[=:]', line):
                return no
        return None

    def error(self, message: str, section: str, key: str | None = None) -> ConfigError:
        path = f"{section}.{key}" if key else section
        return ConfigError(message, path, self.line_of(section, key), self.source)


# ---------------------------------------------------------------------------


def _split_override(item: str) -> tuple[str, str, str]:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form section.key=value")
    path, value = item.split("=", 1)
    path = path.strip()
    if path.count(".") != 1:
        raise ConfigError("override keys must be dotted section.key paths", path)
    section, key = path.split(".")
    return section, key, value


def config_from_dict(
    raw: Mapping[str, Mapping[str, Any]],
    overrides: Sequence[str] = (),
    text: str | None = None,
    source: str | None = None,
) -> RunConfig:
    loc = _Locator(text, source)
    merged: dict[str, dict[str, Any]] = {name: dict(values) for name, values in raw.items()}
    overridden: set[tuple[str, str]] = set()
    for item in overrides:
        section, key, value = _split_override(item)
        merged.setdefault(section, {})[key] = value
        overridden.add((section, key))

    def fail(message, section, key=None):
        from_set = (section, key) in overridden or (key is None and section not in raw)
        if from_set:
            return ConfigError(message, f"{section}.{key}" if key else section, None, "--set")
        return loc.error(message, section, key)

    for section in merged:
        if section != "run" and section not in SECTIONS:
            raise fail("unknown section", section)
    for section, key in sorted(REQUIRED):
        if key not in merged.get(section, {}):
            raise ConfigError("missing required key", f"{section}.{key}", None, source)

    run_hints = _hints(RunConfig)
    run_kwargs: dict[str, Any] = {}
    for key, value in merged.get("run", {}).items():
        if key not in RUN_KEYS:
            raise fail("unknown key", "run", key)
        try:
            run_kwargs[key] = _coerce(value, run_hints[key])
        except TypeError as exc:
            raise fail(str(exc), "run", key) from None

    for section, cls in SECTIONS.items():
        hints = _hints(cls)
        kwargs: dict[str, Any] = {}
        for key, value in merged.get(section, {}).items():
            if key not in hints:
                raise fail("unknown key", section, key)
            try:
                kwargs[key] = _coerce(value, hints[key])
            except TypeError as exc:
                raise fail(str(exc), section, key) from None
        try:
            run_kwargs[section] = cls(**kwargs)
        except ValueError as exc:
            raise fail(str(exc), section) from None
    try:
        return RunConfig(**run_kwargs)
    except ValueError as exc:
        raise fail(str(exc), "run") from None


def _read_ini(text: str, source: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc).splitlines()[0], None, line, source) from None
    return {name: dict(parser.items(name)) for name in parser.sections()}


def parse_config(path: Path | str, overrides: Sequence[str] = ()) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", None, None, str(path)) from None
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, None, exc.lineno, str(path)) from None
        raw = doc.get("config", doc) if isinstance(doc, dict) else None
        if not isinstance(raw, dict):
            raise ConfigError("JSON config must be an object of sections", None, None, str(path))
    else:
        raw = _read_ini(text, str(path))
    return config_from_dict(raw, overrides, text, str(path))


def config_to_dict(cfg: RunConfig) -> dict[str, dict[str, Any]]:
    """JSON-ready nested dict that :func:`config_from_dict` turns back into ``cfg``."""

    def plain(v):
        return list(v) if isinstance(v, tuple) else v

    out: dict[str, dict[str, Any]] = {"run": {k: plain(getattr(cfg, k)) for k in RUN_KEYS}}
    for section in SECTIONS:
        sub = getattr(cfg, section)
        out[section] = {f.name: plain(getattr(sub, f.name)) for f in dataclasses.fields(sub)}
    return out


def format_ini(cfg: RunConfig) -> str:
    lines = []
    for section, values in config_to_dict(cfg).items():
        lines.append(f"[{section}]")
        for key, value in values.items():
            if value is None:
                value = "none"
            elif isinstance(value, list):
                value = ", ".join(repr(v) for v in value)
            elif isinstance(value, bool):
                value = str(value).lower()
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
