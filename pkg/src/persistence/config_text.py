"""
Text run configuration: UTF-8, one `dotted.key = value` per line, `#` comments.

    model.layers = 12
    modality.image.input_shape = 384,384,3
    task.pets.classes = 37
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Mapping, Union

from schemas.presets import PRESETS
from schemas.run_config import ConfigError, RunConfig, validate_run_config


def parse_config_text(text: str) -> Dict[str, Any]:
    """Nested mapping of raw string values; structural problems raise ConfigError."""
    root: Dict[str, Any] = {}
    seen: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        parts = key.split(".")
        if not key or any(not p for p in parts):
            raise ConfigError(key or f"line {lineno}", "malformed dotted key")
        if not value:
            raise ConfigError(key, "missing value")
        if key in seen:
            raise ConfigError(key, f"duplicate key (first set on line {seen[key]})")
        seen[key] = lineno
        node = root
        for i, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(".".join(parts[: i + 1]), "is a value and cannot also hold sub-keys")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError(key, "already holds sub-keys")
        node[parts[-1]] = value
    return root


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _flatten(prefix: str, value: Any, out: Dict[str, str]) -> None:
    if isinstance(value, Mapping):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif value is not None:
        out[prefix] = _format_value(value)


def config_items(config: RunConfig, *, include_output: bool = True) -> Dict[str, str]:
    """Flat `dotted.key -> text value` view, sorted by key."""
    flat: Dict[str, str] = {}
    _flatten("", config.model_dump(by_alias=True, exclude_none=True), flat)
    if not include_output:
        flat = {k: v for k, v in flat.items() if not k.startswith("output.")}
    return dict(sorted(flat.items()))


def dump_config_text(config: RunConfig, *, include_output: bool = True) -> str:
    return "".join(f"{k} = {v}\n" for k, v in config_items(config, include_output=include_output).items())


def config_from_items(items: Mapping[str, str]) -> RunConfig:
    return validate_run_config(parse_config_text("".join(f"{k} = {v}\n" for k, v in items.items())))


def load_config(source: Union[str, Path]) -> RunConfig:
    """A preset name (`base9`, `large9`, `toy3`) or a path to a text config file."""
    name = str(source)
    if name in PRESETS:
        return PRESETS[name]()
    path = Path(name)
    if not path.is_file():
        raise ConfigError("--config", f"{name!r} is neither a preset ({', '.join(sorted(PRESETS))}) nor a file")
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise ConfigError("--config", f"{name} is not UTF-8 text: {e}") from None
    return validate_run_config(parse_config_text(text))


def preset_names() -> List[str]:
    return sorted(PRESETS)
