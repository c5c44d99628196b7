"""JSON loading and schema validation for every config document."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema


class ConfigError(ValueError):
    pass


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    text = resources.files("nanorace").joinpath(f"schemas/{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc: Any, name: str) -> None:
    try:
        jsonschema.validate(doc, schema(name))
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{name} config invalid at {where}: {e.message}") from None


def load_json(path: str | Path, name: str | None = None) -> Any:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None
    if name is not None:
        validate(doc, name)
    return doc


def dump_json(obj: Any) -> str:
    # sorted keys + repr floats keep re-runs byte-identical
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
