"""Report files: JSON and CSV with names derived from the config, validated against shipped schemas."""
from __future__ import annotations

import csv
import hashlib
import json
from importlib import resources
from pathlib import Path
from typing import Iterable

import jsonschema

SCHEMAS = ("accuracy", "bench", "simulation", "trace")


def config_tag(config: dict) -> str:
    """Short stable hash of a config, used in output file names."""
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:10]


def load_schema(name: str) -> dict:
    if name not in SCHEMAS:
        raise ValueError(f"no schema named {name!r}")
    return json.loads(resources.files("helo").joinpath(f"data/schemas/{name}.schema.json").read_text())


def validate(doc, name: str) -> None:
    jsonschema.validate(doc, load_schema(name))


def write_json(doc, path: Path, schema: str | None = None) -> Path:
    if schema is not None:
        validate(doc, schema)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
    return path


def write_csv(rows: Iterable[dict], path: Path) -> Path:
    rows = list(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if rows:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return path
