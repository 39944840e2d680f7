"""JSON Schemas for every JSON document the CLI prints."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

NAMES = ("file_report", "rewrite_plan", "rewrite_report", "equality_report",
         "bench_report", "findings", "fixture_report")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    if name not in NAMES:
        raise KeyError(name)
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())
