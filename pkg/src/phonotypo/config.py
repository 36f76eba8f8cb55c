"""Shipped defaults and package data access."""

import json
import os
from functools import lru_cache
from importlib import resources
from pathlib import Path

DATA_DIR_ENV = "PHONOTYPO_DATA_DIR"


def package_data(name: str):
    return resources.files("phonotypo").joinpath("data", name)


@lru_cache(maxsize=None)
def load_defaults() -> dict:
    return json.loads(package_data("defaults.json").read_text(encoding="utf-8"))


DEFAULT_LAMBDA = float(load_defaults()["lambda"])
DEFAULT_MIN_CONTAINMENT = float(load_defaults()["admissibility_min_containment"])


def resolve_input(path) -> Path:
    """Return ``path`` if it exists, else look it up under ``$PHONOTYPO_DATA_DIR``."""
    p = Path(path)
    if p.exists() or p.is_absolute():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    return p
