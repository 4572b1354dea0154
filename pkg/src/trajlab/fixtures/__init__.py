"""Shipped reference fixtures: curricula, behavior rules, scenarios.

`chain14` is a fourteen-course prerequisite chain. Note that the number of
terms such a chain forces depends entirely on offering parities, load caps
and edge semantics; the fixture documents no particular term count.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..curriculum import Curriculum, curriculum_from_json_obj


def fixture_path(name: str) -> Path:
    root = resources.files(__package__)
    candidate = Path(str(root / f"{name}.json"))
    if not candidate.exists():
        raise FileNotFoundError(f"no fixture named {name!r}")
    return candidate


def load_fixture_json(name: str) -> dict:
    with open(fixture_path(name), encoding="utf-8") as fh:
        return json.load(fh)


def load_fixture_curriculum(name: str) -> Curriculum:
    return curriculum_from_json_obj(load_fixture_json(name), ref=name)
