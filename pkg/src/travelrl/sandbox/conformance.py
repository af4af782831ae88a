"""Canonical tool responses on a fixed database, shipped as a byte-level fixture."""

from __future__ import annotations

import json
import random
from importlib import resources
from pathlib import Path
from typing import Any

from ..protocol import ToolCall
from .db import SandboxDb
from .generate import generate_db
from .tools import TOOL_ARGS, FailureConfig, call_tool

FIXTURE_SEED = 0
FIXTURE_SCALE = "tiny"
FIXTURE_NAME = "tool_conformance.json"


def conformance_calls(db: SandboxDb) -> list[tuple[str, dict[str, Any]]]:
    """Found, not-found and malformed calls for every tool."""
    state = sorted(db.cities)[0]
    a, b = db.cities[state][0], db.cities[state][1]
    f = db.flights[0]
    d = db.distances[0]
    date = db.dates[0]
    return [
        ("SearchCity", {"state": state}),
        ("SearchCity", {"state": "Atlantis"}),
        ("SearchFlight", {"departure": f.departure_city, "destination": f.destination_city, "date": f.date}),
        ("SearchFlight", {"departure": a, "destination": a, "date": date}),
        ("GoogleDistanceMatrix", {"departure": d.departure_city, "destination": d.destination_city, "mode": d.mode}),
        ("GoogleDistanceMatrix", {"departure": d.departure_city, "destination": d.destination_city, "mode": "driving"}),
        ("GoogleDistanceMatrix", {"departure": a, "destination": "Atlantis", "mode": "taxi"}),
        ("SearchRestaurant", {"city": b}),
        ("SearchRestaurant", {"city": "Atlantis"}),
        ("SearchAttraction", {"city": b}),
        ("SearchAttraction", {"city": "Atlantis"}),
        ("SearchAccommodation", {"city": b}),
        ("SearchAccommodation", {"city": "Atlantis"}),
        ("SearchCity", {}),
        ("SearchFlight", {"departure": a, "destination": b}),
        ("GoogleDistanceMatrix", {"departure": a, "destination": b, "mode": "bicycle"}),
        ("BookHotel", {"city": a}),
    ]


def build_fixture() -> dict[str, Any]:
    db = generate_db(FIXTURE_SEED, FIXTURE_SCALE)
    calls = conformance_calls(db)
    cases = [{"name": n, "arguments": a, "response": call_tool(db, ToolCall(n, a))} for n, a in calls]
    # injected failures, one per tool, on that tool's first (valid) call
    firsts: dict[str, dict[str, Any]] = {}
    for n, a in calls:
        firsts.setdefault(n, a)
    for n in TOOL_ARGS:
        resp = call_tool(db, ToolCall(n, firsts[n]), FailureConfig(1.0), random.Random(0))
        cases.append({"name": n, "arguments": firsts[n], "failure_probability": 1.0, "response": resp})
    return {"seed": FIXTURE_SEED, "scale": FIXTURE_SCALE, "cases": cases}


def load_fixture() -> dict[str, Any]:
    return json.loads(resources.files("travelrl").joinpath("data", FIXTURE_NAME).read_text(encoding="utf-8"))


def write_fixture(path: str | Path) -> Path:
    p = Path(path)
    p.write_text(json.dumps(build_fixture(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return p
