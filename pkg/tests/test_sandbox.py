from __future__ import annotations

import json
import math
import random
from dataclasses import replace

import pytest

from travelrl.protocol import ToolCall
from travelrl.sandbox import (
    DbParseError,
    DbValidationError,
    FailureConfig,
    SandboxDb,
    call_tool,
    failure_message,
    generate_db,
    google_distance,
    load_db,
    parse_observation,
    run_tool,
    save_db,
    search_accommodation,
    search_attraction,
    search_city,
    search_flight,
    search_restaurant,
    validate_db,
)
from travelrl.sandbox.conformance import build_fixture, load_fixture
from travelrl.sandbox.tools import ObservationParseError


def test_generate_is_deterministic(tiny_db):
    again = generate_db(0, "tiny")
    assert again == tiny_db
    assert generate_db(1, "tiny") != tiny_db


def test_desk_scale_shape(desk_db):
    assert len(desk_db.cities) == 4
    assert all(len(c) == 5 for c in desk_db.cities.values())
    assert len(desk_db.dates) == 14
    validate_db(desk_db)


def test_unknown_scale():
    with pytest.raises(ValueError, match="unknown scale"):
        generate_db(0, "huge")


def test_save_load_roundtrip(tmp_path, tiny_db):
    save_db(tiny_db, tmp_path / "a")
    loaded = load_db(tmp_path / "a")
    assert loaded == tiny_db
    save_db(loaded, tmp_path / "b")
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_load_reports_file_line_field(tmp_path, tiny_db):
    root = save_db(tiny_db, tmp_path / "db")
    p = root / "restaurants.jsonl"
    lines = p.read_text().splitlines()
    obj = json.loads(lines[2])
    obj["avg_cost"] = "cheap"
    lines[2] = json.dumps(obj)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DbParseError) as ei:
        load_db(root)
    assert (ei.value.file, ei.value.line, ei.value.field) == ("restaurants.jsonl", 3, "avg_cost")


def test_load_rejects_bad_json_and_missing(tmp_path, tiny_db):
    root = save_db(tiny_db, tmp_path / "db")
    (root / "flights.jsonl").write_text("{not json\n")
    with pytest.raises(DbParseError, match="flights.jsonl:1"):
        load_db(root)
    (root / "flights.jsonl").unlink()
    with pytest.raises(FileNotFoundError, match="flights.jsonl"):
        load_db(root)
    with pytest.raises(FileNotFoundError):
        load_db(tmp_path / "nope")


def test_validation_lists_every_problem(tiny_db):
    bad_f = replace(tiny_db.flights[0], price=0)
    bad_h = replace(tiny_db.accommodations[0], room_type="Castle", minimum_nights=0)
    db = SandboxDb(tiny_db.cities, (bad_f,) + tiny_db.flights[1:], tiny_db.distances, tiny_db.restaurants,
                   tiny_db.attractions, (bad_h,) + tiny_db.accommodations[1:])
    with pytest.raises(DbValidationError) as ei:
        validate_db(db)
    text = "\n".join(ei.value.problems)
    assert "price must be > 0" in text
    assert "unknown room type" in text
    assert "minimum_nights" in text


def test_tools_render_and_parse_back(tiny_db):
    db = tiny_db
    f = db.flights[0]
    d = db.distances[0]
    city = db.all_cities[0]
    results = {
        "SearchFlight": search_flight(db, f.departure_city, f.destination_city, f.date),
        "GoogleDistanceMatrix": google_distance(db, d.departure_city, d.destination_city, d.mode),
        "SearchRestaurant": search_restaurant(db, city),
        "SearchAttraction": search_attraction(db, city),
        "SearchAccommodation": search_accommodation(db, city),
    }
    for name, res in results.items():
        assert res.records, name
        assert parse_observation(name, res.text) == res.records
    flights = results["SearchFlight"].records
    assert all(x.date == f.date and x.departure_city == f.departure_city for x in flights)
    rest = results["SearchRestaurant"].records
    assert {r.name for r in rest} == {r.name for r in db.restaurants if r.city == city}


def test_search_city_lists_state(tiny_db):
    state = sorted(tiny_db.cities)[0]
    res = search_city(tiny_db, state)
    assert set(res.records) == set(tiny_db.cities[state])
    assert search_city(tiny_db, "Atlantis").records == ()


def test_not_found_and_bad_args(tiny_db):
    assert search_restaurant(tiny_db, "Atlantis").text == (
        "No valid information found. Please rethink your restaurant search and try again."
    )
    assert parse_observation("SearchRestaurant", search_restaurant(tiny_db, "Atlantis").text) == ()
    assert run_tool(tiny_db, "BookHotel", {}).text.startswith("Error: Unknown tool BookHotel")
    assert "Invalid arguments for SearchFlight" in run_tool(tiny_db, "SearchFlight", {"departure": "x"}).text
    with pytest.raises(ObservationParseError):
        parse_observation("SearchCity", "garbage")


def test_driving_alias(tiny_db):
    d = next(x for x in tiny_db.distances if x.mode == "self-driving")
    res = google_distance(tiny_db, d.departure_city, d.destination_city, "driving")
    assert res.records and res.records[0].cost == d.cost


def test_conformance_fixture_matches():
    assert build_fixture() == load_fixture()


def test_failure_string_exact():
    assert failure_message("SearchFlight") == "Error: Current tool SearchFlight is not available."


def test_failure_rate_and_zero(tiny_db):
    call = ToolCall("SearchCity", {"state": sorted(tiny_db.cities)[0]})
    n, p = 10_000, 0.1
    rng = random.Random(123)
    hits = sum(call_tool(tiny_db, call, FailureConfig(p), rng) == failure_message("SearchCity") for _ in range(n))
    assert abs(hits / n - p) <= 3 * math.sqrt(p * (1 - p) / n)
    rng = random.Random(123)
    assert all(call_tool(tiny_db, call, FailureConfig(0.0), rng) != failure_message("SearchCity") for _ in range(2000))


def test_failure_schedule_depends_only_on_stream(tiny_db):
    call = ToolCall("SearchCity", {"state": sorted(tiny_db.cities)[0]})
    r1, r2 = random.Random(5), random.Random(5)
    s1 = [call_tool(tiny_db, call, FailureConfig(0.3), r1) for _ in range(200)]
    s2 = [call_tool(tiny_db, call, FailureConfig(0.3), r2) for _ in range(200)]
    assert s1 == s2
    assert failure_message("SearchCity") in s1


def test_failure_probability_bounds():
    with pytest.raises(ValueError):
        FailureConfig(1.5)
    with pytest.raises(ValueError):
        FailureConfig(-0.1)
