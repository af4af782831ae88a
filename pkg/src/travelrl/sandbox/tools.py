"""The six query tools, their canonical text renderings, and failure injection.

Every list-returning tool renders a header line ``A <Tool> for ... found the
following N <things>:`` followed by numbered entries. ``parse_observation``
inverts each rendering so the structured result can be recovered from text.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Any, Mapping

from .db import (
    AccommodationRecord,
    AttractionRecord,
    DistanceRecord,
    FlightRecord,
    RestaurantRecord,
    SandboxDb,
)

TOOL_ARGS: dict[str, tuple[str, ...]] = {
    "SearchCity": ("state",),
    "SearchFlight": ("departure", "destination", "date"),
    "GoogleDistanceMatrix": ("departure", "destination", "mode"),
    "SearchRestaurant": ("city",),
    "SearchAttraction": ("city",),
    "SearchAccommodation": ("city",),
}

TOOL_DESCRIPTIONS: dict[str, str] = {
    "SearchCity": "List the cities of a state",
    "SearchFlight": "List flights from one city to another on a date given as YYYY-MM-DD",
    "GoogleDistanceMatrix": "Driving duration, distance and cost between two cities; mode is self-driving or taxi",
    "SearchRestaurant": "List restaurants in a city with average cost, cuisines and rating",
    "SearchAttraction": "List sights to visit in a city",
    "SearchAccommodation": "List places to stay in a city with price, room type, house rules and minimum nights",
}

_PURPOSE = {
    "SearchCity": "city search",
    "SearchFlight": "flight search",
    "GoogleDistanceMatrix": "distance search",
    "SearchRestaurant": "restaurant search",
    "SearchAttraction": "attraction search",
    "SearchAccommodation": "accommodation search",
}

# accepted spellings for GoogleDistanceMatrix's mode argument
MODE_ALIASES = {"driving": "self-driving", "self-driving": "self-driving", "taxi": "taxi"}

FAILURE_TEMPLATE = "Error: Current tool {tool_name} is not available."


def failure_message(tool_name: str) -> str:
    return FAILURE_TEMPLATE.format(tool_name=tool_name)


def not_found_message(tool_name: str) -> str:
    return f"No valid information found. Please rethink your {_PURPOSE[tool_name]} and try again."


def no_distance_message(departure: str, destination: str) -> str:
    return f"Sorry, we cannot find the distance between {departure} and {destination}."


@dataclass(frozen=True)
class FailureConfig:
    probability: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"failure probability must lie in [0, 1], got {self.probability}")


@dataclass(frozen=True)
class ToolResult:
    records: tuple[Any, ...]
    text: str


def _num(x: float) -> str:
    return f"{x:.1f}" if round(x, 1) == x else repr(float(x))


def _km(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else _num(x)


def _flight_span(minutes: int) -> str:
    return f"{minutes // 60} hours {minutes % 60} minutes"


def _drive_span(minutes: int) -> str:
    return f"{minutes // 60} hours {minutes % 60} mins"


def search_city(db: SandboxDb, state: str) -> ToolResult:
    state = state.strip()
    names = db.cities.get(state, ())
    if not names:
        return ToolResult((), not_found_message("SearchCity"))
    text = f"A SearchCity for state {state} found the following {len(names)} cities: {', '.join(names)}"
    return ToolResult(tuple(names), text)


def search_flight(db: SandboxDb, departure: str, destination: str, date: str) -> ToolResult:
    departure, destination, date = departure.strip(), destination.strip(), date.strip()
    found = db.flights_by_route.get((departure, destination, date), ())
    if not found:
        return ToolResult((), not_found_message("SearchFlight"))
    lines = [
        f"A SearchFlight for {departure} to {destination} on {date} found the following {len(found)} flights:"
    ]
    for i, f in enumerate(found, 1):
        lines.append(
            f"{i}. [{f.flight_number}] ${f.price}. Departure: {f.departure_time}, Arrival: {f.arrival_time}, "
            f"Actual Elapsed Time: {_flight_span(f.elapsed)}, Distance: {_num(f.distance_miles)} miles"
        )
    return ToolResult(found, "\n".join(lines))


def google_distance(db: SandboxDb, departure: str, destination: str, mode: str) -> ToolResult:
    departure, destination = departure.strip(), destination.strip()
    label = mode.strip().lower()
    canonical = MODE_ALIASES[label]
    if departure not in db.city_state or destination not in db.city_state:
        return ToolResult((), not_found_message("GoogleDistanceMatrix"))
    rec = db.distance_by_route.get((departure, destination, canonical))
    if rec is None:
        return ToolResult((), no_distance_message(departure, destination))
    text = (
        "A GoogleDistanceMatrix found the following information:\n"
        f"{label}, from {departure} to {destination}, duration: {_drive_span(rec.duration)}, "
        f"distance: {_km(rec.distance_km)} km, cost: ${rec.cost}"
    )
    return ToolResult((rec,), text)


def search_restaurant(db: SandboxDb, city: str) -> ToolResult:
    city = city.strip()
    found = db.restaurants_by_city.get(city, ())
    if not found:
        return ToolResult((), not_found_message("SearchRestaurant"))
    lines = [f"A SearchRestaurant for city {city} found the following {len(found)} restaurants:"]
    for i, r in enumerate(found, 1):
        lines.append(
            f"{i}. [{r.name}] Avg. Cost ${r.avg_cost}. Cuisines: {', '.join(r.cuisines)}. Rating: {_num(r.rating)}"
        )
    return ToolResult(found, "\n".join(lines))


def search_attraction(db: SandboxDb, city: str) -> ToolResult:
    city = city.strip()
    found = db.attractions_by_city.get(city, ())
    if not found:
        return ToolResult((), not_found_message("SearchAttraction"))
    head = f"A SearchAttraction for city {city} found the following {len(found)} attractions:"
    entries = [
        f"{i}. [{a.name}]({a.url}) Address: {a.address}. Contact: {a.contact}" for i, a in enumerate(found, 1)
    ]
    return ToolResult(found, head + "\n" + "\n\n".join(entries))


def search_accommodation(db: SandboxDb, city: str) -> ToolResult:
    city = city.strip()
    found = db.accommodations_by_city.get(city, ())
    if not found:
        return ToolResult((), not_found_message("SearchAccommodation"))
    lines = [f"A SearchAccommodation for {city} found the following {len(found)} accommodations:"]
    for i, h in enumerate(found, 1):
        rules = " & ".join(h.house_rules) if h.house_rules else "-"
        lines.append(
            f"{i}. [{h.name}] ${_num(h.price)}. Room Type: {h.room_type}, House Rules: {rules}, "
            f"Minimum Nights: {_num(h.minimum_nights)}, Maximum Occupancy: {h.maximum_occupancy}, "
            f"Review Rate Number: {_num(h.review_rate)}"
        )
    return ToolResult(found, "\n".join(lines))


_DISPATCH = {
    "SearchCity": search_city,
    "SearchFlight": search_flight,
    "GoogleDistanceMatrix": google_distance,
    "SearchRestaurant": search_restaurant,
    "SearchAttraction": search_attraction,
    "SearchAccommodation": search_accommodation,
}


def _argument_problem(name: str, arguments: Mapping[str, Any]) -> str | None:
    wanted = TOOL_ARGS[name]
    missing = [a for a in wanted if a not in arguments]
    if missing:
        return f"missing argument(s) {', '.join(missing)}"
    extra = sorted(a for a in arguments if a not in wanted)
    if extra:
        return f"unexpected argument(s) {', '.join(extra)}"
    for a in wanted:
        if not isinstance(arguments[a], str):
            return f"argument {a} must be a string"
    if name == "GoogleDistanceMatrix" and arguments["mode"].strip().lower() not in MODE_ALIASES:
        return "mode must be one of self-driving, driving, taxi"
    return None


def run_tool(db: SandboxDb, name: str, arguments: Mapping[str, Any]) -> ToolResult:
    """Execute a tool without failure injection. Bad calls yield error text."""
    if name not in _DISPATCH:
        return ToolResult((), f"Error: Unknown tool {name}. Available tools: {', '.join(TOOL_ARGS)}.")
    problem = _argument_problem(name, arguments)
    if problem:
        return ToolResult((), f"Error: Invalid arguments for {name}: {problem}.")
    return _DISPATCH[name](db, *(arguments[a] for a in TOOL_ARGS[name]))


def call_tool(
    db: SandboxDb,
    call: Any,
    failure: FailureConfig | None = None,
    rng: random.Random | None = None,
) -> str:
    """Run ``call`` (anything with ``name`` and ``arguments``) and return the observation.

    One uniform draw is taken from ``rng`` per invocation of a known tool, so
    a failure schedule depends only on the stream and the call index.
    """
    name = call.name
    if name in _DISPATCH and rng is not None:
        u = rng.random()
        if failure is not None and u < failure.probability:
            return failure_message(name)
    return run_tool(db, name, call.arguments).text


# -- parsing observations back into records -------------------------------------------------

_FLIGHT_HEAD = re.compile(r"^A SearchFlight for (.+) to (.+) on (\S+) found the following (\d+) flights:$")
_FLIGHT_ROW = re.compile(
    r"^(\d+)\. \[(F\d+)\] \$(\d+)\. Departure: (\d\d:\d\d), Arrival: (\d\d:\d\d), "
    r"Actual Elapsed Time: (\d+) hours (\d+) minutes, Distance: ([\d.e+-]+) miles$"
)
_CITY_HEAD = re.compile(r"^A SearchCity for state (.+) found the following (\d+) cities: (.*)$")
_DIST = re.compile(
    r"^(\S+), from (.+) to (.+), duration: (\d+) hours (\d+) mins, distance: ([\d.e+-]+) km, cost: \$(\d+)$"
)
_REST_HEAD = re.compile(r"^A SearchRestaurant for city (.+) found the following (\d+) restaurants:$")
_REST_ROW = re.compile(r"^(\d+)\. \[(.*)\] Avg\. Cost \$(\d+)\. Cuisines: (.*)\. Rating: ([\d.e+-]+)$")
_ATTR_HEAD = re.compile(r"^A SearchAttraction for city (.+) found the following (\d+) attractions:$")
_ATTR_ROW = re.compile(r"^(\d+)\. \[(.*)\]\((.*)\) Address: (.*)\. Contact: (.*)$")
_ACC_HEAD = re.compile(r"^A SearchAccommodation for (.+) found the following (\d+) accommodations:$")
_ACC_ROW = re.compile(
    r"^(\d+)\. \[(.*)\] \$([\d.e+-]+)\. Room Type: (.*), House Rules: (.*), Minimum Nights: ([\d.]+), "
    r"Maximum Occupancy: (\d+), Review Rate Number: ([\d.e+-]+)$"
)


class ObservationParseError(ValueError):
    pass


def _match(rx: re.Pattern[str], line: str) -> re.Match[str]:
    m = rx.match(line)
    if m is None:
        raise ObservationParseError(f"unrecognised line: {line!r}")
    return m


def parse_observation(tool_name: str, text: str) -> tuple[Any, ...]:
    """Recover the records a tool rendered. Not-found texts give ``()``."""
    if text.startswith("No valid information found.") or text.startswith("Sorry, we cannot find"):
        return ()
    if tool_name == "SearchCity":
        m = _match(_CITY_HEAD, text)
        return tuple(m.group(3).split(", "))
    if tool_name == "GoogleDistanceMatrix":
        head, _, body = text.partition("\n")
        if head != "A GoogleDistanceMatrix found the following information:":
            raise ObservationParseError("bad distance header")
        m = _match(_DIST, body)
        return (
            DistanceRecord(
                departure_city=m.group(2),
                destination_city=m.group(3),
                mode=MODE_ALIASES[m.group(1)],
                duration=int(m.group(4)) * 60 + int(m.group(5)),
                distance_km=float(m.group(6)),
                cost=int(m.group(7)),
            ),
        )
    if tool_name == "SearchAttraction":
        head, _, body = text.partition("\n")
        city = _match(_ATTR_HEAD, head).group(1)
        out = []
        for entry in body.split("\n\n"):
            m = _match(_ATTR_ROW, entry)
            out.append(AttractionRecord(m.group(2), city, m.group(3), m.group(4), m.group(5)))
        return tuple(out)

    lines = text.split("\n")
    head, rows = lines[0], lines[1:]
    if tool_name == "SearchFlight":
        hm = _match(_FLIGHT_HEAD, head)
        dep, dest, date = hm.group(1), hm.group(2), hm.group(3)
        out = []
        for line in rows:
            m = _match(_FLIGHT_ROW, line)
            out.append(
                FlightRecord(
                    flight_number=m.group(2),
                    price=int(m.group(3)),
                    departure_city=dep,
                    destination_city=dest,
                    date=date,
                    departure_time=m.group(4),
                    arrival_time=m.group(5),
                    elapsed=int(m.group(6)) * 60 + int(m.group(7)),
                    distance_miles=float(m.group(8)),
                )
            )
        return tuple(out)
    if tool_name == "SearchRestaurant":
        city = _match(_REST_HEAD, head).group(1)
        return tuple(
            RestaurantRecord(m.group(2), city, int(m.group(3)), tuple(m.group(4).split(", ")), float(m.group(5)))
            for m in (_match(_REST_ROW, line) for line in rows)
        )
    if tool_name == "SearchAccommodation":
        city = _match(_ACC_HEAD, head).group(1)
        out = []
        for line in rows:
            m = _match(_ACC_ROW, line)
            rules = () if m.group(5) == "-" else tuple(m.group(5).split(" & "))
            out.append(
                AccommodationRecord(
                    name=m.group(2),
                    city=city,
                    price=float(m.group(3)),
                    room_type=m.group(4),
                    house_rules=rules,
                    minimum_nights=int(float(m.group(6))),
                    maximum_occupancy=int(m.group(7)),
                    review_rate=float(m.group(8)),
                )
            )
        return tuple(out)
    raise ObservationParseError(f"unknown tool {tool_name!r}")
