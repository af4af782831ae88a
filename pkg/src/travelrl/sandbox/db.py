"""Travel database records, bundle I/O and validation.

A bundle is a directory holding six line-delimited JSON files plus a
``manifest.json``::

    cities.jsonl          {"state": ..., "city": ...}
    flights.jsonl         FlightRecord fields
    distances.jsonl       DistanceRecord fields
    restaurants.jsonl     RestaurantRecord fields
    attractions.jsonl     AttractionRecord fields
    accommodations.jsonl  AccommodationRecord fields

Durations (``elapsed``, ``duration``) are integer minutes.
"""

from __future__ import annotations

import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable

ROOM_TYPES = ("Entire home/apt", "Private room", "Shared room")
HOUSE_RULES = ("No parties", "No smoking", "No children under 10", "No pets", "No visitors")
GROUND_MODES = ("self-driving", "taxi")

BUNDLE_FILES = (
    "cities",
    "flights",
    "distances",
    "restaurants",
    "attractions",
    "accommodations",
)

_FLIGHT_NO = re.compile(r"^F\d+$")
_DATE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_CLOCK = re.compile(r"^([01]\d|2[0-3]):[0-5]\d$")


class DbParseError(ValueError):
    def __init__(self, file: str, line: int, field_name: str, message: str):
        self.file = file
        self.line = line
        self.field = field_name
        super().__init__(f"{file}:{line}: field {field_name!r}: {message}")


class DbValidationError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        shown = "\n  ".join(problems[:20])
        more = f"\n  ... {len(problems) - 20} more" if len(problems) > 20 else ""
        super().__init__(f"{len(problems)} invalid record(s):\n  {shown}{more}")


@dataclass(frozen=True)
class FlightRecord:
    flight_number: str
    price: int
    departure_city: str
    destination_city: str
    date: str
    departure_time: str
    arrival_time: str
    elapsed: int
    distance_miles: float


@dataclass(frozen=True)
class DistanceRecord:
    departure_city: str
    destination_city: str
    mode: str
    duration: int
    distance_km: float
    cost: int


@dataclass(frozen=True)
class RestaurantRecord:
    name: str
    city: str
    avg_cost: int
    cuisines: tuple[str, ...]
    rating: float


@dataclass(frozen=True)
class AttractionRecord:
    name: str
    city: str
    url: str
    address: str
    contact: str


@dataclass(frozen=True)
class AccommodationRecord:
    name: str
    city: str
    price: float
    room_type: str
    house_rules: tuple[str, ...]
    minimum_nights: int
    maximum_occupancy: int
    review_rate: float


_RECORD_TYPES = {
    "flights": FlightRecord,
    "distances": DistanceRecord,
    "restaurants": RestaurantRecord,
    "attractions": AttractionRecord,
    "accommodations": AccommodationRecord,
}

_FIELD_KINDS: dict[type, dict[str, type]] = {
    FlightRecord: {
        "flight_number": str, "price": int, "departure_city": str, "destination_city": str,
        "date": str, "departure_time": str, "arrival_time": str, "elapsed": int,
        "distance_miles": float,
    },
    DistanceRecord: {
        "departure_city": str, "destination_city": str, "mode": str, "duration": int,
        "distance_km": float, "cost": int,
    },
    RestaurantRecord: {
        "name": str, "city": str, "avg_cost": int, "cuisines": tuple, "rating": float,
    },
    AttractionRecord: {"name": str, "city": str, "url": str, "address": str, "contact": str},
    AccommodationRecord: {
        "name": str, "city": str, "price": float, "room_type": str, "house_rules": tuple,
        "minimum_nights": int, "maximum_occupancy": int, "review_rate": float,
    },
}


@dataclass(frozen=True)
class SandboxDb:
    """Read-only travel world. Lookup indexes are built once at construction."""

    cities: dict[str, tuple[str, ...]]
    flights: tuple[FlightRecord, ...] = ()
    distances: tuple[DistanceRecord, ...] = ()
    restaurants: tuple[RestaurantRecord, ...] = ()
    attractions: tuple[AttractionRecord, ...] = ()
    accommodations: tuple[AccommodationRecord, ...] = ()
    manifest: dict[str, Any] = field(default_factory=dict, compare=False)

    city_state: dict[str, str] = field(init=False, compare=False, repr=False)
    flights_by_route: dict[tuple[str, str, str], tuple[FlightRecord, ...]] = field(
        init=False, compare=False, repr=False
    )
    flight_by_number: dict[str, FlightRecord] = field(init=False, compare=False, repr=False)
    distance_by_route: dict[tuple[str, str, str], DistanceRecord] = field(
        init=False, compare=False, repr=False
    )
    restaurants_by_city: dict[str, tuple[RestaurantRecord, ...]] = field(
        init=False, compare=False, repr=False
    )
    attractions_by_city: dict[str, tuple[AttractionRecord, ...]] = field(
        init=False, compare=False, repr=False
    )
    accommodations_by_city: dict[str, tuple[AccommodationRecord, ...]] = field(
        init=False, compare=False, repr=False
    )
    restaurant_index: dict[tuple[str, str], RestaurantRecord] = field(
        init=False, compare=False, repr=False
    )
    attraction_index: dict[tuple[str, str], AttractionRecord] = field(
        init=False, compare=False, repr=False
    )
    accommodation_index: dict[tuple[str, str], AccommodationRecord] = field(
        init=False, compare=False, repr=False
    )

    def __post_init__(self) -> None:
        put = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        put("cities", {s: tuple(c) for s, c in self.cities.items()})
        for name in ("flights", "distances", "restaurants", "attractions", "accommodations"):
            put(name, tuple(getattr(self, name)))

        city_state: dict[str, str] = {}
        for state, names in self.cities.items():
            for c in names:
                city_state.setdefault(c, state)
        put("city_state", city_state)

        by_route: dict[tuple[str, str, str], list[FlightRecord]] = {}
        by_number: dict[str, FlightRecord] = {}
        for f in self.flights:
            by_route.setdefault((f.departure_city, f.destination_city, f.date), []).append(f)
            by_number.setdefault(f.flight_number, f)
        put("flights_by_route", {k: tuple(v) for k, v in by_route.items()})
        put("flight_by_number", by_number)

        dist: dict[tuple[str, str, str], DistanceRecord] = {}
        for d in self.distances:
            dist.setdefault((d.departure_city, d.destination_city, d.mode), d)
        put("distance_by_route", dist)

        for attr, recs, idx in (
            ("restaurants_by_city", self.restaurants, "restaurant_index"),
            ("attractions_by_city", self.attractions, "attraction_index"),
            ("accommodations_by_city", self.accommodations, "accommodation_index"),
        ):
            grouped: dict[str, list] = {}
            index: dict[tuple[str, str], Any] = {}
            for r in recs:
                grouped.setdefault(r.city, []).append(r)
                index.setdefault((r.name, r.city), r)
            put(attr, {k: tuple(v) for k, v in grouped.items()})
            put(idx, index)

    def __hash__(self) -> int:
        return id(self)

    @property
    def all_cities(self) -> list[str]:
        return [c for names in self.cities.values() for c in names]

    @property
    def dates(self) -> list[str]:
        return sorted({f.date for f in self.flights} | set(self.manifest.get("dates", ())))

    def state_of(self, city: str) -> str | None:
        return self.city_state.get(city)

    def find_flight(self, number: str, departure: str, destination: str, date: str) -> FlightRecord | None:
        f = self.flight_by_number.get(number)
        if f is None:
            return None
        if (f.departure_city, f.destination_city, f.date) != (departure, destination, date):
            return None
        return f

    def counts(self) -> dict[str, int]:
        return {
            "cities": sum(len(v) for v in self.cities.values()),
            "flights": len(self.flights),
            "distances": len(self.distances),
            "restaurants": len(self.restaurants),
            "attractions": len(self.attractions),
            "accommodations": len(self.accommodations),
        }


def validate_db(db: SandboxDb) -> None:
    """Raise DbValidationError listing every record that breaks an invariant."""
    problems: list[str] = []
    seen_city: dict[str, str] = {}
    for state, names in db.cities.items():
        for c in names:
            if c in seen_city:
                problems.append(f"city {c!r} listed under both {seen_city[c]!r} and {state!r}")
            seen_city[c] = state

    def known(city: str, where: str) -> None:
        if city not in seen_city:
            problems.append(f"{where}: unknown city {city!r}")

    numbers: set[str] = set()
    for f in db.flights:
        tag = f"flight {f.flight_number}"
        if not _FLIGHT_NO.match(f.flight_number):
            problems.append(f"{tag}: malformed flight number")
        if f.flight_number in numbers:
            problems.append(f"{tag}: duplicate flight number")
        numbers.add(f.flight_number)
        known(f.departure_city, tag)
        known(f.destination_city, tag)
        if f.price <= 0:
            problems.append(f"{tag}: price must be > 0")
        if f.distance_miles <= 0:
            problems.append(f"{tag}: distance_miles must be > 0")
        if f.elapsed < 0:
            problems.append(f"{tag}: negative elapsed time")
        if not _DATE.match(f.date):
            problems.append(f"{tag}: malformed date {f.date!r}")
        for t in (f.departure_time, f.arrival_time):
            if not _CLOCK.match(t):
                problems.append(f"{tag}: malformed clock time {t!r}")

    for d in db.distances:
        tag = f"distance {d.departure_city}->{d.destination_city} ({d.mode})"
        known(d.departure_city, tag)
        known(d.destination_city, tag)
        if d.mode not in GROUND_MODES:
            problems.append(f"{tag}: mode must be one of {GROUND_MODES}")
        if d.cost < 0:
            problems.append(f"{tag}: negative cost")
        if d.distance_km <= 0:
            problems.append(f"{tag}: distance_km must be > 0")
        if d.duration < 0:
            problems.append(f"{tag}: negative duration")

    for r in db.restaurants:
        tag = f"restaurant {r.name!r} in {r.city}"
        known(r.city, tag)
        if not r.cuisines:
            problems.append(f"{tag}: no cuisines")
        if not 0 <= r.rating <= 5:
            problems.append(f"{tag}: rating outside [0, 5]")
        if r.avg_cost < 0:
            problems.append(f"{tag}: negative avg_cost")

    seen_attr: set[tuple[str, str]] = set()
    for a in db.attractions:
        tag = f"attraction {a.name!r} in {a.city}"
        known(a.city, tag)
        if (a.name, a.city) in seen_attr:
            problems.append(f"{tag}: duplicate (name, city)")
        seen_attr.add((a.name, a.city))

    for h in db.accommodations:
        tag = f"accommodation {h.name!r} in {h.city}"
        known(h.city, tag)
        if h.price < 0:
            problems.append(f"{tag}: negative price")
        if h.room_type not in ROOM_TYPES:
            problems.append(f"{tag}: unknown room type {h.room_type!r}")
        bad = [x for x in h.house_rules if x not in HOUSE_RULES]
        if bad:
            problems.append(f"{tag}: unknown house rules {bad}")
        if h.minimum_nights < 1:
            problems.append(f"{tag}: minimum_nights must be >= 1")
        if h.maximum_occupancy < 1:
            problems.append(f"{tag}: maximum_occupancy must be >= 1")
        if not 0 <= h.review_rate <= 5:
            problems.append(f"{tag}: review_rate outside [0, 5]")

    if problems:
        raise DbValidationError(problems)


def _record_to_json(rec: Any) -> dict[str, Any]:
    # write by declared kind so a save/load/save cycle is byte-stable
    kinds = _FIELD_KINDS[type(rec)]
    out = asdict(rec)
    for k, v in out.items():
        if isinstance(v, tuple):
            out[k] = list(v)
        elif kinds[k] is float:
            out[k] = float(v)
    return out


def _coerce(file: str, line: int, name: str, kind: type, value: Any) -> Any:
    if kind is tuple:
        if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
            raise DbParseError(file, line, name, "expected a list of strings")
        return tuple(value)
    if kind is str:
        if not isinstance(value, str):
            raise DbParseError(file, line, name, "expected a string")
        return value
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or value != int(value):
            raise DbParseError(file, line, name, "expected an integer")
        return int(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DbParseError(file, line, name, "expected a number")
    return float(value)


def _read_jsonl(path: Path) -> Iterable[tuple[int, dict[str, Any]]]:
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DbParseError(path.name, lineno, "<line>", f"invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise DbParseError(path.name, lineno, "<line>", "expected a JSON object")
            yield lineno, obj


def _parse_record(cls: type, file: str, line: int, obj: dict[str, Any]) -> Any:
    kinds = _FIELD_KINDS[cls]
    for key in obj:
        if key not in kinds:
            raise DbParseError(file, line, key, "unexpected field")
    values = {}
    for name, kind in kinds.items():
        if name not in obj:
            raise DbParseError(file, line, name, "missing field")
        values[name] = _coerce(file, line, name, kind, obj[name])
    return cls(**values)


def load_db(path: str | Path) -> SandboxDb:
    """Load and validate a bundle directory."""
    root = Path(path)
    if not root.is_dir():
        raise FileNotFoundError(f"database bundle not found: {root}")
    manifest: dict[str, Any] = {}
    mpath = root / "manifest.json"
    if mpath.exists():
        manifest = json.loads(mpath.read_text(encoding="utf-8"))

    cities: dict[str, list[str]] = {}
    cpath = root / "cities.jsonl"
    if not cpath.exists():
        raise FileNotFoundError(f"missing bundle file: {cpath}")
    for lineno, obj in _read_jsonl(cpath):
        for key in ("state", "city"):
            if not isinstance(obj.get(key), str):
                raise DbParseError(cpath.name, lineno, key, "missing or non-string field")
        cities.setdefault(obj["state"], []).append(obj["city"])

    tables: dict[str, list[Any]] = {}
    for name, cls in _RECORD_TYPES.items():
        p = root / f"{name}.jsonl"
        if not p.exists():
            raise FileNotFoundError(f"missing bundle file: {p}")
        tables[name] = [_parse_record(cls, p.name, ln, obj) for ln, obj in _read_jsonl(p)]

    db = SandboxDb(cities=cities, manifest=manifest, **tables)
    validate_db(db)
    return db


def save_db(db: SandboxDb, path: str | Path) -> Path:
    """Write ``db`` as a bundle. Output bytes depend only on the db contents."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    dump = lambda o: json.dumps(o, sort_keys=True, ensure_ascii=False)  # noqa: E731
    with (root / "cities.jsonl").open("w", encoding="utf-8") as fh:
        for state, names in db.cities.items():
            for c in names:
                fh.write(dump({"state": state, "city": c}) + "\n")
    for name in _RECORD_TYPES:
        with (root / f"{name}.jsonl").open("w", encoding="utf-8") as fh:
            for rec in getattr(db, name):
                fh.write(dump(_record_to_json(rec)) + "\n")
    (root / "manifest.json").write_text(
        json.dumps(db.manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    return root


def record_fields(cls: type) -> list[str]:
    return [f.name for f in fields(cls)]
