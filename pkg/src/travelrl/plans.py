"""Day-by-day itineraries: types, the plan-text grammar and the JSON schema.

Plan text is a sequence of day blocks::

    Day 1:
    Current City: from New York to Charleston
    Transportation: Flight Number: F4066693, from New York to Charleston, Cost: 137
    Breakfast: -
    Attraction: -
    Lunch: -
    Dinner: Roka, Charleston
    Accommodation: Bronx Roon, Charleston

Empty slots are ``-``; attractions are ``;``-separated ``Name, City`` items.
The transportation field also accepts ``Flight [F4066693]``, ``Self-driving``
or ``Taxi`` heads, a ``$`` before the cost, and extra comma-separated fields
such as departure times, which are ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any

FIELDS = ("day", "current_city", "transportation", "breakfast", "attraction", "lunch", "dinner", "accommodation")
_LABELS = {
    "Current City": "current_city",
    "Transportation": "transportation",
    "Breakfast": "breakfast",
    "Attraction": "attraction",
    "Lunch": "lunch",
    "Dinner": "dinner",
    "Accommodation": "accommodation",
}
_LABEL_OF = {v: k for k, v in _LABELS.items()}
MODES = ("Flight", "Self-driving", "Taxi")

_DAY_HEAD = re.compile(r"^Day\s+(\d+)\s*:\s*$")
_FIELD_LINE = re.compile(r"^([A-Za-z ]+?)\s*:\s?(.*)$")
_TRANSFER = re.compile(r"^from (.+?) to (.+)$")
_LEG_FLIGHT = re.compile(r"^Flight(?: Number:\s*(F\d+)|\s*\[(F\d+)\])")
_LEG_GROUND = re.compile(r"^(self-driving|taxi)\b", re.IGNORECASE)
_LEG_ROUTE = re.compile(r"\bfrom ([^,]+?) to ([^,]+?)\s*(?:,|$)")
_LEG_COST = re.compile(r"Cost:\s*\$?\s*(\d+(?:\.\d+)?)")


class PlanParseError(ValueError):
    def __init__(self, day: int | None, field: str | None, message: str):
        self.day = day
        self.field = field
        where = []
        if day is not None:
            where.append(f"day {day}")
        if field is not None:
            where.append(f"field {field}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class Place:
    name: str
    city: str

    def render(self) -> str:
        return f"{self.name}, {self.city}"


@dataclass(frozen=True)
class TransportLeg:
    mode: str
    from_city: str
    to_city: str
    cost: float
    flight_number: str | None = None

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown transport mode {self.mode!r}")
        if (self.mode == "Flight") != (self.flight_number is not None):
            raise ValueError("flight number is required for flights and only for flights")

    def render(self) -> str:
        head = f"Flight Number: {self.flight_number}" if self.mode == "Flight" else self.mode
        return f"{head}, from {self.from_city} to {self.to_city}, Cost: {_money(self.cost)}"


@dataclass(frozen=True)
class DayEntry:
    day: int
    current_city: str
    transportation: TransportLeg | None = None
    breakfast: Place | None = None
    attraction: tuple[Place, ...] = ()
    lunch: Place | None = None
    dinner: Place | None = None
    accommodation: Place | None = None

    @property
    def transfer(self) -> tuple[str, str] | None:
        m = _TRANSFER.match(self.current_city)
        return (m.group(1), m.group(2)) if m else None

    @property
    def cities(self) -> tuple[str, ...]:
        t = self.transfer
        return t if t else (self.current_city,)

    @property
    def end_city(self) -> str:
        return self.cities[-1]

    @property
    def meals(self) -> tuple[Place | None, Place | None, Place | None]:
        return (self.breakfast, self.lunch, self.dinner)


@dataclass(frozen=True)
class Plan:
    days: tuple[DayEntry, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "days", tuple(self.days))
        for i, d in enumerate(self.days, 1):
            if d.day != i:
                raise PlanParseError(d.day, "day", f"days must be numbered 1..n consecutively (expected {i})")


def _money(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x}"


# -- field-level parsing ----------------------------------------------------------------------


def _parse_place(day: int, fname: str, value: str) -> Place | None:
    value = value.strip()
    if value == "-" or value == "":
        return None
    name, sep, city = value.rpartition(",")
    name, city = name.strip(), city.strip()
    if not sep or not name or not city:
        raise PlanParseError(day, fname, f"expected 'Name, City', got {value!r}")
    return Place(name, city)


def _parse_attractions(day: int, value: str) -> tuple[Place, ...]:
    value = value.strip()
    if value in ("-", ""):
        return ()
    out = []
    for item in value.split(";"):
        if not item.strip():
            continue
        p = _parse_place(day, "attraction", item)
        if p is not None:
            out.append(p)
    return tuple(out)


def _parse_current_city(day: int, value: str) -> str:
    value = value.strip()
    if not value or value == "-":
        raise PlanParseError(day, "current_city", "current city is required")
    if value.startswith("from "):
        m = _TRANSFER.match(value)
        if not m or not m.group(1).strip() or not m.group(2).strip():
            raise PlanParseError(day, "current_city", f"malformed transfer {value!r}; expected 'from A to B'")
        return f"from {m.group(1).strip()} to {m.group(2).strip()}"
    if "," in value or ";" in value:
        raise PlanParseError(day, "current_city", f"malformed city {value!r}")
    return value


def parse_leg(day: int, value: str) -> TransportLeg | None:
    value = value.strip()
    if value in ("-", ""):
        return None
    fm = _LEG_FLIGHT.match(value)
    gm = _LEG_GROUND.match(value)
    if fm:
        mode, number = "Flight", fm.group(1) or fm.group(2)
    elif gm:
        mode, number = ("Taxi" if gm.group(1).lower() == "taxi" else "Self-driving"), None
    else:
        raise PlanParseError(day, "transportation", f"unknown transport mode in {value!r}")
    rm = _LEG_ROUTE.search(value)
    if not rm:
        raise PlanParseError(day, "transportation", "missing 'from A to B'")
    cm = _LEG_COST.search(value)
    if not cm:
        raise PlanParseError(day, "transportation", "missing 'Cost:'")
    return TransportLeg(mode, rm.group(1).strip(), rm.group(2).strip(), float(cm.group(1)), number)


def _day_from_fields(day: int, raw: dict[str, str]) -> DayEntry:
    return DayEntry(
        day=day,
        current_city=_parse_current_city(day, raw["current_city"]),
        transportation=parse_leg(day, raw["transportation"]),
        breakfast=_parse_place(day, "breakfast", raw["breakfast"]),
        attraction=_parse_attractions(day, raw["attraction"]),
        lunch=_parse_place(day, "lunch", raw["lunch"]),
        dinner=_parse_place(day, "dinner", raw["dinner"]),
        accommodation=_parse_place(day, "accommodation", raw["accommodation"]),
    )


# -- text grammar -----------------------------------------------------------------------------


class _Lines:
    def __init__(self, text: str):
        self.lines = [ln.strip() for ln in text.replace("\r\n", "\n").split("\n")]
        self.pos = 0

    def skip_blank(self) -> None:
        while self.pos < len(self.lines) and not self.lines[self.pos]:
            self.pos += 1

    def peek(self) -> str | None:
        return self.lines[self.pos] if self.pos < len(self.lines) else None

    def take(self) -> str:
        line = self.lines[self.pos]
        self.pos += 1
        return line


def _parse_day(cur: _Lines, expected: int) -> DayEntry:
    head = cur.take()
    m = _DAY_HEAD.match(head)
    if not m:
        raise PlanParseError(expected, None, f"expected 'Day {expected}:', got {head[:60]!r}")
    day = int(m.group(1))
    if day != expected:
        raise PlanParseError(day, "day", f"expected day {expected} (days must be consecutive from 1)")
    raw: dict[str, str] = {}
    while True:
        line = cur.peek()
        if line is None or not line or _DAY_HEAD.match(line):
            break
        cur.take()
        fm = _FIELD_LINE.match(line)
        if not fm or fm.group(1) not in _LABELS:
            raise PlanParseError(day, None, f"unrecognised line {line[:60]!r}")
        key = _LABELS[fm.group(1)]
        if key in raw:
            raise PlanParseError(day, key, "field given twice")
        raw[key] = fm.group(2)
    missing = [f for f in FIELDS[1:] if f not in raw]
    if missing:
        raise PlanParseError(day, missing[0], "field missing")
    return _day_from_fields(day, raw)


def parse_plan_text(text: str) -> Plan:
    """Parse plan text into a Plan, raising PlanParseError with day and field."""
    if not isinstance(text, str):
        raise PlanParseError(None, None, "plan text must be a string")
    cur = _Lines(text)
    days: list[DayEntry] = []
    cur.skip_blank()
    while cur.peek() is not None:
        days.append(_parse_day(cur, len(days) + 1))
        cur.skip_blank()
    if not days:
        raise PlanParseError(None, None, "no days found")
    return Plan(tuple(days))


def _slot(p: Place | None) -> str:
    return p.render() if p is not None else "-"


def day_fields(d: DayEntry) -> dict[str, Any]:
    return {
        "day": d.day,
        "current_city": d.current_city,
        "transportation": d.transportation.render() if d.transportation else "-",
        "breakfast": _slot(d.breakfast),
        "attraction": ";".join(p.render() for p in d.attraction) if d.attraction else "-",
        "lunch": _slot(d.lunch),
        "dinner": _slot(d.dinner),
        "accommodation": _slot(d.accommodation),
    }


def render_plan_text(plan: Plan) -> str:
    blocks = []
    for d in plan.days:
        f = day_fields(d)
        lines = [f"Day {d.day}:"] + [f"{_LABEL_OF[k]}: {f[k]}" for k in FIELDS[1:]]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


# -- JSON schema ------------------------------------------------------------------------------


def plan_to_json(plan: Plan) -> list[dict[str, Any]]:
    return [day_fields(d) for d in plan.days]


def plan_from_json(items: Any) -> Plan:
    if not isinstance(items, list):
        raise PlanParseError(None, None, "plan JSON must be an array of day objects")
    days = []
    for i, item in enumerate(items, 1):
        if not isinstance(item, dict):
            raise PlanParseError(i, None, "day entry must be an object")
        missing = [f for f in FIELDS if f not in item]
        if missing:
            raise PlanParseError(i, missing[0], "field missing")
        day = item["day"]
        if not isinstance(day, int) or isinstance(day, bool) or day != i:
            raise PlanParseError(i, "day", f"expected day {i}")
        raw = {}
        for f in FIELDS[1:]:
            v = item[f]
            if not isinstance(v, str):
                raise PlanParseError(i, f, "expected a string")
            raw[f] = v
        days.append(_day_from_fields(i, raw))
    return Plan(tuple(days))
