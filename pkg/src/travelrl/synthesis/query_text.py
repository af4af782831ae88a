"""Deterministic natural-language rendering of a QuerySpec and its inverse.

Every fact is written verbatim into one sentence drawn from a small template
pool. The template for each sentence kind is chosen by a CRC of the
difficulty and constraint kinds, so two specs that differ only in a value
(say the budget) render identically apart from that value.
"""

from __future__ import annotations

import datetime as dt
import re
import zlib
from typing import Any, Callable

from ..query import HardConstraintSet, QuerySpec

_INTRO = (
    "Please plan a {days}-day trip for {who} departing from {origin} and heading to {dest}, from {start} to {end}.",
    "I need a {days}-day itinerary for {who}, leaving {origin} for {dest} on {start} and returning on {end}.",
    "Help me organise a {days}-day journey for {who} from {origin} to {dest}, running {start} through {end}.",
)
_BUDGET = (
    "The budget is ${budget}.",
    "Total spending must stay at or below ${budget}.",
    "We can spend up to ${budget} overall.",
)
_ROOM_RULE = (
    "The accommodation must allow {room_rule}.",
    "Our lodging has to permit {room_rule}.",
)
_ROOM_TYPE = (
    "For lodging we want {room_type}.",
    "Please book {room_type}.",
)
_CUISINE = (
    "We would like to try {cuisines} cuisine.",
    "Meals should include {cuisines} food.",
)
_TRANSPORT = (
    "Regarding transport, {transportation}.",
    "One more thing: {transportation}.",
)
_ROOM_TYPE_TEXT = {
    "entire room": "an entire room",
    "private room": "a private room",
    "shared room": "a shared room",
    "not shared room": "any room that is not shared",
}
_TRANSPORT_TEXT = {
    "no flight": "we will not take any flights",
    "no self-driving": "we will not drive ourselves",
}
_MONTHS = ("January", "February", "March", "April", "May", "June", "July", "August",
           "September", "October", "November", "December")


class QueryTextError(ValueError):
    pass


def _pick(pool: tuple[str, ...], key: str, salt: str) -> str:
    return pool[zlib.crc32(f"{key}|{salt}".encode()) % len(pool)]


def _key(spec: QuerySpec) -> str:
    return f"{spec.difficulty}|{','.join(spec.constraints.present())}"


def _fmt_date(iso: str) -> str:
    d = dt.date.fromisoformat(iso)
    return f"{_MONTHS[d.month - 1]} {d.day}, {d.year}"


def _fmt_people(n: int) -> str:
    return "a solo traveler" if n == 1 else f"a group of {n} people"


def _fmt_dest(spec: QuerySpec) -> str:
    if spec.multi_city:
        return f"{spec.visiting_city_number} cities in {spec.destination}"
    return spec.destination


def _fmt_list(items: tuple[str, ...]) -> str:
    if len(items) == 1:
        return items[0]
    return ", ".join(items[:-1]) + " and " + items[-1]


def _fmt_money(x: int) -> str:
    return f"{x:,}"


def render_query(spec: QuerySpec, paraphrase: Callable[[str], str] | None = None) -> str:
    key = _key(spec)
    parts = [
        _pick(_INTRO, key, "intro").format(
            days=spec.days,
            who=_fmt_people(spec.people),
            origin=spec.origin,
            dest=_fmt_dest(spec),
            start=_fmt_date(spec.dates[0]),
            end=_fmt_date(spec.dates[-1]),
        )
    ]
    c = spec.constraints
    if c.room_rule is not None:
        parts.append(_pick(_ROOM_RULE, key, "room_rule").format(room_rule=c.room_rule))
    if c.room_type is not None:
        parts.append(_pick(_ROOM_TYPE, key, "room_type").format(room_type=_ROOM_TYPE_TEXT[c.room_type]))
    if c.cuisines is not None:
        parts.append(_pick(_CUISINE, key, "cuisines").format(cuisines=_fmt_list(c.cuisines)))
    if c.transportation is not None:
        parts.append(_pick(_TRANSPORT, key, "transportation").format(transportation=_TRANSPORT_TEXT[c.transportation]))
    if spec.budget is not None:
        parts.append(_pick(_BUDGET, key, "budget").format(budget=_fmt_money(spec.budget)))
    text = " ".join(parts)
    return paraphrase(text) if paraphrase is not None else text


# -- inverse ----------------------------------------------------------------------------------


def _compile(template: str) -> re.Pattern[str]:
    out, pos = [], 0
    for m in re.finditer(r"\{(\w+)\}", template):
        out.append(re.escape(template[pos:m.start()]))
        out.append(f"(?P<{m.group(1)}>.+?)")
        pos = m.end()
    out.append(re.escape(template[pos:]))
    return re.compile("^" + "".join(out) + "$")


_PATTERNS: list[tuple[str, re.Pattern[str]]] = [
    (kind, _compile(t))
    for kind, pool in (
        ("intro", _INTRO), ("budget", _BUDGET), ("room_rule", _ROOM_RULE),
        ("room_type", _ROOM_TYPE), ("cuisines", _CUISINE), ("transportation", _TRANSPORT),
    )
    for t in pool
]
_DATE_TEXT = re.compile(r"^([A-Z][a-z]+) (\d{1,2}), (\d{4})$")
_SENTENCE_END = re.compile(r"(?<=\.)\s+")


def _parse_date(text: str) -> dt.date:
    m = _DATE_TEXT.match(text)
    if not m or m.group(1) not in _MONTHS:
        raise QueryTextError(f"unreadable date {text!r}")
    return dt.date(int(m.group(3)), _MONTHS.index(m.group(1)) + 1, int(m.group(2)))


def _parse_people(text: str) -> int:
    if text == "a solo traveler":
        return 1
    m = re.match(r"^a group of (\d+) people$", text)
    if not m:
        raise QueryTextError(f"unreadable party size {text!r}")
    return int(m.group(1))


def _parse_list(text: str) -> tuple[str, ...]:
    head, sep, last = text.rpartition(" and ")
    items = (head.split(", ") if sep else []) + [last]
    return tuple(i.strip() for i in items)


def _invert(table: dict[str, str], text: str, what: str) -> str:
    for k, v in table.items():
        if v == text:
            return k
    raise QueryTextError(f"unreadable {what} {text!r}")


def difficulty_for(constraints: HardConstraintSet) -> str:
    n = len(constraints.present())
    return "easy" if n == 0 else "medium" if n == 1 else "hard"


def extract_spec(text: str) -> QuerySpec:
    """Recover the QuerySpec from text produced by render_query."""
    fields: dict[str, Any] = {}
    for sentence in _SENTENCE_END.split(text.strip()):
        for kind, pat in _PATTERNS:
            m = pat.match(sentence)
            if m:
                if kind in fields:
                    raise QueryTextError(f"{kind} stated twice")
                fields[kind] = m.groupdict()
                break
        else:
            raise QueryTextError(f"unrecognised sentence {sentence[:60]!r}")
    if "intro" not in fields:
        raise QueryTextError("missing trip description")
    intro = fields["intro"]
    start, end = _parse_date(intro["start"]), _parse_date(intro["end"])
    days = int(intro["days"])
    if (end - start).days != days - 1:
        raise QueryTextError("dates do not span the stated number of days")
    dates = tuple((start + dt.timedelta(days=i)).isoformat() for i in range(days))
    dm = re.match(r"^(\d+) cities in (.+)$", intro["dest"])
    k, dest = (int(dm.group(1)), dm.group(2)) if dm else (1, intro["dest"])
    cons = HardConstraintSet(
        room_rule=fields["room_rule"]["room_rule"] if "room_rule" in fields else None,
        room_type=_invert(_ROOM_TYPE_TEXT, fields["room_type"]["room_type"], "room type") if "room_type" in fields else None,
        cuisines=_parse_list(fields["cuisines"]["cuisines"]) if "cuisines" in fields else None,
        transportation=_invert(_TRANSPORT_TEXT, fields["transportation"]["transportation"], "transportation")
        if "transportation" in fields
        else None,
    )
    budget = int(fields["budget"]["budget"].replace(",", "")) if "budget" in fields else None
    return QuerySpec(
        origin=intro["origin"],
        destination=dest,
        dates=dates,
        people=_parse_people(intro["who"]),
        visiting_city_number=k,
        constraints=cons,
        budget=budget,
        difficulty=difficulty_for(cons),
    )
