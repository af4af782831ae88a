"""Trip cost and rule-based scoring of plans against a query and a sandbox."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from .plans import DayEntry, Place, Plan, PlanParseError, TransportLeg, parse_plan_text
from .query import QuerySpec
from .sandbox.db import SandboxDb

COMMONSENSE_RULES = (
    "within_sandbox",
    "complete_information",
    "within_current_city",
    "reasonable_city_route",
    "diverse_restaurants",
    "diverse_attractions",
    "non_conflict_transportation",
    "minimum_nights",
)
HARD_RULES = ("budget", "room_rule", "room_type", "cuisines", "transportation")

_ROOM_TYPE_MATCH = {
    "entire room": lambda t: t == "Entire home/apt",
    "private room": lambda t: t == "Private room",
    "shared room": lambda t: t == "Shared room",
    "not shared room": lambda t: t != "Shared room",
}


@dataclass(frozen=True)
class CostModel:
    people_per_taxi: int = 4
    people_per_car: int = 5

    def __post_init__(self) -> None:
        if self.people_per_taxi < 1 or self.people_per_car < 1:
            raise ValueError("vehicle capacities must be >= 1")

    def vehicles(self, people: int, mode: str) -> int:
        cap = self.people_per_taxi if mode.lower() == "taxi" else self.people_per_car
        return math.ceil(people / cap)

    def rooms(self, people: int, maximum_occupancy: int) -> int:
        return math.ceil(people / max(1, maximum_occupancy))


@dataclass(frozen=True)
class ScoreSet:
    cs_micro: float = 0.0
    cs_macro: int = 0
    hard_micro: float = 0.0
    hard_macro: int = 0
    success: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.cs_micro <= 1.0 and 0.0 <= self.hard_micro <= 1.0):
            raise ValueError("micro scores must lie in [0, 1]")
        if self.cs_macro != int(self.cs_micro == 1.0) or self.hard_macro != int(self.hard_micro == 1.0):
            raise ValueError("macro score must equal [micro == 1]")
        if self.success != self.cs_macro * self.hard_macro:
            raise ValueError("success must equal cs_macro AND hard_macro")

    @classmethod
    def from_micros(cls, cs_micro: float, hard_micro: float) -> "ScoreSet":
        cs_macro = int(cs_micro == 1.0)
        hard_macro = int(hard_micro == 1.0)
        return cls(cs_micro, cs_macro, hard_micro, hard_macro, cs_macro * hard_macro)

    def to_json(self) -> dict[str, Any]:
        return {
            "cs_micro": self.cs_micro,
            "cs_macro": self.cs_macro,
            "hard_micro": self.hard_micro,
            "hard_macro": self.hard_macro,
            "success": self.success,
        }


@dataclass(frozen=True)
class RuleResult:
    passed: bool
    evidence: str = ""


@dataclass(frozen=True)
class RuleReport:
    commonsense: dict[str, RuleResult]
    hard: dict[str, RuleResult]
    cost: float = 0.0
    cost_notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if tuple(self.commonsense) != COMMONSENSE_RULES:
            raise ValueError("commonsense report must cover exactly the eight rules in order")
        if "budget" not in self.hard:
            raise ValueError("budget is always applicable")

    def outcomes(self) -> dict[str, bool]:
        out = {k: v.passed for k, v in self.commonsense.items()}
        out.update({f"hard:{k}": v.passed for k, v in self.hard.items()})
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "commonsense": {k: {"pass": v.passed, "evidence": v.evidence} for k, v in self.commonsense.items()},
            "hard": {k: {"pass": v.passed, "evidence": v.evidence} for k, v in self.hard.items()},
            "cost": self.cost,
            "cost_notes": list(self.cost_notes),
        }


def score_failure() -> ScoreSet:
    return ScoreSet()


def _date_of(spec: QuerySpec, day: int) -> str | None:
    return spec.dates[day - 1] if 1 <= day <= len(spec.dates) else None


def _meal_items(plan: Plan) -> list[tuple[int, Place]]:
    return [(d.day, m) for d in plan.days for m in d.meals if m is not None]


# -- cost -------------------------------------------------------------------------------------


def cost_breakdown(plan: Plan, spec: QuerySpec, db: SandboxDb, model: CostModel | None = None) -> tuple[float, list[str]]:
    """Return the trip total and notes about items priced from their claimed cost."""
    model = model or CostModel()
    people = spec.people
    total = 0.0
    notes: list[str] = []
    for d in plan.days:
        leg = d.transportation
        if leg is not None:
            rec_cost = _leg_unit_cost(leg, spec, db, d.day)
            if rec_cost is None:
                notes.append(f"day {d.day}: unknown {leg.mode} leg priced at claimed {leg.cost}")
                total += leg.cost
            elif leg.mode == "Flight":
                total += rec_cost * people
            else:
                total += rec_cost * model.vehicles(people, leg.mode)
        for m in d.meals:
            if m is None:
                continue
            r = db.restaurant_index.get((m.name, m.city))
            if r is None:
                notes.append(f"day {d.day}: unknown restaurant {m.render()!r} priced at 0")
            else:
                total += r.avg_cost * people
        if d.accommodation is not None:
            a = db.accommodation_index.get((d.accommodation.name, d.accommodation.city))
            if a is None:
                notes.append(f"day {d.day}: unknown accommodation {d.accommodation.render()!r} priced at 0")
            else:
                total += a.price * model.rooms(people, a.maximum_occupancy)
    return total, notes


def _leg_unit_cost(leg: TransportLeg, spec: QuerySpec, db: SandboxDb, day: int) -> float | None:
    if leg.mode == "Flight":
        date = _date_of(spec, day)
        f = db.find_flight(leg.flight_number or "", leg.from_city, leg.to_city, date) if date else None
        return None if f is None else float(f.price)
    rec = db.distance_by_route.get((leg.from_city, leg.to_city, leg.mode.lower()))
    return None if rec is None else float(rec.cost)


def compute_cost(plan: Plan, spec: QuerySpec, db: SandboxDb, model: CostModel | None = None) -> float:
    return cost_breakdown(plan, spec, db, model)[0]


# -- commonsense rules ------------------------------------------------------------------------


def _within_sandbox(plan: Plan, spec: QuerySpec, db: SandboxDb) -> RuleResult:
    for d in plan.days:
        leg = d.transportation
        if leg is not None and _leg_unit_cost(leg, spec, db, d.day) is None:
            what = f"flight {leg.flight_number}" if leg.mode == "Flight" else f"{leg.mode} leg"
            return RuleResult(False, f"day {d.day}: {what} from {leg.from_city} to {leg.to_city} not in sandbox")
        for m in d.meals:
            if m is not None and (m.name, m.city) not in db.restaurant_index:
                return RuleResult(False, f"day {d.day}: restaurant {m.render()!r} not in sandbox")
        for a in d.attraction:
            if (a.name, a.city) not in db.attraction_index:
                return RuleResult(False, f"day {d.day}: attraction {a.render()!r} not in sandbox")
        acc = d.accommodation
        if acc is not None and (acc.name, acc.city) not in db.accommodation_index:
            return RuleResult(False, f"day {d.day}: accommodation {acc.render()!r} not in sandbox")
    return RuleResult(True)


def _complete_information(plan: Plan, spec: QuerySpec) -> RuleResult:
    n = len(plan.days)
    if n != spec.days:
        return RuleResult(False, f"plan has {n} days, query asks for {spec.days}")
    for d in plan.days:
        if d.transfer is not None and d.transportation is None:
            return RuleResult(False, f"day {d.day}: travel day without transportation")
        if d.day < n and d.accommodation is None:
            return RuleResult(False, f"day {d.day}: no accommodation for the night")
        if d.transfer is None:
            if any(m is None for m in d.meals):
                return RuleResult(False, f"day {d.day}: missing meals")
            if not d.attraction:
                return RuleResult(False, f"day {d.day}: no attraction")
    return RuleResult(True)


def _within_current_city(plan: Plan) -> RuleResult:
    for d in plan.days:
        allowed = set(d.cities)
        leg = d.transportation
        if leg is not None and (leg.from_city, leg.to_city) != d.transfer:
            return RuleResult(False, f"day {d.day}: leg from {leg.from_city} to {leg.to_city} does not match current city")
        items = [m for m in d.meals if m is not None] + list(d.attraction)
        if d.accommodation is not None:
            items.append(d.accommodation)
        for it in items:
            if it.city not in allowed:
                return RuleResult(False, f"day {d.day}: {it.render()!r} is outside {d.current_city}")
    return RuleResult(True)


def _reasonable_city_route(plan: Plan, spec: QuerySpec, db: SandboxDb) -> RuleResult:
    cur = spec.origin
    visited: list[str] = []
    returned = False
    if not plan.days or plan.days[0].transfer is None:
        return RuleResult(False, f"day 1 must depart from {spec.origin}")
    for d in plan.days:
        t = d.transfer
        if t is None:
            if d.current_city != cur:
                return RuleResult(False, f"day {d.day}: in {d.current_city} but previous city was {cur}")
            continue
        if t[0] != cur:
            return RuleResult(False, f"day {d.day}: departs {t[0]} but previous city was {cur}")
        cur = t[1]
        if cur == spec.origin:
            if d.day != len(plan.days):
                return RuleResult(False, f"day {d.day}: returns to {spec.origin} before the last day")
            returned = True
        elif cur in visited:
            return RuleResult(False, f"day {d.day}: revisits {cur}")
        else:
            visited.append(cur)
    if not returned:
        return RuleResult(False, f"trip ends in {cur}, not {spec.origin}")
    if len(visited) != spec.visiting_city_number:
        return RuleResult(False, f"visits {len(visited)} cities, query asks for {spec.visiting_city_number}")
    if spec.multi_city:
        off = [c for c in visited if db.state_of(c) != spec.destination]
        if off:
            return RuleResult(False, f"{off[0]} is not in {spec.destination}")
    elif visited[0] != spec.destination:
        return RuleResult(False, f"visits {visited[0]} instead of {spec.destination}")
    return RuleResult(True)


def _diverse(items: list[tuple[int, Place]], what: str) -> RuleResult:
    seen: dict[tuple[str, str], int] = {}
    for day, p in items:
        key = (p.name, p.city)
        if key in seen:
            return RuleResult(False, f"{what} {p.render()!r} repeated on days {seen[key]} and {day}")
        seen[key] = day
    return RuleResult(True)


def _non_conflict_transportation(plan: Plan) -> RuleResult:
    modes = {d.transportation.mode for d in plan.days if d.transportation is not None}
    if "Self-driving" in modes and modes & {"Flight", "Taxi"}:
        other = "Flight" if "Flight" in modes else "Taxi"
        return RuleResult(False, f"mixes Self-driving with {other}")
    return RuleResult(True)


def _minimum_nights(plan: Plan, db: SandboxDb) -> RuleResult:
    runs: list[tuple[Place, int, int]] = []
    for d in plan.days:
        acc = d.accommodation
        if acc is not None and runs and runs[-1][0] == acc and runs[-1][1] + runs[-1][2] == d.day:
            p, start, length = runs[-1]
            runs[-1] = (p, start, length + 1)
        elif acc is not None:
            runs.append((acc, d.day, 1))
    for p, start, length in runs:
        rec = db.accommodation_index.get((p.name, p.city))
        if rec is not None and length < rec.minimum_nights:
            return RuleResult(False, f"{p.render()!r} from day {start}: {length} nights, minimum is {rec.minimum_nights}")
    return RuleResult(True)


# -- hard constraints -------------------------------------------------------------------------


def _accommodation_records(plan: Plan, db: SandboxDb) -> tuple[list[Any], list[Place]]:
    known, unknown = [], []
    for d in plan.days:
        if d.accommodation is None:
            continue
        rec = db.accommodation_index.get((d.accommodation.name, d.accommodation.city))
        (known if rec is not None else unknown).append(rec if rec is not None else d.accommodation)
    return known, unknown


def _room_check(plan: Plan, db: SandboxDb, what: str, ok: Any) -> RuleResult:
    known, unknown = _accommodation_records(plan, db)
    if unknown:
        return RuleResult(False, f"unknown accommodation {unknown[0].render()!r}")
    if not known:
        return RuleResult(False, f"no accommodation to check against {what}")
    for rec in known:
        if not ok(rec):
            return RuleResult(False, f"{rec.name!r} violates {what}")
    return RuleResult(True)


def _hard(plan: Plan, spec: QuerySpec, db: SandboxDb, cost: float) -> dict[str, RuleResult]:
    c = spec.constraints
    out: dict[str, RuleResult] = {}
    if spec.budget is None:
        out["budget"] = RuleResult(True, "no budget given")
    else:
        out["budget"] = RuleResult(cost <= spec.budget, f"cost {cost:g} vs budget {spec.budget}")
    if c.room_rule is not None:
        banned = f"No {c.room_rule}"
        out["room_rule"] = _room_check(plan, db, f"room rule {c.room_rule!r}", lambda r: banned not in r.house_rules)
    if c.room_type is not None:
        match = _ROOM_TYPE_MATCH[c.room_type]
        out["room_type"] = _room_check(plan, db, f"room type {c.room_type!r}", lambda r: match(r.room_type))
    if c.cuisines is not None:
        served: set[str] = set()
        for _, m in _meal_items(plan):
            r = db.restaurant_index.get((m.name, m.city))
            if r is not None:
                served.update(r.cuisines)
        missing = [x for x in c.cuisines if x not in served]
        out["cuisines"] = RuleResult(not missing, f"missing cuisines {missing}" if missing else "")
    if c.transportation is not None:
        banned_mode = "Flight" if c.transportation == "no flight" else "Self-driving"
        bad = [d.day for d in plan.days if d.transportation is not None and d.transportation.mode == banned_mode]
        out["transportation"] = RuleResult(not bad, f"{banned_mode} on day {bad[0]}" if bad else "")
    return out


def evaluate(plan: Plan, spec: QuerySpec, db: SandboxDb, model: CostModel | None = None) -> tuple[RuleReport, ScoreSet]:
    cost, notes = cost_breakdown(plan, spec, db, model)
    cs = {
        "within_sandbox": _within_sandbox(plan, spec, db),
        "complete_information": _complete_information(plan, spec),
        "within_current_city": _within_current_city(plan),
        "reasonable_city_route": _reasonable_city_route(plan, spec, db),
        "diverse_restaurants": _diverse(_meal_items(plan), "restaurant"),
        "diverse_attractions": _diverse([(d.day, a) for d in plan.days for a in d.attraction], "attraction"),
        "non_conflict_transportation": _non_conflict_transportation(plan),
        "minimum_nights": _minimum_nights(plan, db),
    }
    hard = _hard(plan, spec, db, cost)
    report = RuleReport(cs, hard, cost, tuple(notes))
    cs_micro = sum(r.passed for r in cs.values()) / len(cs)
    hard_micro = sum(r.passed for r in hard.values()) / len(hard)
    return report, ScoreSet.from_micros(cs_micro, hard_micro)


@dataclass(frozen=True)
class AnswerScore:
    scores: ScoreSet
    report: RuleReport | None
    plan: Plan | None
    error: str | None = None

    @property
    def delivered(self) -> bool:
        return self.plan is not None


def score_answer(answer: str | None, spec: QuerySpec, db: SandboxDb, model: CostModel | None = None) -> AnswerScore:
    """Parse a final answer and score it; unparsable or missing answers score zero."""
    if answer is None:
        return AnswerScore(score_failure(), None, None, "no final answer")
    try:
        plan = parse_plan_text(answer)
    except PlanParseError as exc:
        return AnswerScore(score_failure(), None, None, f"unparsable plan: {exc}")
    report, scores = evaluate(plan, spec, db, model)
    return AnswerScore(scores, report, plan)


__all__ = [
    "COMMONSENSE_RULES",
    "HARD_RULES",
    "AnswerScore",
    "CostModel",
    "RuleReport",
    "RuleResult",
    "ScoreSet",
    "compute_cost",
    "cost_breakdown",
    "evaluate",
    "score_answer",
    "score_failure",
]
