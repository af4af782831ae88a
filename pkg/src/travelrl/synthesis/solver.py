"""Exact minimum-cost planner used as feasibility certifier and reference policy.

A trip visiting k cities has k + 1 travel days: day 1 leaves the origin, the
last day returns to it, and k - 1 interior days move between cities. The
solver enumerates every route (ordered choice of cities) and every placement
of the interior travel days. For each candidate it prices

* legs: cheapest flight or taxi per leg, or self-driving on every leg (the two
  classes that never conflict), subject to any transportation ban;
* stays: one accommodation per city, the cheapest whose minimum nights fits
  the stay and which meets the room constraints;
* meals: three distinct restaurants per non-travel day, chosen by a small DP
  over (meals picked, requested cuisines covered) per city and combined
  across cities on the coverage mask.

Meals are only placed on non-travel days, so a cuisine can only be covered
in a city where the traveller spends a full day.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any

from ..evaluation import CostModel
from ..plans import DayEntry, Place, Plan, TransportLeg, plan_from_json, plan_to_json
from ..query import QuerySpec
from ..sandbox.db import AccommodationRecord, RestaurantRecord, SandboxDb

DEFAULT_NODE_CAP = 1_000_000
DEFAULT_SLACK = 1.3
STATUSES = ("feasible", "infeasible", "undecided")

_ROOM_TYPE_OK = {
    "entire room": lambda t: t == "Entire home/apt",
    "private room": lambda t: t == "Private room",
    "shared room": lambda t: t == "Shared room",
    "not shared room": lambda t: t != "Shared room",
}


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class FeasibilityCertificate:
    status: str
    witness: Plan | None = None
    min_cost: float | None = None
    reason: str = ""
    nodes: int = 0

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == "feasible" and (self.witness is None or self.min_cost is None):
            raise ValueError("a feasible certificate needs a witness and its cost")

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"

    def to_json(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "feasible": self.feasible,
            "min_cost": self.min_cost,
            "witness": plan_to_json(self.witness) if self.witness is not None else None,
            "reason": self.reason,
            "nodes": self.nodes,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "FeasibilityCertificate":
        w = obj.get("witness")
        return cls(
            status=obj["status"],
            witness=plan_from_json(w) if w is not None else None,
            min_cost=obj.get("min_cost"),
            reason=obj.get("reason", ""),
            nodes=obj.get("nodes", 0),
        )


@dataclass(frozen=True)
class _Leg:
    cost: float
    leg: TransportLeg


class _Pricer:
    """Caches per-city and per-leg subproblems for one spec."""

    def __init__(self, spec: QuerySpec, db: SandboxDb, model: CostModel):
        self.spec, self.db, self.model = spec, db, model
        c = spec.constraints
        self.req = tuple(c.cuisines or ())
        self.full = (1 << len(self.req)) - 1
        self._legs: dict[tuple[str, str, int], tuple[_Leg | None, _Leg | None]] = {}
        self._stays: dict[tuple[str, int], tuple[float, AccommodationRecord] | None] = {}
        self._meals: dict[tuple[str, int], dict[int, tuple[float, tuple[RestaurantRecord, ...]]]] = {}

    def leg(self, a: str, b: str, day: int) -> tuple[_Leg | None, _Leg | None]:
        """Cheapest (flight-or-taxi, self-driving) options for one leg."""
        key = (a, b, day)
        if key in self._legs:
            return self._legs[key]
        spec, db, people = self.spec, self.db, self.spec.people
        ban = spec.constraints.transportation
        best_a: _Leg | None = None
        if ban != "no flight":
            for f in db.flights_by_route.get((a, b, spec.dates[day - 1]), ()):
                cost = float(f.price * people)
                if best_a is None or cost < best_a.cost:
                    best_a = _Leg(cost, TransportLeg("Flight", a, b, float(f.price), f.flight_number))
        taxi = db.distance_by_route.get((a, b, "taxi"))
        if taxi is not None:
            cost = float(taxi.cost * self.model.vehicles(people, "taxi"))
            if best_a is None or cost < best_a.cost:
                best_a = _Leg(cost, TransportLeg("Taxi", a, b, float(taxi.cost)))
        best_b: _Leg | None = None
        drive = db.distance_by_route.get((a, b, "self-driving"))
        if drive is not None and ban != "no self-driving":
            best_b = _Leg(float(drive.cost * self.model.vehicles(people, "self-driving")),
                          TransportLeg("Self-driving", a, b, float(drive.cost)))
        self._legs[key] = (best_a, best_b)
        return best_a, best_b

    def stay(self, city: str, nights: int) -> tuple[float, AccommodationRecord] | None:
        key = (city, nights)
        if key in self._stays:
            return self._stays[key]
        c = self.spec.constraints
        best = None
        for r in self.db.accommodations_by_city.get(city, ()):
            if r.minimum_nights > nights:
                continue
            if c.room_rule is not None and f"No {c.room_rule}" in r.house_rules:
                continue
            if c.room_type is not None and not _ROOM_TYPE_OK[c.room_type](r.room_type):
                continue
            cost = r.price * self.model.rooms(self.spec.people, r.maximum_occupancy) * nights
            if best is None or cost < best[0]:
                best = (cost, r)
        self._stays[key] = best
        return best

    def meals(self, city: str, full_days: int) -> dict[int, tuple[float, tuple[RestaurantRecord, ...]]]:
        """Map coverage mask -> cheapest set of 3*full_days distinct restaurants covering it."""
        key = (city, full_days)
        if key in self._meals:
            return self._meals[key]
        need = 3 * full_days
        states: dict[tuple[int, int], tuple[float, tuple[RestaurantRecord, ...]]] = {(0, 0): (0.0, ())}
        if need:
            rests = sorted(self.db.restaurants_by_city.get(city, ()), key=lambda r: (r.avg_cost, r.name))
            for r in rests:
                bits = sum(1 << i for i, cu in enumerate(self.req) if cu in r.cuisines)
                price = float(r.avg_cost * self.spec.people)
                for (cnt, mask), (cost, picks) in list(states.items()):
                    if cnt >= need:
                        continue
                    k2 = (cnt + 1, mask | bits)
                    cand = cost + price
                    if k2 not in states or cand < states[k2][0]:
                        states[k2] = (cand, picks + (r,))
        table = {mask: v for (cnt, mask), v in states.items() if cnt == need}
        self._meals[key] = table
        return table


def _combine_meals(tables: list[dict[int, tuple[float, tuple]]], full: int) -> tuple[float, list[int]] | None:
    """Cheapest per-city mask choice whose union covers ``full``."""
    dp: dict[int, tuple[float, tuple[int, ...]]] = {0: (0.0, ())}
    for table in tables:
        nxt: dict[int, tuple[float, tuple[int, ...]]] = {}
        for m, (cost, chosen) in dp.items():
            for t, (c2, _) in table.items():
                u = m | t
                cand = cost + c2
                if u not in nxt or cand < nxt[u][0]:
                    nxt[u] = (cand, chosen + (t,))
        dp = nxt
        if not dp:
            return None
    best = dp.get(full)
    return (best[0], list(best[1])) if best else None


def _candidates(spec: QuerySpec, db: SandboxDb) -> list[str]:
    if spec.multi_city:
        return [c for c in db.cities.get(spec.destination, ()) if c != spec.origin]
    if spec.destination in db.city_state and spec.destination != spec.origin:
        return [spec.destination]
    return []


def solve(
    spec: QuerySpec,
    db: SandboxDb,
    model: CostModel | None = None,
    node_cap: int = DEFAULT_NODE_CAP,
) -> FeasibilityCertificate:
    model = model or CostModel()
    n, k = spec.days, spec.visiting_city_number
    if spec.origin not in db.city_state:
        return FeasibilityCertificate("infeasible", reason=f"unknown origin {spec.origin}")
    cands = _candidates(spec, db)
    if len(cands) < k:
        return FeasibilityCertificate("infeasible", reason="not enough destination cities")
    if n < k + 1:
        return FeasibilityCertificate("infeasible", reason=f"{n} days cannot fit {k + 1} travel days")

    pr = _Pricer(spec, db, model)
    nodes = 0
    best: tuple[float, Any] | None = None
    layouts = list(itertools.combinations(range(2, n), k - 1))
    for route in itertools.permutations(cands, k):
        for inner in layouts:
            nodes += 1
            if nodes > node_cap:
                return FeasibilityCertificate("undecided", reason=f"node cap {node_cap} exceeded", nodes=nodes)
            travel = (1,) + inner + (n,)
            found = _price(pr, spec, route, travel)
            if found is not None and (best is None or found[0] < best[0]):
                best = found
    if best is None:
        return FeasibilityCertificate("infeasible", reason="no plan satisfies the constraints", nodes=nodes)
    cost, parts = best
    if spec.budget is not None and cost > spec.budget:
        return FeasibilityCertificate("infeasible", min_cost=cost, reason=f"minimum cost {cost:g} exceeds budget", nodes=nodes)
    return FeasibilityCertificate("feasible", _build(spec, db, *parts), cost, nodes=nodes)


def _price(pr: _Pricer, spec: QuerySpec, route: tuple[str, ...], travel: tuple[int, ...]) -> tuple[float, Any] | None:
    stops = (spec.origin,) + route + (spec.origin,)
    legs_a: list[_Leg] | None = []
    legs_b: list[_Leg] | None = []
    for j, day in enumerate(travel):
        a, b = pr.leg(stops[j], stops[j + 1], day)
        if legs_a is not None:
            legs_a = legs_a + [a] if a is not None else None
        if legs_b is not None:
            legs_b = legs_b + [b] if b is not None else None
        if legs_a is None and legs_b is None:
            return None
    options = [ls for ls in (legs_a, legs_b) if ls is not None]
    legs = min(options, key=lambda ls: sum(x.cost for x in ls))
    total = sum(x.cost for x in legs)

    stays = []
    tables = []
    for j, city in enumerate(route):
        nights = travel[j + 1] - travel[j]
        s = pr.stay(city, nights)
        if s is None or len(pr.db.attractions_by_city.get(city, ())) < nights - 1:
            return None
        table = pr.meals(city, nights - 1)
        if not table:
            return None
        stays.append(s[1])
        tables.append(table)
        total += s[0]
    meals = _combine_meals(tables, pr.full)
    if meals is None:
        return None
    total += meals[0]
    picks = [tables[j][m][1] for j, m in enumerate(meals[1])]
    return total, (route, travel, legs, stays, picks)


def _build(spec: QuerySpec, db: SandboxDb, route, travel, legs, stays, picks) -> Plan:
    n = spec.days
    stops = (spec.origin,) + tuple(route) + (spec.origin,)
    days: list[DayEntry] = []
    j = -1
    meal_queue: list[RestaurantRecord] = []
    sights: list = []
    for d in range(1, n + 1):
        if d in travel:
            j = travel.index(d)
            leg = legs[j]
            acc = Place(stays[j].name, stays[j].city) if j < len(route) else None
            if j < len(route):
                meal_queue = list(picks[j])
                sights = list(db.attractions_by_city.get(route[j], ()))
            days.append(DayEntry(d, f"from {stops[j]} to {stops[j + 1]}", leg.leg, accommodation=acc))
            continue
        b, l, dn = meal_queue[0], meal_queue[1], meal_queue[2]
        meal_queue = meal_queue[3:]
        sight = sights.pop(0)
        days.append(DayEntry(
            d,
            route[j],
            None,
            Place(b.name, b.city),
            (Place(sight.name, sight.city),),
            Place(l.name, l.city),
            Place(dn.name, dn.city),
            Place(stays[j].name, stays[j].city),
        ))
    return Plan(tuple(days))


def estimate_budget(
    spec: QuerySpec,
    db: SandboxDb,
    model: CostModel | None = None,
    slack: float = DEFAULT_SLACK,
    cert: FeasibilityCertificate | None = None,
) -> int:
    """Round ``min_cost * slack`` half-up, never going below the minimum cost."""
    if slack < 1:
        raise ValueError("slack must be >= 1")
    if cert is None:
        cert = solve(spec.with_budget(None), db, model)
    if not cert.feasible or cert.min_cost is None:
        raise InfeasibleError(f"cannot budget an infeasible spec ({cert.status}: {cert.reason})")
    return max(int(math.floor(cert.min_cost * slack + 0.5)), int(math.ceil(cert.min_cost)))
