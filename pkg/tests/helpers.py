"""Independent oracles used by the tests.

``brute_check`` re-derives every rule outcome from the plan *text* with its
own line splitting and linear scans over the raw record lists; it shares no
code with the evaluator beyond the database record types.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import replace

import numpy as np

from travelrl.optim import ClipConfig, GroupBatch, ToyPolicy, finite_difference_check
from travelrl.plans import DayEntry, Place, Plan, TransportLeg
from travelrl.rollout import rollout_group

# acceptance verdicts, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}

_LEG = re.compile(r"^(?:Flight Number: ([^,\s]+)|(Self-driving|Taxi)), from (.+) to (.+), Cost: (\S+)$")
_MOVE = re.compile(r"^from (.+) to (.+)$")


def _place(s):
    if s == "-":
        return None
    name, _, city = s.rpartition(",")
    return (name.strip(), city.strip())


def _days(text):
    days = []
    for block in text.strip().split("\n\n"):
        lines = block.strip().split("\n")
        f = {}
        for ln in lines[1:]:
            k, _, v = ln.partition(": ")
            f[k] = v.strip()
        m = _MOVE.match(f["Current City"])
        leg = None
        if f["Transportation"] != "-":
            lm = _LEG.match(f["Transportation"])
            number, ground, a, b, cost = lm.groups()
            leg = {"mode": "Flight" if number else ground, "number": number, "from": a, "to": b, "cost": float(cost)}
        days.append({
            "move": (m.group(1), m.group(2)) if m else None,
            "city": f["Current City"],
            "leg": leg,
            "meals": [_place(f[k]) for k in ("Breakfast", "Lunch", "Dinner")],
            "sights": [] if f["Attraction"] == "-" else [_place(x) for x in f["Attraction"].split(";")],
            "stay": _place(f["Accommodation"]),
        })
    return days


def _flight(db, leg, date):
    for f in db.flights:
        if (f.flight_number, f.departure_city, f.destination_city, f.date) == (leg["number"], leg["from"], leg["to"], date):
            return f
    return None


def _drive(db, leg):
    for d in db.distances:
        if (d.departure_city, d.destination_city, d.mode) == (leg["from"], leg["to"], leg["mode"].lower()):
            return d
    return None


def _find(records, key):
    for r in records:
        if (r.name, r.city) == key:
            return r
    return None


def brute_check(text, spec, db, per_taxi=4, per_car=5):
    """Rule name -> pass/fail, keyed like ``RuleReport.outcomes()``."""
    days = _days(text)
    n = len(days)
    people = spec.people

    def date_of(i):
        return spec.dates[i] if i < len(spec.dates) else None

    # cost
    cost = 0.0
    for i, d in enumerate(days):
        leg = d["leg"]
        if leg:
            if leg["mode"] == "Flight":
                f = _flight(db, leg, date_of(i)) if date_of(i) else None
                cost += leg["cost"] if f is None else f.price * people
            else:
                r = _drive(db, leg)
                cap = per_taxi if leg["mode"] == "Taxi" else per_car
                cost += leg["cost"] if r is None else r.cost * math.ceil(people / cap)
        for m in d["meals"]:
            r = _find(db.restaurants, m) if m else None
            if r:
                cost += r.avg_cost * people
        r = _find(db.accommodations, d["stay"]) if d["stay"] else None
        if r:
            cost += r.price * math.ceil(people / r.maximum_occupancy)

    out = {}

    ok = True
    for i, d in enumerate(days):
        leg = d["leg"]
        if leg:
            if leg["mode"] == "Flight":
                ok &= date_of(i) is not None and _flight(db, leg, date_of(i)) is not None
            else:
                ok &= _drive(db, leg) is not None
        ok &= all(_find(db.restaurants, m) is not None for m in d["meals"] if m)
        ok &= all(_find(db.attractions, s) is not None for s in d["sights"])
        ok &= d["stay"] is None or _find(db.accommodations, d["stay"]) is not None
    out["within_sandbox"] = bool(ok)

    ok = n == spec.days
    for i, d in enumerate(days):
        if d["move"] and not d["leg"]:
            ok = False
        if i < n - 1 and d["stay"] is None:
            ok = False
        if not d["move"] and (None in d["meals"] or not d["sights"]):
            ok = False
    out["complete_information"] = ok

    ok = True
    for d in days:
        here = set(d["move"]) if d["move"] else {d["city"]}
        if d["leg"] and (d["leg"]["from"], d["leg"]["to"]) != d["move"]:
            ok = False
        things = [m for m in d["meals"] if m] + d["sights"] + ([d["stay"]] if d["stay"] else [])
        if any(t[1] not in here for t in things):
            ok = False
    out["within_current_city"] = ok

    out["reasonable_city_route"] = _route_ok(days, spec, db)

    meals = [m for d in days for m in d["meals"] if m]
    out["diverse_restaurants"] = len(meals) == len(set(meals))
    sights = [s for d in days for s in d["sights"]]
    out["diverse_attractions"] = len(sights) == len(set(sights))

    modes = [d["leg"]["mode"] for d in days if d["leg"]]
    out["non_conflict_transportation"] = not ("Self-driving" in modes and ("Flight" in modes or "Taxi" in modes))

    ok = True
    i = 0
    while i < n:
        stay = days[i]["stay"]
        if stay is None:
            i += 1
            continue
        j = i
        while j + 1 < n and days[j + 1]["stay"] == stay:
            j += 1
        r = _find(db.accommodations, stay)
        if r is not None and j - i + 1 < r.minimum_nights:
            ok = False
        i = j + 1
    out["minimum_nights"] = ok

    c = spec.constraints
    out["hard:budget"] = True if spec.budget is None else cost <= spec.budget
    stays = [d["stay"] for d in days if d["stay"]]
    recs = [_find(db.accommodations, s) for s in stays]
    if c.room_rule is not None:
        out["hard:room_rule"] = bool(recs) and all(r is not None and f"No {c.room_rule}" not in r.house_rules for r in recs)
    if c.room_type is not None:
        want = {
            "entire room": {"Entire home/apt"},
            "private room": {"Private room"},
            "shared room": {"Shared room"},
            "not shared room": {"Entire home/apt", "Private room"},
        }[c.room_type]
        out["hard:room_type"] = bool(recs) and all(r is not None and r.room_type in want for r in recs)
    if c.cuisines is not None:
        have = set()
        for m in meals:
            r = _find(db.restaurants, m)
            if r:
                have |= set(r.cuisines)
        out["hard:cuisines"] = set(c.cuisines) <= have
    if c.transportation is not None:
        banned = "Flight" if c.transportation == "no flight" else "Self-driving"
        out["hard:transportation"] = banned not in modes
    return out


def _route_ok(days, spec, db):
    if not days or days[0]["move"] is None or days[0]["move"][0] != spec.origin:
        return False
    path = [spec.origin]
    for i, d in enumerate(days):
        if d["move"] is None:
            if d["city"] != path[-1]:
                return False
            continue
        a, b = d["move"]
        if a != path[-1]:
            return False
        if b == spec.origin and i != len(days) - 1:
            return False
        path.append(b)
    if path[-1] != spec.origin or len(path) < 2:
        return False
    stops = path[1:-1]
    if len(set(stops)) != len(stops) or spec.origin in stops:
        return False
    if len(stops) != spec.visiting_city_number:
        return False
    if spec.visiting_city_number == 1:
        return stops == [spec.destination]
    return all(c in db.cities.get(spec.destination, ()) for c in stops)


# -- random plans ---------------------------------------------------------------------------


def _rand_place(db, rng, kind, city=None):
    pool = {"r": db.restaurants, "a": db.attractions, "h": db.accommodations}[kind]
    if rng.random() < 0.08:
        return Place("Nowhere Inn" if kind == "h" else "Mystery Spot", city or rng.choice(db.all_cities))
    cand = [r for r in pool if city is None or r.city == city] or list(pool)
    r = rng.choice(cand)
    return Place(r.name, r.city)


def _rand_leg(db, rng, a, b, date):
    u = rng.random()
    if u < 0.45:
        fl = [f for f in db.flights if f.departure_city == a and f.destination_city == b and (date is None or f.date == date)]
        if fl and rng.random() < 0.85:
            f = rng.choice(fl)
            return TransportLeg("Flight", a, b, float(f.price), f.flight_number)
        return TransportLeg("Flight", a, b, float(rng.randint(20, 400)), rng.choice([f.flight_number for f in db.flights[:50]] + ["F0000001"]))
    mode = "Taxi" if u < 0.7 else "Self-driving"
    return TransportLeg(mode, a, b, float(rng.randint(5, 300)))


def mutate_plan(plan, spec, db, rng):
    """Apply one random edit that keeps the plan renderable."""
    days = list(plan.days)
    i = rng.randrange(len(days))
    d = days[i]
    op = rng.randrange(14)
    here = d.end_city
    if op == 0:
        days[i] = replace(d, breakfast=None if rng.random() < 0.5 else _rand_place(db, rng, "r"))
    elif op == 1:
        days[i] = replace(d, lunch=_rand_place(db, rng, "r", here if rng.random() < 0.7 else None))
    elif op == 2:
        others = [m for x in days for m in x.meals if m is not None]
        if others:
            days[i] = replace(d, dinner=rng.choice(others))
    elif op == 3:
        days[i] = replace(d, attraction=() if rng.random() < 0.4 else (_rand_place(db, rng, "a", here if rng.random() < 0.7 else None),))
    elif op == 4:
        sights = [a for x in days for a in x.attraction]
        if sights:
            days[i] = replace(d, attraction=d.attraction + (rng.choice(sights),))
    elif op == 5:
        days[i] = replace(d, accommodation=None if rng.random() < 0.4 else _rand_place(db, rng, "h", here if rng.random() < 0.8 else None))
    elif op == 6:
        t = d.transfer
        if t is not None:
            days[i] = replace(d, transportation=None if rng.random() < 0.3 else _rand_leg(db, rng, t[0], t[1], spec.dates[i] if i < len(spec.dates) else None))
    elif op == 7:
        a, b = rng.sample(db.all_cities, 2)
        days[i] = replace(d, current_city=f"from {a} to {b}", transportation=_rand_leg(db, rng, a, b, None))
    elif op == 8:
        days[i] = replace(d, current_city=rng.choice(db.all_cities), transportation=None)
    elif op == 9:
        t = d.transfer
        if t is not None and d.transportation is not None:
            leg = d.transportation
            mode = rng.choice(["Taxi", "Self-driving"])
            days[i] = replace(d, transportation=TransportLeg(mode, leg.from_city, leg.to_city, leg.cost))
    elif op == 10 and len(days) > 1:
        del days[i]
    elif op == 11:
        days.insert(i, replace(d))
    elif op == 12:
        # a leg on a day that does not move
        if d.transfer is None:
            a, b = rng.sample(db.all_cities, 2)
            days[i] = replace(d, transportation=_rand_leg(db, rng, a, b, None))
    else:
        j = rng.randrange(len(days))
        days[i], days[j] = days[j], days[i]
    return Plan(tuple(replace(x, day=k + 1) for k, x in enumerate(days)))


def random_plan(spec, db, rng, witness=None, max_edits=4):
    """Either a mutated witness or a plan assembled from random records."""
    if witness is not None and rng.random() < 0.75:
        plan = witness
        for _ in range(rng.randint(0, max_edits)):
            plan = mutate_plan(plan, spec, db, rng)
        return plan
    n = spec.days + rng.choice([0, 0, 0, -1, 1]) if spec.days > 1 else spec.days
    cities = [c for c in db.cities.get(spec.destination, ())] or [spec.destination]
    cur = spec.origin
    days = []
    for k in range(1, n + 1):
        move = k == 1 or k == n or rng.random() < 0.25
        if move:
            nxt = spec.origin if k == n else rng.choice(cities)
            leg = _rand_leg(db, rng, cur, nxt, spec.dates[k - 1] if k <= len(spec.dates) else None)
            day = DayEntry(k, f"from {cur} to {nxt}", leg if rng.random() < 0.95 else None,
                           accommodation=_rand_place(db, rng, "h", nxt) if k < n else None)
            cur = nxt
        else:
            day = DayEntry(k, cur, None, _rand_place(db, rng, "r", cur), (_rand_place(db, rng, "a", cur),),
                           _rand_place(db, rng, "r", cur), _rand_place(db, rng, "r", cur),
                           _rand_place(db, rng, "h", cur))
        days.append(day)
    return Plan(tuple(days))


def rng_for(i: int) -> random.Random:
    return random.Random(10_007 * i + 3)


def fd_point(task, k):
    """Random toy parameters, off-policy old log-probs, random advantages; returns the FD report."""
    rng = np.random.default_rng(1000 + k)
    pol = ToyPolicy(task.db)
    picks = rng.choice(len(task.train), size=2, replace=False)
    for j in picks:
        it = task.train[int(j)]
        rollout_group(pol, it.spec, task.db, 4, seed=k, query=it.text)
    pol.theta = rng.normal(scale=0.5, size=pol.theta.size)
    groups = []
    for j in picks:
        it = task.train[int(j)]
        groups.append(rollout_group(pol, it.spec, task.db, 4, seed=k + 1, query=it.text))
    batch = GroupBatch.from_groups(groups)
    adv = [rng.normal(size=len(m)) for m in batch.members]
    pol.theta = pol.theta + rng.normal(scale=0.05, size=pol.theta.size)
    used = sorted({o + i for m in batch.members for mem in m for (key, n, _c) in mem.decisions
                   for o in pol.offsets(key, n) for i in range(n)})
    coords = rng.choice(used, size=min(25, len(used)), replace=False)
    return finite_difference_check(pol, batch, ClipConfig(), h=1e-5, advantages=adv, coords=coords)
