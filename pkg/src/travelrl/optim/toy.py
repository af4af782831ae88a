"""A tabular softmax policy on a mini travel task.

The mini-task is 3-day, single-city trips over the ``mini`` sandbox. The
policy fills the plan through a fixed sequence of categorical decisions
(legs, stay, meals, sight). Each decision reads its logits from a table
keyed by the slot and the query-spec features that define or matter for its
candidates, so the whole policy is a flat parameter vector with closed-form
log-prob gradients.

With ``use_tools`` the policy first looks things up. A failed lookup leads
to a retry decision; moving on without the data leaves that part of the
plan blind, and blind choices name places the sandbox does not know.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..plans import DayEntry, Place, Plan, TransportLeg, render_plan_text
from ..protocol import parse_turn
from ..query import QuerySpec
from ..rollout.policy import Decision, Emission, Policy, answer_turn, is_failure_observation, tool_turn
from ..rollout.prompt import Message, exchanges, user_query
from ..sandbox.db import SandboxDb
from ..sandbox.generate import generate_db
from ..synthesis.dataset import DatasetItem, split_counts, synthesize_dataset
from ..synthesis.query_text import extract_spec

MODES = ("Flight", "Taxi", "Self-driving")
MEAL_SLOTS = ("breakfast", "lunch", "dinner")
MAX_RETRIES = 3
BLIND_FLIGHT = "F0000000"


@dataclass
class MiniTask:
    db: SandboxDb
    train: list[DatasetItem]
    val: list[DatasetItem]


def make_minitask(seed: int = 0, n_train: int = 300, n_val: int = 100, scale: str = "mini") -> MiniTask:
    """Mini sandbox plus disjoint train and validation pools of 3-day trips (4:3:3)."""
    db = generate_db(seed, scale)
    items = synthesize_dataset(db, split_counts(n_train + n_val), seed=seed, trip_days=(3,))
    random.Random(seed).shuffle(items)
    return MiniTask(db, items[:n_train], items[n_train : n_train + n_val])


class ToyPolicy(Policy):
    """Softmax over decision slots with additive per-feature logit tables, all zero at start."""

    name = "toy"

    def __init__(self, db: SandboxDb, temperature: float = 1.0, use_tools: bool = False):
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        self.db = db
        self.temperature = temperature
        self.use_tools = use_tools
        self.theta = np.zeros(0)
        self.index: dict[str, tuple[int, int]] = {}
        self._specs: dict[str, QuerySpec] = {}
        self._offsets: dict[str, tuple[int, ...]] = {}

    # -- parameter table ------------------------------------------------------------------

    def slot(self, key: str, n: int) -> int:
        """Offset of one logit table, registering it on first use."""
        hit = self.index.get(key)
        if hit is not None:
            if hit[1] != n:
                raise ValueError(f"slot {key!r} registered with {hit[1]} candidates, asked for {n}")
            return hit[0]
        off = self.theta.size
        self.index[key] = (off, n)
        self.theta = np.concatenate([self.theta, np.zeros(n)])
        return off

    def offsets(self, key: str, n: int) -> tuple[int, ...]:
        """Tables whose logits add up for a decision key ``slot|primary|extra|...``.

        The primary feature gets its own table and every extra feature one
        table in interaction with the primary, so the logits generalize across
        combinations never seen together. With two or more extras the full
        combination also gets a table.
        """
        hit = self._offsets.get(key)
        if hit is None:
            parts = key.split("|")
            base = "|".join(parts[:2])
            keys = [base] + [f"{base}|{p}" for p in parts[2:]]
            if len(parts) > 3:
                keys.append(key)
            hit = tuple(self.slot(k, n) for k in keys)
            self._offsets[key] = hit
        return hit

    def logits(self, key: str, n: int, theta: np.ndarray | None = None) -> np.ndarray:
        offs = self.offsets(key, n)  # may grow theta
        th = self.theta if theta is None else theta
        z = np.zeros(n)
        for off in offs:
            z += th[off : off + n]
        return z / self.temperature

    def probs(self, key: str, n: int, theta: np.ndarray | None = None) -> list[float]:
        z = self.logits(key, n, theta).tolist()
        m = max(z)
        e = [math.exp(x - m) for x in z]
        s = sum(e)
        return [x / s for x in e]

    def decision_logprob(
        self, key: str, n: int, choice: int, theta: np.ndarray
    ) -> tuple[float, tuple[int, ...], np.ndarray]:
        z = self.logits(key, n, theta)
        m = z.max()
        lse = m + math.log(float(np.exp(z - m).sum()))
        d = -np.exp(z - lse)
        d[choice] += 1.0
        return float(z[choice] - lse), self.offsets(key, n), d / self.temperature

    def get_state(self) -> dict[str, Any]:
        return {
            "temperature": self.temperature,
            "use_tools": self.use_tools,
            "index": {k: list(v) for k, v in self.index.items()},
            "theta": self.theta.tolist(),
        }

    def set_state(self, state: dict[str, Any]) -> None:
        self.temperature = float(state["temperature"])
        self.use_tools = bool(state.get("use_tools", self.use_tools))
        self.index = {k: (int(v[0]), int(v[1])) for k, v in state["index"].items()}
        self._offsets = {}
        self.theta = np.asarray(state["theta"], dtype=float)

    def save(self, path: str | Path) -> Path:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(self.get_state(), sort_keys=True))
        return p

    def load(self, path: str | Path) -> "ToyPolicy":
        self.set_state(json.loads(Path(path).read_text()))
        return self

    # -- acting -----------------------------------------------------------------------------

    def _spec(self, query: str) -> QuerySpec:
        spec = self._specs.get(query)
        if spec is None:
            spec = self._specs[query] = extract_spec(query)
        return spec

    def next_emission(
        self,
        context: list[Message],
        rng: np.random.Generator,
        forced: Sequence[int] = (),
        greedy: bool = False,
    ) -> Emission:
        spec = self._spec(user_query(context))
        if spec.days != 3 or spec.multi_city:
            raise ValueError("the toy policy only handles 3-day single-city trips")
        chooser = _Chooser(self, rng, forced, greedy)
        known = {"out": True, "ret": True, "acc": True, "food": True, "sight": True}
        if self.use_tools:
            step = self._tool_step(spec, context, chooser)
            if isinstance(step, str):
                return Emission(step, tuple(chooser.decisions))
            known = step
        plan = self._plan(spec, chooser, known)
        text = answer_turn("Filling in the plan.", render_plan_text(plan))
        return Emission(text, tuple(chooser.decisions))

    def _lookups(self, spec: QuerySpec) -> list[tuple[str, str, dict[str, str]]]:
        o, d = spec.origin, spec.destination
        return [
            ("out", "SearchFlight", {"departure": o, "destination": d, "date": spec.dates[0]}),
            ("ret", "SearchFlight", {"departure": d, "destination": o, "date": spec.dates[-1]}),
            ("acc", "SearchAccommodation", {"city": d}),
            ("food", "SearchRestaurant", {"city": d}),
            ("sight", "SearchAttraction", {"city": d}),
        ]

    def _tool_step(self, spec: QuerySpec, context: list[Message], chooser: "_Chooser") -> str | dict[str, bool]:
        """Either the next tool-call text or, once lookups are done, what is known."""
        lookups = self._lookups(spec)
        calls = [(tool, args) for _, tool, args in lookups]
        known = {name: False for name, _, _ in lookups}
        ptr, attempts, failed = 0, 0, False
        for text, obs in exchanges(context):
            action = parse_turn(text).action
            j = calls.index((action.name, action.arguments), ptr)  # type: ignore[union-attr]
            attempts = attempts + 1 if j == ptr and failed else 1
            ptr, failed = j, is_failure_observation(obs)
            known[lookups[j][0]] |= not failed
            if not failed or attempts > MAX_RETRIES:
                ptr, failed = j + 1, False
        if failed and chooser.choose(f"retry|{lookups[ptr][0]}|attempt={attempts}", 2) == 1:
            ptr += 1
        if ptr < len(lookups):
            _, tool, args = lookups[ptr]
            return tool_turn(f"Look up with {tool}.", tool, args)
        return known

    def _leg(self, spec: QuerySpec, chooser: "_Chooser", which: str, prev_mode: str | None, known: bool) -> TransportLeg:
        a, b, date = (
            (spec.origin, spec.destination, spec.dates[0])
            if which == "out"
            else (spec.destination, spec.origin, spec.dates[-1])
        )
        flights = sorted(self.db.flights_by_route.get((a, b, date), ()), key=lambda f: (f.price, f.flight_number))
        ban = spec.constraints.transportation or "none"
        has = int(bool(flights)) if known else 2
        bucket = "1" if spec.people == 1 else "2+"
        key = f"{which}_mode|ban={ban}|flights={has}|p={bucket}"
        if prev_mode is not None:
            key += f"|prev={prev_mode}"
        mode = MODES[chooser.choose(key, len(MODES))]
        if mode == "Flight":
            if not flights or not known:
                return TransportLeg("Flight", a, b, 0.0, BLIND_FLIGHT)
            # candidates are ranked by price, so the slot generalizes across dates
            f = flights[chooser.choose(f"{which}_flight|n={len(flights)}|p={bucket}", len(flights))] if len(flights) > 1 else flights[0]
            return TransportLeg("Flight", a, b, float(f.price), f.flight_number)
        rec = self.db.distance_by_route.get((a, b, mode.lower()))
        return TransportLeg(mode, a, b, float(rec.cost) if rec else 0.0)

    def _plan(self, spec: QuerySpec, chooser: "_Chooser", known: dict[str, bool]) -> Plan:
        o, d = spec.origin, spec.destination
        c = spec.constraints
        bucket = "1" if spec.people == 1 else "2+"
        out = self._leg(spec, chooser, "out", None, known["out"])
        ret = self._leg(spec, chooser, "ret", out.mode, known["ret"])

        stays = self.db.accommodations_by_city.get(d, ())
        if known["acc"] and stays:
            key = f"acc|{d}|rule={c.room_rule}|type={c.room_type}|p={bucket}"
            r = stays[chooser.choose(key, len(stays))]
            acc = Place(r.name, r.city)
        else:
            acc = Place("Unlisted stay", d)

        rests = self.db.restaurants_by_city.get(d, ())
        cuisines = c.cuisines or ()
        meals = []
        for i, slot in enumerate(MEAL_SLOTS):
            if known["food"] and rests:
                target = cuisines[i] if i < len(cuisines) else "any"
                r = rests[chooser.choose(f"{slot}|{d}|cuisine={target}|p={bucket}", len(rests))]
                meals.append(Place(r.name, r.city))
            else:
                meals.append(Place(f"Unlisted {slot} spot", d))

        sights = self.db.attractions_by_city.get(d, ())
        if known["sight"] and sights:
            s = sights[chooser.choose(f"attraction|{d}", len(sights))]
            sight = Place(s.name, s.city)
        else:
            sight = Place("Unlisted sight", d)

        return Plan((
            DayEntry(1, f"from {o} to {d}", out, accommodation=acc),
            DayEntry(2, d, None, meals[0], (sight,), meals[1], meals[2], acc),
            DayEntry(3, f"from {d} to {o}", ret),
        ))


class _Chooser:
    """Samples (or replays forced) categorical decisions and records them."""

    def __init__(self, policy: ToyPolicy, rng: np.random.Generator, forced: Sequence[int], greedy: bool = False):
        self.policy = policy
        self.greedy = greedy
        self.rng = rng
        self.forced = forced
        self.decisions: list[Decision] = []

    def choose(self, key: str, n: int) -> int:
        p = self.policy.probs(key, n)
        i = len(self.decisions)
        if i < len(self.forced):
            c = int(self.forced[i])
        elif self.greedy:
            c = max(range(n), key=lambda j: p[j])
        else:
            u = self.rng.random()
            acc, c = 0.0, n - 1
            for j, pj in enumerate(p):
                acc += pj
                if u < acc:
                    c = j
                    break
        ent = -sum(x * math.log(x) for x in p if x > 0)
        self.decisions.append(Decision(key, n, c, math.log(p[c]) if p[c] > 0 else -math.inf, ent))
        return c


class PrefixPolicy(Policy):
    """Replays a fixed prefix of decisions, then lets the wrapped policy sample."""

    def __init__(self, base: ToyPolicy, prefix: Sequence[int]):
        self.base = base
        self.prefix = list(prefix)
        self.cursor = 0
        self.name = base.name

    def next_emission(self, context: list[Message], rng: np.random.Generator) -> Emission:
        em = self.base.next_emission(context, rng, forced=self.prefix[self.cursor :])
        self.cursor += len(em.decisions)
        return em


class GreedyPolicy(Policy):
    """Argmax view of a ToyPolicy, for evaluation."""

    def __init__(self, base: ToyPolicy):
        self.base = base
        self.name = f"{base.name}-greedy"

    def next_emission(self, context: list[Message], rng: np.random.Generator) -> Emission:
        return self.base.next_emission(context, rng, greedy=True)
