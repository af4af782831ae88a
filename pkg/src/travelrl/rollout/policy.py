"""Policy seat: the abstract interface plus the oracle and random policies."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..evaluation import CostModel
from ..plans import Plan, render_plan_text
from ..query import QuerySpec
from ..sandbox.db import SandboxDb
from ..sandbox.tools import FAILURE_TEMPLATE, TOOL_ARGS
from ..synthesis.query_text import QueryTextError, extract_spec
from ..synthesis.solver import FeasibilityCertificate, solve
from .prompt import Message, exchanges, user_query


@dataclass(frozen=True)
class Decision:
    """One sampled categorical choice, the unit that carries a log-probability."""

    key: str
    n: int
    choice: int
    logprob: float
    entropy: float = 0.0


@dataclass(frozen=True)
class Emission:
    text: str
    decisions: tuple[Decision, ...] = ()


class PolicyTransportError(RuntimeError):
    """The policy could not be reached (remote endpoints only)."""


class Policy:
    name = "policy"

    def next_emission(self, context: list[Message], rng: np.random.Generator) -> Emission:
        raise NotImplementedError


def is_failure_observation(text: str | None) -> bool:
    if text is None:
        return False
    head, tail = FAILURE_TEMPLATE.split("{tool_name}")
    return text.startswith(head) and text.endswith(tail)


def tool_turn(thought: str, name: str, arguments: dict[str, str]) -> str:
    body = json.dumps({"name": name, "arguments": arguments})
    return f"<think>{thought}</think>\n<tool_call>{body}</tool_call>"


def answer_turn(thought: str, text: str) -> str:
    return f"<think>{thought}</think>\n<answer>{text}</answer>"


# -- oracle -----------------------------------------------------------------------------------


def oracle_script(spec: QuerySpec, plan: Plan) -> list[tuple[str, str, dict[str, str]]]:
    """Tool calls that gather everything the plan uses, as (thought, tool, args)."""
    script: list[tuple[str, str, dict[str, str]]] = []
    if spec.multi_city:
        script.append((f"Find the cities in {spec.destination}.", "SearchCity", {"state": spec.destination}))
    stays: list[str] = []
    for d in plan.days:
        leg = d.transportation
        if leg is None:
            continue
        if leg.mode == "Flight":
            args = {"departure": leg.from_city, "destination": leg.to_city, "date": spec.dates[d.day - 1]}
            script.append((f"Check flights from {leg.from_city} to {leg.to_city}.", "SearchFlight", args))
        else:
            mode = "taxi" if leg.mode == "Taxi" else "self-driving"
            args = {"departure": leg.from_city, "destination": leg.to_city, "mode": mode}
            script.append((f"Check {mode} from {leg.from_city} to {leg.to_city}.", "GoogleDistanceMatrix", args))
        if leg.to_city != spec.origin:
            stays.append(leg.to_city)
    for city in stays:
        for tool, what in (("SearchAccommodation", "places to stay"), ("SearchRestaurant", "restaurants"),
                           ("SearchAttraction", "attractions")):
            script.append((f"Look up {what} in {city}.", tool, {"city": city}))
    return script


class OraclePolicy(Policy):
    """Replays the solver's plan: gathers its facts with tools, then answers with it.

    The query spec is recovered from the query text, so the policy needs nothing but
    the conversation. Failed tool calls are retried up to ``max_retries`` times.
    """

    name = "oracle"

    def __init__(self, db: SandboxDb, model: CostModel | None = None, max_retries: int = 3):
        self.db = db
        self.model = model
        self.max_retries = max_retries
        self._specs: dict[str, QuerySpec | None] = {}
        self._certs: dict[QuerySpec, FeasibilityCertificate] = {}

    def __getstate__(self) -> dict[str, Any]:
        state = dict(self.__dict__)
        state["_specs"], state["_certs"] = {}, {}
        return state

    def _spec(self, query: str) -> QuerySpec | None:
        if query not in self._specs:
            try:
                self._specs[query] = extract_spec(query)
            except (QueryTextError, ValueError):
                self._specs[query] = None
        return self._specs[query]

    def certificate(self, spec: QuerySpec) -> FeasibilityCertificate:
        if spec not in self._certs:
            self._certs[spec] = solve(spec, self.db, self.model)
        return self._certs[spec]

    def next_emission(self, context: list[Message], rng: np.random.Generator) -> Emission:
        spec = self._spec(user_query(context))
        if spec is None:
            return Emission(answer_turn("I cannot read this request.", ""))
        cert = self.certificate(spec)
        if not cert.feasible or cert.witness is None:
            return Emission(answer_turn("No plan satisfies this request.", ""))
        script = oracle_script(spec, cert.witness)
        ptr = retries = 0
        for _, obs in exchanges(context):
            if is_failure_observation(obs) and retries < self.max_retries:
                retries += 1
            else:
                ptr, retries = ptr + 1, 0
        if ptr < len(script):
            thought, tool, args = script[ptr]
            if retries:
                thought = f"The tool failed, trying again. {thought}"
            return Emission(tool_turn(thought, tool, args))
        return Emission(answer_turn("I have everything needed for the plan.", render_plan_text(cert.witness)))


# -- random -----------------------------------------------------------------------------------


_GARBAGE = (
    "",
    "<think>",
    "<answer>Day 1:</answer>",
    "<think>x</think><tool_call>{not json}</tool_call>",
    "<think>a</think><think>b</think><answer>-</answer>",
    "<think>x</think><tool_call>{\"name\": \"SearchCity\"}</tool_call>",
    "<think>x</think> trailing <answer>-</answer>",
)


class RandomPolicy(Policy):
    """Floor baseline and protocol fuzzer.

    Emits schema-valid tool calls with arguments drawn from the sandbox's
    vocabulary, occasionally malformed turns, and eventually a random plan
    with the right number of days.
    """

    name = "random"

    def __init__(self, db: SandboxDb, p_answer: float = 0.2, p_garbage: float = 0.02):
        self.db = db
        self.p_answer = p_answer
        self.p_garbage = p_garbage
        self.cities = sorted(db.all_cities)
        self.dates = list(db.dates) or ["2022-01-01"]

    def _arg(self, name: str, rng: np.random.Generator) -> str:
        if name == "state":
            return str(rng.choice(sorted(self.db.cities)))
        if name == "date":
            return str(rng.choice(self.dates))
        if name == "mode":
            return str(rng.choice(["self-driving", "taxi", "driving"]))
        return str(rng.choice(self.cities))

    def _place(self, pool: tuple[Any, ...], rng: np.random.Generator) -> str:
        if not pool or rng.random() < 0.1:
            return "-"
        r = pool[int(rng.integers(len(pool)))]
        return f"{r.name}, {r.city}"

    def random_plan(self, days: int, rng: np.random.Generator) -> str:
        blocks = []
        city = str(rng.choice(self.cities))
        for d in range(1, days + 1):
            prev = city
            move = d == 1 or d == days or rng.random() < 0.3
            if move:
                city = str(rng.choice(self.cities))
                current = f"from {prev} to {city}"
                flights = [f for f in self.db.flights_by_route.get((prev, city, self.dates[(d - 1) % len(self.dates)]), ())]
                if flights and rng.random() < 0.5:
                    f = flights[int(rng.integers(len(flights)))]
                    trans = f"Flight Number: {f.flight_number}, from {prev} to {city}, Cost: {f.price}"
                else:
                    trans = f"{rng.choice(['Taxi', 'Self-driving'])}, from {prev} to {city}, Cost: {int(rng.integers(10, 500))}"
            else:
                current, trans = city, "-"
            rests = self.db.restaurants_by_city.get(city, ())
            sights = self.db.attractions_by_city.get(city, ())
            stays = self.db.accommodations_by_city.get(city, ())
            blocks.append("\n".join([
                f"Day {d}:",
                f"Current City: {current}",
                f"Transportation: {trans}",
                f"Breakfast: {self._place(rests, rng)}",
                f"Attraction: {self._place(sights, rng)}",
                f"Lunch: {self._place(rests, rng)}",
                f"Dinner: {self._place(rests, rng)}",
                f"Accommodation: {self._place(stays, rng) if d < days else '-'}",
            ]))
        return "\n\n".join(blocks)

    def next_emission(self, context: list[Message], rng: np.random.Generator) -> Emission:
        u = rng.random()
        if u < self.p_garbage:
            return Emission(str(rng.choice(_GARBAGE)))
        if u < self.p_garbage + self.p_answer:
            try:
                days = extract_spec(user_query(context)).days
            except (QueryTextError, ValueError):
                days = int(rng.choice([3, 5, 7]))
            return Emission(answer_turn("Time to answer.", self.random_plan(days, rng)))
        tool = str(rng.choice(list(TOOL_ARGS)))
        args = {a: self._arg(a, rng) for a in TOOL_ARGS[tool]}
        return Emission(tool_turn(f"Try {tool}.", tool, args))


class SilentPolicy(Policy):
    """Always answers with an empty plan; a degenerate baseline."""

    name = "silent"

    def next_emission(self, context: list[Message], rng: np.random.Generator) -> Emission:
        return Emission(answer_turn("Nothing to add.", ""))

