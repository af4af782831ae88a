"""Query sampling and certified dataset synthesis."""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from ..evaluation import CostModel
from ..query import (
    CONSTRAINT_KINDS,
    DIFFICULTIES,
    ROOM_RULES,
    ROOM_TYPE_PREFS,
    TRANSPORT_BANS,
    HardConstraintSet,
    QuerySpec,
)
from ..sandbox.db import SandboxDb
from ..sandbox.generate import CUISINES
from .query_text import render_query
from .solver import DEFAULT_SLACK, FeasibilityCertificate, estimate_budget, solve

TRIP_DAYS = (3, 5, 7)
DAY_WEIGHTS = {
    "easy": (0.5, 0.3, 0.2),
    "medium": (0.34, 0.33, 0.33),
    "hard": (0.2, 0.3, 0.5),
}
DEFAULT_SPLIT = (4, 3, 3)


class SynthesisWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DatasetItem:
    spec: QuerySpec
    text: str
    certificate: FeasibilityCertificate

    @property
    def difficulty(self) -> str:
        return self.spec.difficulty

    def to_json(self) -> dict[str, Any]:
        return {
            "spec": self.spec.to_json(),
            "text": self.text,
            "certificate": self.certificate.to_json(),
            "difficulty": self.difficulty,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "DatasetItem":
        return cls(QuerySpec.from_json(obj["spec"]), obj["text"], FeasibilityCertificate.from_json(obj["certificate"]))


def split_counts(total: int, ratio: tuple[int, int, int] = DEFAULT_SPLIT) -> dict[str, int]:
    """Split ``total`` over difficulties by ``ratio`` (largest remainder)."""
    s = sum(ratio)
    raw = [total * r / s for r in ratio]
    base = [int(x) for x in raw]
    order = sorted(range(3), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[: total - sum(base)]:
        base[i] += 1
    return dict(zip(DIFFICULTIES, base))


def _consecutive_runs(dates: list[str], n: int) -> list[int]:
    import datetime as dt

    parsed = [dt.date.fromisoformat(d) for d in dates]
    return [i for i in range(len(parsed) - n + 1) if (parsed[i + n - 1] - parsed[i]).days == n - 1]


def _sample_constraints(kinds: Iterable[str], rng: random.Random) -> HardConstraintSet:
    vals: dict[str, Any] = {}
    for k in kinds:
        if k == "room_rule":
            vals[k] = rng.choice(ROOM_RULES)
        elif k == "room_type":
            vals[k] = rng.choice(ROOM_TYPE_PREFS)
        elif k == "cuisines":
            vals[k] = tuple(rng.sample(CUISINES, rng.randint(1, 3)))
        else:
            vals[k] = rng.choice(TRANSPORT_BANS)
    return HardConstraintSet(**vals)


def sample_elements(
    difficulty: str,
    db: SandboxDb,
    rng: random.Random,
    trip_days: tuple[int, ...] = TRIP_DAYS,
) -> QuerySpec:
    """Draw an unbudgeted spec of the given difficulty.

    Trip length is drawn from ``trip_days`` with the difficulty's weights
    (uniform when ``trip_days`` is not the default).
    """
    if difficulty not in DIFFICULTIES:
        raise ValueError(f"unknown difficulty {difficulty!r}")
    states = sorted(db.cities)
    if len(states) < 2:
        raise ValueError("need at least two states to sample trips")
    weights = DAY_WEIGHTS[difficulty] if tuple(trip_days) == TRIP_DAYS else None
    days = rng.choices(trip_days, weights=weights)[0]
    k = (days - 1) // 2
    origin_state = rng.choice(states)
    origin = rng.choice(db.cities[origin_state])
    others = [s for s in states if s != origin_state and len(db.cities[s]) >= k]
    if not others:
        raise ValueError("no destination state has enough cities")
    dest_state = rng.choice(others)
    destination = rng.choice(db.cities[dest_state]) if k == 1 else dest_state
    all_dates = db.dates
    starts = _consecutive_runs(all_dates, days)
    if not starts:
        raise ValueError(f"database has no run of {days} consecutive dates")
    i = rng.choice(starts)
    dates = tuple(all_dates[i : i + days])
    if difficulty == "easy":
        people, kinds = 1, ()
    elif difficulty == "medium":
        people, kinds = rng.randint(2, 6), (rng.choice(CONSTRAINT_KINDS),)
    else:
        people = rng.randint(2, 6)
        kinds = tuple(sorted(rng.sample(CONSTRAINT_KINDS, rng.randint(2, len(CONSTRAINT_KINDS))), key=CONSTRAINT_KINDS.index))
    return QuerySpec(
        origin=origin,
        destination=destination,
        dates=dates,
        people=people,
        visiting_city_number=k,
        constraints=_sample_constraints(kinds, rng),
        budget=None,
        difficulty=difficulty,
    )


def synthesize_dataset(
    db: SandboxDb,
    counts: dict[str, int] | tuple[int, int, int],
    seed: int = 0,
    model: CostModel | None = None,
    slack: float = DEFAULT_SLACK,
    max_attempts_per_item: int = 50,
    paraphrase: Callable[[str], str] | None = None,
    trip_days: tuple[int, ...] = TRIP_DAYS,
) -> list[DatasetItem]:
    """Sample, certify and budget unique specs; a pure function of its inputs."""
    if not isinstance(counts, dict):
        counts = dict(zip(DIFFICULTIES, counts))
    # drop trip lengths the calendar cannot hold
    trip_days = tuple(d for d in trip_days if _consecutive_runs(db.dates, d)) or tuple(trip_days)
    rng = random.Random(seed)
    items: list[DatasetItem] = []
    seen: set[QuerySpec] = set()
    for difficulty in DIFFICULTIES:
        want = counts.get(difficulty, 0)
        got, attempts = 0, 0
        while got < want and attempts < want * max_attempts_per_item:
            attempts += 1
            spec = sample_elements(difficulty, db, rng, trip_days)
            cert = solve(spec, db, model)
            if not cert.feasible:
                continue
            spec = spec.with_budget(estimate_budget(spec, db, model, slack, cert=cert))
            if spec in seen:
                continue
            seen.add(spec)
            items.append(DatasetItem(spec, render_query(spec, paraphrase), cert))
            got += 1
        if got < want:
            warnings.warn(
                f"only {got} of {want} {difficulty} queries synthesized after {attempts} attempts",
                SynthesisWarning,
                stacklevel=2,
            )
    return items


def save_dataset(items: Iterable[DatasetItem], path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        for it in items:
            fh.write(json.dumps(it.to_json(), sort_keys=True) + "\n")
    return p


def load_dataset(path: str | Path) -> list[DatasetItem]:
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(DatasetItem.from_json(json.loads(line)))
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}:{n}: bad dataset record ({exc})") from None
    return out
