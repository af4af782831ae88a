"""Structured travel intent shared by synthesis, evaluation and rollout."""

from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Any

from .sandbox.generate import CUISINES

ROOM_RULES = ("parties", "smoking", "children under 10", "pets", "visitors")
ROOM_TYPE_PREFS = ("entire room", "private room", "shared room", "not shared room")
TRANSPORT_BANS = ("no flight", "no self-driving")
DIFFICULTIES = ("easy", "medium", "hard")
CONSTRAINT_KINDS = ("room_rule", "room_type", "cuisines", "transportation")


@dataclass(frozen=True)
class HardConstraintSet:
    room_rule: str | None = None
    room_type: str | None = None
    cuisines: tuple[str, ...] | None = None
    transportation: str | None = None

    def __post_init__(self) -> None:
        if self.room_rule is not None and self.room_rule not in ROOM_RULES:
            raise ValueError(f"unknown room rule {self.room_rule!r}")
        if self.room_type is not None and self.room_type not in ROOM_TYPE_PREFS:
            raise ValueError(f"unknown room type {self.room_type!r}")
        if self.transportation is not None and self.transportation not in TRANSPORT_BANS:
            raise ValueError(f"unknown transportation constraint {self.transportation!r}")
        if self.cuisines is not None:
            if not self.cuisines:
                raise ValueError("cuisine constraint must name at least one cuisine")
            bad = [c for c in self.cuisines if c not in CUISINES]
            if bad:
                raise ValueError(f"unknown cuisines {bad}")
            object.__setattr__(self, "cuisines", tuple(sorted(set(self.cuisines), key=CUISINES.index)))

    def present(self) -> tuple[str, ...]:
        return tuple(k for k in CONSTRAINT_KINDS if getattr(self, k) is not None)

    def without(self, kind: str) -> "HardConstraintSet":
        return HardConstraintSet(**{k: (None if k == kind else getattr(self, k)) for k in CONSTRAINT_KINDS})

    def to_json(self) -> dict[str, Any] | None:
        if not self.present():
            return None
        out: dict[str, Any] = {}
        for k in self.present():
            v = getattr(self, k)
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_json(cls, obj: dict[str, Any] | None) -> "HardConstraintSet":
        if not obj:
            return cls()
        unknown = set(obj) - set(CONSTRAINT_KINDS)
        if unknown:
            raise ValueError(f"unknown constraint keys {sorted(unknown)}")
        cuisines = obj.get("cuisines")
        return cls(
            room_rule=obj.get("room_rule"),
            room_type=obj.get("room_type"),
            cuisines=tuple(cuisines) if cuisines is not None else None,
            transportation=obj.get("transportation"),
        )


@dataclass(frozen=True)
class QuerySpec:
    """A trip request.

    ``destination`` is a city name when ``visiting_city_number == 1`` and a
    state name otherwise.
    """

    origin: str
    destination: str
    dates: tuple[str, ...]
    people: int = 1
    visiting_city_number: int = 1
    constraints: HardConstraintSet = field(default_factory=HardConstraintSet)
    budget: int | None = None
    difficulty: str = "easy"

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        if not self.dates:
            raise ValueError("a trip needs at least one date")
        parsed = [dt.date.fromisoformat(d) for d in self.dates]
        for a, b in zip(parsed, parsed[1:]):
            if (b - a).days != 1:
                raise ValueError("trip dates must be consecutive")
        if self.people < 1:
            raise ValueError("people must be >= 1")
        if self.visiting_city_number < 1:
            raise ValueError("visiting_city_number must be >= 1")
        if self.budget is not None and self.budget <= 0:
            raise ValueError("budget must be > 0")
        if self.difficulty not in DIFFICULTIES:
            raise ValueError(f"unknown difficulty {self.difficulty!r}")

    @property
    def days(self) -> int:
        return len(self.dates)

    @property
    def multi_city(self) -> bool:
        return self.visiting_city_number > 1

    def with_budget(self, budget: int | None) -> "QuerySpec":
        return _replace(self, budget=budget)

    def with_constraints(self, constraints: HardConstraintSet) -> "QuerySpec":
        return _replace(self, constraints=constraints)

    def to_json(self) -> dict[str, Any]:
        return {
            "org": self.origin,
            "dest": self.destination,
            "days": self.days,
            "visiting_city_number": self.visiting_city_number,
            "date": list(self.dates),
            "people_number": self.people,
            "hard_constraint": self.constraints.to_json(),
            "budget": self.budget,
            "level": self.difficulty,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "QuerySpec":
        spec = cls(
            origin=obj["org"],
            destination=obj["dest"],
            dates=tuple(obj["date"]),
            people=int(obj["people_number"]),
            visiting_city_number=int(obj.get("visiting_city_number", 1)),
            constraints=HardConstraintSet.from_json(obj.get("hard_constraint")),
            budget=obj.get("budget"),
            difficulty=obj.get("level", "easy"),
        )
        if "days" in obj and obj["days"] != spec.days:
            raise ValueError("days does not match the number of dates")
        return spec


def _replace(spec: QuerySpec, **changes: Any) -> QuerySpec:
    from dataclasses import replace

    return replace(spec, **changes)
