"""Scalar rewards from ScoreSets, including an epoch-staged curriculum."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .evaluation import ScoreSet

BASE_KINDS = ("Sum", "Macro", "Success")
KINDS = BASE_KINDS + ("Curriculum",)
MAX_REWARD = {"Sum": 5.0, "Macro": 3.0, "Success": 1.0}


class RewardConfigError(ValueError):
    pass


def default_schedule(n_epochs: int = 5) -> tuple[tuple[int, int, str], ...]:
    """Split ``n_epochs`` 40/40/20 into Sum, Macro and Success stages.

    Stages are inclusive ``(first, last, kind)`` ranges; empty stages are dropped.
    """
    if n_epochs < 1:
        raise RewardConfigError("curriculum needs at least one epoch")
    b1 = int(0.4 * n_epochs + 0.5)
    b2 = int(0.8 * n_epochs + 0.5)
    stages = ((0, b1 - 1, "Sum"), (b1, b2 - 1, "Macro"), (b2, n_epochs - 1, "Success"))
    return tuple(s for s in stages if s[0] <= s[1])


@dataclass(frozen=True)
class RewardScheme:
    kind: str = "Sum"
    schedule: tuple[tuple[int, int, str], ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise RewardConfigError(f"unknown reward kind {self.kind!r}; expected one of {KINDS}")
        sched = tuple(tuple(s) for s in self.schedule)
        object.__setattr__(self, "schedule", sched)
        if self.kind != "Curriculum":
            return
        if not sched:
            object.__setattr__(self, "schedule", default_schedule())
            sched = self.schedule
        expect = 0
        for first, last, base in sched:
            if base not in BASE_KINDS:
                raise RewardConfigError(f"curriculum stage kind must be one of {BASE_KINDS}, got {base!r}")
            if first != expect or last < first:
                raise RewardConfigError("curriculum stages must be contiguous, ordered and start at epoch 0")
            expect = last + 1

    @classmethod
    def curriculum(cls, n_epochs: int = 5) -> "RewardScheme":
        return cls("Curriculum", default_schedule(n_epochs))

    @property
    def n_epochs(self) -> int | None:
        return self.schedule[-1][1] + 1 if self.schedule else None

    def active(self, epoch: int) -> str:
        if self.kind != "Curriculum":
            return self.kind
        for first, last, base in self.schedule:
            if first <= epoch <= last:
                return base
        raise RewardConfigError(f"epoch {epoch} is outside the curriculum schedule")

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "schedule": [list(s) for s in self.schedule]}

    @classmethod
    def from_json(cls, obj: dict[str, Any] | str) -> "RewardScheme":
        if isinstance(obj, str):
            return cls(obj)
        return cls(obj["kind"], tuple(tuple(s) for s in obj.get("schedule", ())))


def base_reward(kind: str, s: ScoreSet) -> float:
    if kind == "Sum":
        return s.cs_micro + s.cs_macro + s.hard_micro + s.hard_macro + s.success
    if kind == "Macro":
        return float(s.cs_macro + s.hard_macro + s.success)
    if kind == "Success":
        return float(s.success)
    raise RewardConfigError(f"unknown base reward kind {kind!r}")


def reward(scheme: RewardScheme, scores: ScoreSet, epoch: int = 0) -> float:
    if epoch < 0:
        raise RewardConfigError("epoch must be nonnegative")
    return base_reward(scheme.active(epoch), scores)
