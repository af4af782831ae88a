"""Group-relative advantages, the clipped KL-free surrogate, and zero-variance filtering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

import numpy as np

from ..protocol import Trajectory


class BatchStructureError(ValueError):
    pass


@dataclass(frozen=True)
class ClipConfig:
    eps_low: float = 0.2
    eps_high: float = 0.28

    def __post_init__(self) -> None:
        if not 0 < self.eps_low < 1:
            raise ValueError("eps_low must lie in (0, 1)")
        if not self.eps_high > 0:
            raise ValueError("eps_high must be positive")


def group_advantages(rewards: Sequence[float], eps: float = 1e-8) -> np.ndarray:
    """(r - mean) / population std, or all zeros when the std is at most ``eps``."""
    r = np.asarray(rewards, dtype=float)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("a group needs at least two rewards")
    std = float(r.std())
    if not std > eps:
        return np.zeros_like(r)
    return (r - r.mean()) / std


@dataclass
class MemberRecord:
    """Decision-level view of one trajectory: (key, n, choice) plus sampling log-probs."""

    decisions: tuple[tuple[str, int, int], ...]
    old_logprobs: np.ndarray
    overlength: bool = False

    def __post_init__(self) -> None:
        self.old_logprobs = np.asarray(self.old_logprobs, dtype=float)
        if len(self.decisions) != self.old_logprobs.size:
            raise BatchStructureError(
                f"{len(self.decisions)} decisions but {self.old_logprobs.size} log-probabilities"
            )

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "MemberRecord":
        decisions = tuple(tuple(d[:3]) for d in (traj.decisions or ()))
        logps = traj.per_step_logprobs or ()
        return cls(decisions, np.asarray(logps, dtype=float), traj.termination == "context_exceeded")  # type: ignore[arg-type]


@dataclass
class GroupBatch:
    members: list[list[MemberRecord]]
    rewards: list[np.ndarray]
    groups: list[Any] = field(default_factory=list, repr=False)

    def __post_init__(self) -> None:
        if len(self.members) != len(self.rewards):
            raise BatchStructureError("one reward vector per group is required")
        self.rewards = [np.asarray(r, dtype=float) for r in self.rewards]
        for m, r in zip(self.members, self.rewards):
            if len(m) != r.size:
                raise BatchStructureError("reward vector length must equal group size")

    @classmethod
    def from_groups(cls, groups: Sequence[Any]) -> "GroupBatch":
        return cls(
            [[MemberRecord.from_trajectory(t) for t in g.trajectories] for g in groups],
            [np.asarray(g.rewards, dtype=float) for g in groups],
            list(groups),
        )

    def __len__(self) -> int:
        return len(self.members)

    @property
    def empty(self) -> bool:
        return not self.members

    def subset(self, keep: Sequence[int]) -> "GroupBatch":
        return GroupBatch(
            [self.members[i] for i in keep],
            [self.rewards[i] for i in keep],
            [self.groups[i] for i in keep] if self.groups else [],
        )

    def advantages(self, eps: float = 1e-8) -> list[np.ndarray]:
        # every member, overlength or not, takes part in normalization
        return [group_advantages(r, eps) for r in self.rewards]


def dapo_filter(batch: GroupBatch) -> GroupBatch:
    """Drop groups whose rewards are all equal; no replacements are drawn."""
    keep = [i for i, r in enumerate(batch.rewards) if r.size and np.any(r != r[0])]
    return batch.subset(keep)


class DecisionModel(Protocol):
    """What the surrogate needs from a policy: log-probs and their gradients."""

    theta: np.ndarray

    def decision_logprob(
        self, key: str, n: int, choice: int, theta: np.ndarray
    ) -> tuple[float, int | Sequence[int], np.ndarray]:
        """Return (log-prob, offsets, g) with d log-prob / d theta[off:off+n] = g for every offset."""
        ...


@dataclass
class SurrogateResult:
    objective: float
    grad: np.ndarray
    # per decision: True when the clipped branch is the active minimum
    clipped: list[bool] = field(default_factory=list)
    n_terms: int = 0


def surrogate_objective(
    batch: GroupBatch,
    advantages: Sequence[np.ndarray],
    clip: ClipConfig,
    model: DecisionModel,
    theta: np.ndarray | None = None,
) -> SurrogateResult:
    """Batch mean over groups of the per-group token-normalized clipped surrogate.

    Within a group, only non-overlength members contribute decision terms and
    decision counts; advantages come in precomputed over the whole group.
    """
    theta = model.theta if theta is None else theta
    if len(advantages) != len(batch.members):
        raise BatchStructureError("one advantage vector per group is required")
    grad = np.zeros_like(theta)
    total = 0.0
    clipped: list[bool] = []
    n_terms = 0
    lo, hi = 1.0 - clip.eps_low, 1.0 + clip.eps_high
    n_groups = len(batch.members)
    for members, adv in zip(batch.members, advantages):
        if len(adv) != len(members):
            raise BatchStructureError("advantage vector length must equal group size")
        norm = sum(len(m.decisions) for m in members if not m.overlength)
        if norm == 0:
            continue
        scale = 1.0 / (norm * n_groups)
        for m, a in zip(members, adv):
            if m.overlength:
                continue
            a = float(a)
            for (key, n, choice), old in zip(m.decisions, m.old_logprobs):
                lp, off, dlp = model.decision_logprob(key, n, choice, theta)
                rho = float(np.exp(lp - old))
                unclipped = rho * a
                clipped_term = min(max(rho, lo), hi) * a
                if unclipped <= clipped_term:
                    total += unclipped * scale
                    g = (a * rho * scale) * dlp
                    for o in (off,) if isinstance(off, int) else off:
                        grad[o : o + n] += g
                    clipped.append(False)
                else:
                    total += clipped_term * scale
                    clipped.append(True)
                n_terms += 1
    return SurrogateResult(total, grad, clipped, n_terms)


@dataclass
class FdReport:
    max_rel_error: float
    checked: int
    skipped: int
    worst_index: int | None = None
    notes: list[str] = field(default_factory=list)


def finite_difference_check(
    model: DecisionModel,
    batch: GroupBatch,
    clip: ClipConfig,
    h: float = 1e-5,
    advantages: Sequence[np.ndarray] | None = None,
    coords: Sequence[int] | None = None,
    floor: float = 1e-6,
) -> FdReport:
    """Compare the analytic gradient with central differences coordinate by coordinate.

    A coordinate is skipped (with a note) when either perturbation changes
    which branch of any min/clip is active, since the objective has a kink
    there. Relative error is ``|g - fd| / max(|g|, |fd|, floor)``.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    adv = batch.advantages() if advantages is None else list(advantages)
    theta = np.array(model.theta, dtype=float)
    base = surrogate_objective(batch, adv, clip, model, theta)
    idx = range(theta.size) if coords is None else coords
    worst, worst_i, checked, skipped = 0.0, None, 0, 0
    notes: list[str] = []
    for i in idx:
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        fp = surrogate_objective(batch, adv, clip, model, tp)
        fm = surrogate_objective(batch, adv, clip, model, tm)
        if fp.clipped != base.clipped or fm.clipped != base.clipped:
            skipped += 1
            notes.append(f"coordinate {i} skipped: clip branch changes within +-h")
            continue
        fd = (fp.objective - fm.objective) / (2 * h)
        g = float(base.grad[i])
        rel = abs(g - fd) / max(abs(g), abs(fd), floor)
        checked += 1
        if rel > worst:
            worst, worst_i = rel, i
    return FdReport(worst, checked, skipped, worst_i, notes)
