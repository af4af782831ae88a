"""Entropy-triggered branching of partial rollouts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

from .. import seeding
from ..query import QuerySpec
from ..rollout.runner import RolloutConfigError, RolloutGroup, member_streams, rollout
from ..sandbox.db import SandboxDb
from ..synthesis.query_text import render_query
from .toy import PrefixPolicy, ToyPolicy


@dataclass(frozen=True)
class ArpoConfig:
    entropy_threshold: float = 0.5
    branch_factor: int = 2
    global_rollout_budget: int = 16

    def __post_init__(self) -> None:
        if math.isnan(self.entropy_threshold):
            raise ValueError("entropy_threshold must be a number")
        if self.branch_factor < 2:
            raise ValueError("branch_factor must be at least 2")
        if self.global_rollout_budget < 1:
            raise ValueError("global_rollout_budget must be positive")

    def to_json(self) -> dict[str, Any]:
        return {
            "entropy_threshold": self.entropy_threshold,
            "branch_factor": self.branch_factor,
            "global_rollout_budget": self.global_rollout_budget,
        }


def branch_points(entropies: tuple[float, ...], threshold: float) -> list[tuple[int, float]]:
    """Decision indices t >= 1 where the entropy rises by more than ``threshold``."""
    out = []
    for t in range(1, len(entropies)):
        delta = entropies[t] - entropies[t - 1]
        if delta > threshold:
            out.append((t, delta))
    return out


def arpo_rollout_group(
    policy: ToyPolicy,
    spec: QuerySpec,
    db: SandboxDb,
    G: int = 8,
    cfg: ArpoConfig | None = None,
    *,
    seed: int = 0,
    query: str | None = None,
    spec_key: int | None = None,
    **kwargs: Any,
) -> RolloutGroup:
    """G root rollouts, then branches at entropy jumps until the rollout budget is spent.

    Root i uses the same streams as member i of ``rollout_group``. A branch
    replays the root's first t decisions, resamples from decision t on with
    its own stream, and replays the root's failure stream from the start, so
    its environment matches the root's up to the branch point. Branches join
    the root's group; only roots branch.
    """
    cfg = cfg or ArpoConfig()
    if G < 2:
        raise RolloutConfigError(f"group size {G} is too small for training")
    if cfg.global_rollout_budget < G:
        raise RolloutConfigError("global_rollout_budget must be at least G")
    sid = seeding.spec_id(spec) if spec_key is None else spec_key
    query = query if query is not None else render_query(spec)
    roots = []
    for i in range(G):
        prng, frng = member_streams(seed, sid, i)
        roots.append(rollout(policy, spec, db, query=query, rng=prng, failure_rng=frng, **kwargs))
    results = list(roots)
    log: list[dict[str, Any]] = []
    for i, root in enumerate(roots):
        choices = [d[2] for d in root.trajectory.decisions or ()]
        for t, delta in branch_points(root.entropies, cfg.entropy_threshold):
            room = cfg.global_rollout_budget - len(results)
            if room <= 0:
                break
            k = min(cfg.branch_factor - 1, room)
            for b in range(k):
                prng = seeding.stream(seed, sid, i, seeding.BRANCH, t, b)
                frng = seeding.stream(seed, sid, i, seeding.FAILURE)
                results.append(rollout(PrefixPolicy(policy, choices[:t]), spec, db, query=query,
                                       rng=prng, failure_rng=frng, **kwargs))
            log.append({"root": i, "step": t, "delta": delta, "branches": k})
    return RolloutGroup(
        spec,
        [r.trajectory for r in results],
        [r.reward for r in results],
        [r.scores for r in results],
        results,
        log,
    )
