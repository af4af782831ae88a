"""Episode loop, rollout groups and benchmark runs."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .. import seeding
from ..evaluation import AnswerScore, CostModel, ScoreSet, score_answer, score_failure
from ..protocol import (
    Budget,
    FormatError,
    ToolCall,
    Trajectory,
    Turn,
    append_turn,
    count_tokens,
    new_trajectory,
    parse_turn,
    terminate,
    trajectory_to_json,
)
from ..query import DIFFICULTIES, QuerySpec
from ..reward import RewardScheme, reward
from ..sandbox.db import SandboxDb
from ..sandbox.tools import FailureConfig, call_tool
from ..synthesis.query_text import render_query
from .policy import Policy, PolicyTransportError
from .prompt import SYSTEM_PROMPT, initial_messages


class RolloutConfigError(ValueError):
    pass


@dataclass
class RolloutResult:
    trajectory: Trajectory
    scores: ScoreSet
    reward: float
    answer: AnswerScore | None = None
    entropies: tuple[float, ...] = ()

    @property
    def delivered(self) -> bool:
        return self.answer is not None and self.answer.delivered

    @property
    def overlength(self) -> bool:
        return self.trajectory.termination == "context_exceeded"


@dataclass
class RolloutGroup:
    spec: QuerySpec
    trajectories: list[Trajectory]
    rewards: list[float]
    scores: list[ScoreSet] = field(default_factory=list)
    results: list[RolloutResult] = field(default_factory=list, repr=False)
    branch_log: list[dict[str, Any]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.trajectories) != len(self.rewards):
            raise ValueError("trajectories and rewards must have equal length")

    @property
    def G(self) -> int:
        return len(self.trajectories)


def rollout(
    policy: Policy,
    spec: QuerySpec,
    db: SandboxDb,
    *,
    query: str | None = None,
    budget: Budget | None = None,
    failure: FailureConfig | None = None,
    scheme: RewardScheme | None = None,
    epoch: int = 0,
    rng: np.random.Generator | None = None,
    failure_rng: np.random.Generator | None = None,
    model: CostModel | None = None,
    system_prompt: str = SYSTEM_PROMPT,
) -> RolloutResult:
    """Run one ReAct episode and score it."""
    budget = budget or Budget()
    scheme = scheme or RewardScheme("Sum")
    rng = rng if rng is not None else np.random.default_rng(0)
    failure_rng = failure_rng if failure_rng is not None else np.random.default_rng(1)
    query = query if query is not None else render_query(spec)
    context = initial_messages(query, system_prompt)
    traj = new_trajectory(query, spec)
    traj.token_count += count_tokens(system_prompt)
    logps: list[float] = []
    decisions: list[tuple[Any, ...]] = []
    entropies: list[float] = []

    while True:
        try:
            em = policy.next_emission(context, rng)
        except PolicyTransportError as exc:
            terminate(traj, "infrastructure_error", str(exc))
            break
        for d in em.decisions:
            logps.append(d.logprob)
            decisions.append((d.key, d.n, d.choice))
            entropies.append(d.entropy)
        try:
            turn = parse_turn(em.text)
        except FormatError as exc:
            traj.per_step_logprobs, traj.decisions = tuple(logps), tuple(decisions)
            terminate(traj, "format_error", exc.reason)
            break
        if isinstance(turn.action, ToolCall):
            if traj.tool_call_count >= budget.max_tool_calls:
                obs = ""
            else:
                obs = call_tool(db, turn.action, failure, failure_rng)
            turn = Turn(turn.thought, turn.action, obs, raw=em.text)
        traj.per_step_logprobs, traj.decisions = tuple(logps), tuple(decisions)
        append_turn(traj, turn, budget)
        if traj.terminated:
            break
        context.append({"role": "assistant", "content": em.text})
        context.append({"role": "tool", "content": turn.observation or ""})

    if traj.termination == "answered":
        ans = score_answer(traj.final_answer, spec, db, model)
        scores = ans.scores
    else:
        ans, scores = None, score_failure()
    return RolloutResult(traj, scores, reward(scheme, scores, epoch), ans, tuple(entropies))


def member_streams(seed: int, sid: int, member: int) -> tuple[np.random.Generator, np.random.Generator]:
    return (
        seeding.stream(seed, sid, member, seeding.POLICY),
        seeding.stream(seed, sid, member, seeding.FAILURE),
    )


def rollout_group(
    policy: Policy,
    spec: QuerySpec,
    db: SandboxDb,
    G: int = 8,
    *,
    seed: int = 0,
    training: bool = True,
    query: str | None = None,
    spec_key: int | None = None,
    **kwargs: Any,
) -> RolloutGroup:
    """G independent rollouts; member i uses streams derived from (seed, spec id, i)."""
    if G < 1 or (training and G < 2):
        raise RolloutConfigError(f"group size {G} is too small{' for training' if training else ''}")
    sid = seeding.spec_id(spec) if spec_key is None else spec_key
    query = query if query is not None else render_query(spec)
    results = []
    for i in range(G):
        prng, frng = member_streams(seed, sid, i)
        results.append(rollout(policy, spec, db, query=query, rng=prng, failure_rng=frng, **kwargs))
    return RolloutGroup(
        spec,
        [r.trajectory for r in results],
        [r.reward for r in results],
        [r.scores for r in results],
        results,
    )


# -- benchmark --------------------------------------------------------------------------------


METRIC_KEYS = ("delivery", "cs_micro", "cs_macro", "hard_micro", "hard_macro", "success")


def _pct(xs: Sequence[float]) -> float:
    return round(100.0 * float(np.mean(xs)), 1) if len(xs) else 0.0


@dataclass
class MetricsReport:
    n: int
    overall: dict[str, float]
    by_difficulty: dict[str, dict[str, float]]
    counts: dict[str, int]
    terminations: dict[str, int]

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "overall": self.overall,
            "by_difficulty": self.by_difficulty,
            "counts": self.counts,
            "terminations": self.terminations,
        }

    def table(self) -> str:
        head = ["split", "n"] + list(METRIC_KEYS)
        rows = [["all", str(self.n)] + [f"{self.overall[k]:.1f}" for k in METRIC_KEYS]]
        for d, m in self.by_difficulty.items():
            rows.append([d, str(self.counts[d])] + [f"{m[k]:.1f}" for k in METRIC_KEYS])
        widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
        fmt = lambda r: "  ".join(c.rjust(w) for c, w in zip(r, widths))  # noqa: E731
        return "\n".join([fmt(head), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows])


def _metrics(rows: list[tuple[bool, ScoreSet]]) -> dict[str, float]:
    return {
        "delivery": _pct([float(d) for d, _ in rows]),
        "cs_micro": _pct([s.cs_micro for _, s in rows]),
        "cs_macro": _pct([s.cs_macro for _, s in rows]),
        "hard_micro": _pct([s.hard_micro for _, s in rows]),
        "hard_macro": _pct([s.hard_macro for _, s in rows]),
        "success": _pct([s.success for _, s in rows]),
    }


def metrics_report(results: Sequence[RolloutResult], specs: Sequence[QuerySpec]) -> MetricsReport:
    rows = [(r.delivered, r.scores) for r in results]
    by: dict[str, dict[str, float]] = {}
    counts: dict[str, int] = {}
    for d in DIFFICULTIES:
        sub = [row for row, s in zip(rows, specs) if s.difficulty == d]
        if sub:
            by[d] = _metrics(sub)
            counts[d] = len(sub)
    terms: dict[str, int] = {}
    for r in results:
        t = r.trajectory.termination or "none"
        terms[t] = terms.get(t, 0) + 1
    return MetricsReport(len(results), _metrics(rows), by, counts, dict(sorted(terms.items())))


@dataclass(frozen=True)
class _Job:
    index: int
    spec: QuerySpec
    query: str


_WORKER: dict[str, Any] = {}


def _init_worker(policy: Policy, db: SandboxDb, seed: int, kwargs: dict[str, Any]) -> None:
    _WORKER.update(policy=policy, db=db, seed=seed, kwargs=kwargs)


def _run_job(job: _Job) -> tuple[int, RolloutResult]:
    w = _WORKER
    prng, frng = member_streams(w["seed"], seeding.spec_id(job.spec), 0)
    res = rollout(w["policy"], job.spec, w["db"], query=job.query, rng=prng, failure_rng=frng, **w["kwargs"])
    return job.index, res


def run_rollouts(
    policy: Policy,
    items: Iterable[tuple[QuerySpec, str]],
    db: SandboxDb,
    *,
    seed: int = 0,
    workers: int | None = 1,
    **kwargs: Any,
) -> list[RolloutResult]:
    """One rollout per (spec, query), merged back in input order."""
    jobs = [_Job(i, s, q) for i, (s, q) in enumerate(items)]
    workers = workers or os.cpu_count() or 1
    if workers <= 1 or len(jobs) < 2:
        _init_worker(policy, db, seed, kwargs)
        out = [_run_job(j) for j in jobs]
    else:
        try:
            with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(policy, db, seed, kwargs)) as ex:
                out = list(ex.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
        except (OSError, PermissionError):
            _init_worker(policy, db, seed, kwargs)
            out = [_run_job(j) for j in jobs]
    out.sort(key=lambda x: x[0])
    return [r for _, r in out]


def run_benchmark(
    policy: Policy,
    items: Sequence[tuple[QuerySpec, str]],
    db: SandboxDb,
    *,
    seed: int = 0,
    workers: int | None = 1,
    **kwargs: Any,
) -> tuple[MetricsReport, list[RolloutResult]]:
    if not items:
        raise ValueError("benchmark dataset is empty")
    results = run_rollouts(policy, items, db, seed=seed, workers=workers, **kwargs)
    return metrics_report(results, [s for s, _ in items]), results


def result_record(res: RolloutResult, index: int, member: int = 0) -> dict[str, Any]:
    extra: dict[str, Any] = {
        "index": index,
        "member": member,
        "scores": res.scores.to_json(),
        "reward": res.reward,
        "delivered": res.delivered,
    }
    if res.answer is not None and res.answer.report is not None:
        extra["report"] = res.answer.report.to_json()
    if res.answer is not None and res.answer.error:
        extra["answer_error"] = res.answer.error
    return trajectory_to_json(res.trajectory, **extra)
