"""Rejection-sampling filter for supervised fine-tuning data."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from ..evaluation import CostModel, score_answer
from ..protocol import ToolCall, Trajectory, render_turn
from ..query import DIFFICULTIES, QuerySpec
from ..sandbox.db import SandboxDb
from .prompt import SYSTEM_PROMPT


@dataclass
class SftStats:
    count: int
    avg_tool_calls: float
    avg_tokens: float

    def to_json(self) -> dict[str, Any]:
        return {"count": self.count, "avg_tool_calls": self.avg_tool_calls, "avg_tokens": self.avg_tokens}


def _stats(trajs: Sequence[Trajectory]) -> SftStats:
    n = len(trajs)
    if not n:
        return SftStats(0, 0.0, 0.0)
    return SftStats(
        n,
        round(sum(t.tool_call_count for t in trajs) / n, 2),
        round(sum(t.token_count for t in trajs) / n, 2),
    )


def filter_sft(
    trajectories: Iterable[Trajectory],
    spec_index: Mapping[str, QuerySpec] | None,
    db: SandboxDb,
    model: CostModel | None = None,
) -> tuple[list[Trajectory], dict[str, SftStats]]:
    """Keep answered trajectories whose plan parses and succeeds; stats per difficulty and overall.

    The query spec comes from ``spec_index[traj.query]`` when given, else from ``traj.spec``.
    """
    kept: list[Trajectory] = []
    for t in trajectories:
        spec = spec_index.get(t.query) if spec_index is not None else None
        spec = spec if spec is not None else t.spec
        if spec is None:
            raise ValueError("trajectory has no associated spec")
        if t.termination != "answered" or t.final_answer is None:
            continue
        ans = score_answer(t.final_answer, spec, db, model)
        if ans.delivered and ans.scores.success == 1:
            kept.append(t)
    stats = {d: _stats([t for t in kept if _difficulty(t, spec_index) == d]) for d in DIFFICULTIES}
    stats["all"] = _stats(kept)
    return kept, stats


def _difficulty(t: Trajectory, spec_index: Mapping[str, QuerySpec] | None) -> str:
    spec = spec_index.get(t.query) if spec_index is not None else None
    return (spec if spec is not None else t.spec).difficulty


def sft_conversation(traj: Trajectory, system_prompt: str = SYSTEM_PROMPT) -> dict[str, Any]:
    """Chat-format record: system, user, then alternating assistant and tool messages."""
    msgs = [{"role": "system", "content": system_prompt}, {"role": "user", "content": traj.query}]
    for turn in traj.turns:
        msgs.append({"role": "assistant", "content": turn.raw if turn.raw is not None else render_turn(turn)})
        if isinstance(turn.action, ToolCall):
            msgs.append({"role": "tool", "content": turn.observation or ""})
    return {"messages": msgs}


def export_sft(trajs: Iterable[Trajectory], path: str | Path, system_prompt: str = SYSTEM_PROMPT) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        for t in trajs:
            fh.write(json.dumps(sft_conversation(t, system_prompt), ensure_ascii=False) + "\n")
    return p
