"""ReAct turn grammar, trajectories and budgets.

A policy emission is exactly one of::

    <think>...</think><tool_call>{"name": ..., "arguments": {...}}</tool_call>
    <think>...</think><answer>...</answer>

with optional whitespace between and around the blocks.

Token counts are a model-agnostic proxy: whitespace-delimited pieces plus one
extra token per protocol tag. ``count_tokens(a + " " + b) == count_tokens(a) +
count_tokens(b)`` for any ``a`` and ``b``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator, Union

SCHEMA_VERSION = 1

TERMINATIONS = (
    "answered",
    "format_error",
    "tool_budget_exceeded",
    "context_exceeded",
    "infrastructure_error",
)

_TAG = re.compile(r"</?(?:think|tool_call|answer)>")


class FormatError(ValueError):
    """An emission that breaks the turn grammar. ``reason`` is a stable code."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


class TrajectoryStateError(RuntimeError):
    pass


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("tool name must be nonempty")

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "arguments": dict(self.arguments)}


@dataclass(frozen=True)
class FinalAnswer:
    text: str


Action = Union[ToolCall, FinalAnswer]


@dataclass(frozen=True)
class Turn:
    thought: str
    action: Action
    observation: str | None = None
    raw: str | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if isinstance(self.action, FinalAnswer) and self.observation is not None:
            raise ValueError("final-answer turns carry no observation")


@dataclass(frozen=True)
class Budget:
    max_tool_calls: int = 60
    max_context_tokens: int = 30_000

    def __post_init__(self) -> None:
        if self.max_tool_calls < 1 or self.max_context_tokens < 1:
            raise ValueError("budgets must be positive")

    @classmethod
    def inference(cls) -> "Budget":
        return cls(max_tool_calls=60, max_context_tokens=32_000)


def count_tokens(text: str) -> int:
    return len(text.split()) + len(_TAG.findall(text))


def _block(text: str, tag: str) -> tuple[str, str]:
    """Split ``<tag>body</tag>rest`` off the front of ``text``."""
    open_, close = f"<{tag}>", f"</{tag}>"
    if not text.startswith(open_):
        raise FormatError(f"missing_{tag}", f"expected {open_}")
    end = text.find(close, len(open_))
    if end < 0:
        raise FormatError(f"unclosed_{tag}", f"no {close}")
    return text[len(open_):end], text[end + len(close):]


def _payload(body: str) -> ToolCall:
    try:
        obj = json.loads(body)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise FormatError("bad_payload", f"tool call is not valid JSON ({exc})") from None
    if not isinstance(obj, dict) or set(obj) != {"name", "arguments"}:
        raise FormatError("bad_payload", 'tool call must be an object with exactly "name" and "arguments"')
    name, args = obj["name"], obj["arguments"]
    if not isinstance(name, str) or not name.strip():
        raise FormatError("bad_payload", "tool name must be a nonempty string")
    if not isinstance(args, dict):
        raise FormatError("bad_payload", "arguments must be an object")
    clean: dict[str, str] = {}
    for k, v in args.items():
        if isinstance(v, str):
            clean[k] = v
        elif isinstance(v, (int, float)) and not isinstance(v, bool):
            clean[k] = str(v)
        else:
            raise FormatError("bad_payload", f"argument {k!r} must be a string")
    return ToolCall(name.strip(), clean)


def parse_turn(text: str) -> Turn:
    """Parse one policy emission, raising FormatError on any deviation."""
    if not isinstance(text, str):
        raise FormatError("not_text", type(text).__name__)
    for tag, code in (("think", "multiple_think"), ("tool_call", "multiple_tool_calls"), ("answer", "multiple_answers")):
        if text.count(f"<{tag}>") > 1 or text.count(f"</{tag}>") > 1:
            raise FormatError(code)
    if "<tool_call>" in text and "<answer>" in text:
        raise FormatError("tool_call_and_answer")

    thought, rest = _block(text.strip(), "think")
    rest = rest.strip()
    if rest.startswith("<tool_call>"):
        body, tail = _block(rest, "tool_call")
        if tail.strip():
            raise FormatError("trailing_text", tail.strip()[:40])
        return Turn(thought.strip(), _payload(body), raw=text)
    if rest.startswith("<answer>"):
        body, tail = _block(rest, "answer")
        if tail.strip():
            raise FormatError("trailing_text", tail.strip()[:40])
        return Turn(thought.strip(), FinalAnswer(body.strip()), raw=text)
    if "<tool_call>" in rest or "<answer>" in rest:
        raise FormatError("stray_text", rest[:40])
    raise FormatError("missing_action")


def render_turn(turn: Turn) -> str:
    if isinstance(turn.action, ToolCall):
        body = json.dumps(turn.action.to_json(), ensure_ascii=False)
        return f"<think>{turn.thought}</think>\n<tool_call>{body}</tool_call>"
    return f"<think>{turn.thought}</think>\n<answer>{turn.action.text}</answer>"


@dataclass
class Trajectory:
    """One ReAct episode. Becomes read-only once ``termination`` is set."""

    query: str
    spec: Any = None
    turns: tuple[Turn, ...] = ()
    final_answer: str | None = None
    token_count: int = 0
    tool_call_count: int = 0
    per_step_logprobs: tuple[float, ...] | None = None
    decisions: tuple[Any, ...] | None = None
    error: str | None = None
    termination: str | None = None

    def __setattr__(self, name: str, value: Any) -> None:
        if self.__dict__.get("termination") is not None:
            raise TrajectoryStateError(f"trajectory already terminated ({self.termination}); cannot set {name}")
        super().__setattr__(name, value)

    @property
    def terminated(self) -> bool:
        return self.termination is not None

    @property
    def decision_count(self) -> int:
        return len(self.per_step_logprobs or ())


def new_trajectory(query: str, spec: Any = None) -> Trajectory:
    return Trajectory(query=query, spec=spec, token_count=count_tokens(query))


def turn_tokens(turn: Turn) -> int:
    emitted = turn.raw if turn.raw is not None else render_turn(turn)
    return count_tokens(emitted) + (count_tokens(turn.observation) if turn.observation else 0)


def append_turn(traj: Trajectory, turn: Turn, budget: Budget) -> Trajectory:
    """Append ``turn`` or terminate ``traj`` if it would break a budget."""
    if traj.terminated:
        raise TrajectoryStateError(f"cannot append to a terminated trajectory ({traj.termination})")
    is_call = isinstance(turn.action, ToolCall)
    if is_call and traj.tool_call_count + 1 > budget.max_tool_calls:
        traj.termination = "tool_budget_exceeded"
        return traj
    tokens = traj.token_count + turn_tokens(turn)
    if tokens > budget.max_context_tokens:
        traj.termination = "context_exceeded"
        return traj
    traj.turns = traj.turns + (turn,)
    traj.token_count = tokens
    if is_call:
        traj.tool_call_count += 1
        return traj
    traj.final_answer = turn.action.text
    traj.termination = "answered"
    return traj


def terminate(traj: Trajectory, status: str, error: str | None = None) -> Trajectory:
    if status not in TERMINATIONS:
        raise ValueError(f"unknown termination {status!r}")
    if traj.terminated:
        raise TrajectoryStateError(f"trajectory already terminated ({traj.termination})")
    if error is not None:
        traj.error = error
    traj.termination = status
    return traj


# -- trajectory log ---------------------------------------------------------------------------


def _turn_to_json(t: Turn) -> dict[str, Any]:
    if isinstance(t.action, ToolCall):
        action = {"tool_call": t.action.to_json()}
    else:
        action = {"answer": t.action.text}
    return {"thought": t.thought, **action, "observation": t.observation}


def _turn_from_json(d: dict[str, Any]) -> Turn:
    if "tool_call" in d:
        tc = d["tool_call"]
        action: Action = ToolCall(tc["name"], dict(tc["arguments"]))
    else:
        action = FinalAnswer(d["answer"])
    return Turn(d["thought"], action, d.get("observation"))


def trajectory_to_json(traj: Trajectory, **extra: Any) -> dict[str, Any]:
    spec = traj.spec
    if spec is not None and hasattr(spec, "to_json"):
        spec = spec.to_json()
    rec = {
        "schema_version": SCHEMA_VERSION,
        "query": traj.query,
        "spec": spec,
        "turns": [_turn_to_json(t) for t in traj.turns],
        "final_answer": traj.final_answer,
        "termination": traj.termination,
        "error": traj.error,
        "token_count": traj.token_count,
        "tool_call_count": traj.tool_call_count,
        "per_step_logprobs": list(traj.per_step_logprobs) if traj.per_step_logprobs is not None else None,
        "decisions": [list(d) for d in traj.decisions] if traj.decisions is not None else None,
    }
    rec.update(extra)
    return rec


def trajectory_from_json(rec: dict[str, Any], spec_loader: Any = None) -> Trajectory:
    version = rec.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported trajectory schema version {version!r}")
    spec = rec.get("spec")
    if spec is not None and spec_loader is not None:
        spec = spec_loader(spec)
    logps = rec.get("per_step_logprobs")
    decisions = rec.get("decisions")
    return Trajectory(
        query=rec["query"],
        spec=spec,
        turns=tuple(_turn_from_json(t) for t in rec["turns"]),
        final_answer=rec.get("final_answer"),
        token_count=rec["token_count"],
        tool_call_count=rec["tool_call_count"],
        per_step_logprobs=tuple(logps) if logps is not None else None,
        decisions=tuple(tuple(_tuplify(x) for x in d) for d in decisions) if decisions is not None else None,
        error=rec.get("error"),
        termination=rec.get("termination"),
    )


def _tuplify(x: Any) -> Any:
    return tuple(_tuplify(v) for v in x) if isinstance(x, list) else x


def write_trajectories(path: str | Path, records: Iterable[dict[str, Any]]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with p.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
    return p


def read_trajectories(path: str | Path) -> Iterator[dict[str, Any]]:
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
