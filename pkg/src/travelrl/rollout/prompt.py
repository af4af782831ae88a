"""System prompt and chat-message helpers for policies."""

from __future__ import annotations

from ..sandbox.tools import TOOL_ARGS, TOOL_DESCRIPTIONS

Message = dict[str, str]


def _tool_lines() -> str:
    return "\n".join(
        f"- {name}({', '.join(args)}): {TOOL_DESCRIPTIONS[name]}" for name, args in TOOL_ARGS.items()
    )


SYSTEM_PROMPT = f"""You plan trips using a set of travel lookup tools.

Tools:
{_tool_lines()}

Every reply has exactly two parts. First a <think>...</think> block with your reasoning. Then either one
<tool_call>{{"name": "<tool>", "arguments": {{...}}}}</tool_call> or one <answer>...</answer> with the final plan.
Never put two tool calls in one reply. Tool results come back in the next message.

Only use flights, routes, restaurants, attractions and accommodations that a tool returned.
If a tool reports an error, you may call it again.

Write the final plan day by day:

Day 1:
Current City: from <origin> to <city>
Transportation: Flight Number: <number>, from <origin> to <city>, Cost: <price>
Breakfast: -
Attraction: -
Lunch: -
Dinner: <restaurant>, <city>
Accommodation: <accommodation>, <city>

Use "-" for an empty slot, "Name, City" for every place, and ";" between attractions.
Ground legs are written as "Self-driving, from A to B, Cost: N" or "Taxi, from A to B, Cost: N".
"""


def initial_messages(query: str, system_prompt: str = SYSTEM_PROMPT) -> list[Message]:
    return [{"role": "system", "content": system_prompt}, {"role": "user", "content": query}]


def user_query(context: list[Message]) -> str:
    for m in context:
        if m["role"] == "user":
            return m["content"]
    raise ValueError("conversation has no user message")


def exchanges(context: list[Message]) -> list[tuple[str, str | None]]:
    """Pair each assistant message with the tool message that follows it."""
    out: list[tuple[str, str | None]] = []
    for i, m in enumerate(context):
        if m["role"] != "assistant":
            continue
        nxt = context[i + 1] if i + 1 < len(context) else None
        out.append((m["content"], nxt["content"] if nxt is not None and nxt["role"] == "tool" else None))
    return out
