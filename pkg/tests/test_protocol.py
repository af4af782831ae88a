from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from travelrl.plans import (
    Place,
    Plan,
    PlanParseError,
    TransportLeg,
    parse_plan_text,
    plan_from_json,
    plan_to_json,
    render_plan_text,
)
from travelrl.protocol import (
    Budget,
    FinalAnswer,
    FormatError,
    ToolCall,
    Trajectory,
    TrajectoryStateError,
    Turn,
    append_turn,
    new_trajectory,
    parse_turn,
    read_trajectories,
    render_turn,
    terminate,
    trajectory_from_json,
    trajectory_to_json,
    write_trajectories,
)

from helpers import random_plan, rng_for

# -- turn grammar ---------------------------------------------------------------------------


def test_tool_call_turn_roundtrip():
    t = Turn("look up flights", ToolCall("SearchFlight", {"departure": "A", "destination": "B", "date": "2022-03-01"}))
    assert parse_turn(render_turn(t)) == t


def test_answer_turn_roundtrip_and_whitespace():
    t = Turn("done", FinalAnswer("Day 1:\nCurrent City: A"))
    assert parse_turn(render_turn(t)) == t
    assert parse_turn("  <think> done </think>\n\n  <answer>\nDay 1:\nCurrent City: A\n</answer>  \n") == t


def test_numeric_arguments_are_stringified():
    t = parse_turn('<think>x</think><tool_call>{"name": "SearchCity", "arguments": {"state": 5}}</tool_call>')
    assert t.action == ToolCall("SearchCity", {"state": "5"})


@pytest.mark.parametrize(
    "text,reason",
    [
        ("<tool_call>{}</tool_call>", "missing_think"),
        ("<think>a", "unclosed_think"),
        ("<think>a</think>", "missing_action"),
        ("<think>a</think><think>b</think><answer>x</answer>", "multiple_think"),
        ('<think>a</think><tool_call>{"name":"X","arguments":{}}</tool_call><tool_call>{}</tool_call>', "multiple_tool_calls"),
        ("<think>a</think><tool_call>{}</tool_call><answer>x</answer>", "tool_call_and_answer"),
        ("<think>a</think><tool_call>not json</tool_call>", "bad_payload"),
        ('<think>a</think><tool_call>{"name": "X"}</tool_call>', "bad_payload"),
        ('<think>a</think><tool_call>{"name": "X", "arguments": {"a": [1]}}</tool_call>', "bad_payload"),
        ("<think>a</think><answer>x</answer> trailing", "trailing_text"),
        ("<think>a</think>hello <answer>x</answer>", "stray_text"),
    ],
)
def test_format_errors(text, reason):
    with pytest.raises(FormatError) as ei:
        parse_turn(text)
    assert ei.value.reason == reason


_names = st.sampled_from(["SearchCity", "SearchFlight", "SearchRestaurant", "X"])
_text = st.text(st.characters(blacklist_characters="<>", blacklist_categories=("Cs",)), max_size=30)


@given(_text, _names, st.dictionaries(st.text(min_size=1, max_size=8), _text, max_size=3))
def test_turn_grammar_property(thought, name, args):
    t = Turn(thought.strip(), ToolCall(name, args))
    assert parse_turn(render_turn(t)) == t


@settings(max_examples=300)
@given(st.text(max_size=200))
def test_parse_turn_never_crashes(text):
    try:
        parse_turn(text)
    except FormatError as exc:
        assert exc.reason


# -- trajectory -----------------------------------------------------------------------------


def _call_turn():
    return Turn("t", ToolCall("SearchCity", {"state": "Texas"}), "obs words here")


def test_budget_tool_calls():
    traj = new_trajectory("q")
    b = Budget(max_tool_calls=2)
    append_turn(traj, _call_turn(), b)
    append_turn(traj, _call_turn(), b)
    append_turn(traj, _call_turn(), b)
    assert traj.termination == "tool_budget_exceeded"
    assert traj.tool_call_count == 2


def test_budget_context():
    traj = new_trajectory("q")
    append_turn(traj, _call_turn(), Budget(max_context_tokens=5))
    assert traj.termination == "context_exceeded"
    assert traj.turns == ()


def test_terminated_is_read_only():
    traj = new_trajectory("q")
    append_turn(traj, Turn("t", FinalAnswer("x")), Budget())
    assert traj.termination == "answered" and traj.final_answer == "x"
    with pytest.raises(TrajectoryStateError):
        append_turn(traj, _call_turn(), Budget())
    with pytest.raises(TrajectoryStateError):
        traj.final_answer = "y"
    with pytest.raises(TrajectoryStateError):
        terminate(traj, "format_error")
    with pytest.raises(ValueError):
        terminate(new_trajectory("q"), "bored")


def test_trajectory_log_roundtrip(tmp_path):
    traj = new_trajectory("plan a trip")
    append_turn(traj, _call_turn(), Budget())
    traj.per_step_logprobs = (-0.5, -1.0)
    traj.decisions = (("k", 2, 0), ("j", 3, 2))
    append_turn(traj, Turn("t", FinalAnswer("Day 1:")), Budget())
    p = write_trajectories(tmp_path / "t.jsonl", [trajectory_to_json(traj, index=0)])
    (rec,) = list(read_trajectories(p))
    assert rec["index"] == 0
    back = trajectory_from_json(rec)
    assert isinstance(back, Trajectory)
    assert (back.turns, back.final_answer, back.decisions, back.per_step_logprobs) == (
        traj.turns, traj.final_answer, traj.decisions, traj.per_step_logprobs)
    bad = dict(rec, schema_version=99)
    with pytest.raises(ValueError, match="schema version"):
        trajectory_from_json(bad)


# -- plan grammar ---------------------------------------------------------------------------


def test_render_parse_fixed_point(dataset, desk_db):
    for i in range(200):
        it = dataset[i % len(dataset)]
        plan = random_plan(it.spec, desk_db, rng_for(i), it.certificate.witness)
        text = render_plan_text(plan)
        assert parse_plan_text(text) == plan
        assert render_plan_text(parse_plan_text(text)) == text
        assert plan_from_json(json.loads(json.dumps(plan_to_json(plan)))) == plan


def test_leg_variants():
    assert render_plan_text(parse_plan_text(
        "Day 1:\nCurrent City: from A to B\nTransportation: Flight Number: F1, from A to B, Cost: 12.5\n"
        "Breakfast: -\nAttraction: -\nLunch: -\nDinner: -\nAccommodation: Inn, B"
    )).splitlines()[2] == "Transportation: Flight Number: F1, from A to B, Cost: 12.5"
    leg = parse_plan_text(
        "Day 1:\nCurrent City: from A to B\nTransportation: self-driving, from A to B, Cost: $40\n"
        "Breakfast: -\nAttraction: X, B;Y, B\nLunch: -\nDinner: -\nAccommodation: -"
    ).days[0]
    assert leg.transportation == TransportLeg("Self-driving", "A", "B", 40.0)
    assert leg.attraction == (Place("X", "B"), Place("Y", "B"))


@pytest.mark.parametrize(
    "text,day,field",
    [
        ("Day 2:\nCurrent City: A", 2, "day"),
        ("Day 1:\nCurrent City: A\nTransportation: -", 1, "breakfast"),
        ("Day 1:\nCurrent City: -\nTransportation: -\nBreakfast: -\nAttraction: -\nLunch: -\nDinner: -\n"
         "Accommodation: -", 1, "current_city"),
        ("Day 1:\nCurrent City: A\nTransportation: Bus, from A to B, Cost: 1\nBreakfast: -\nAttraction: -\n"
         "Lunch: -\nDinner: -\nAccommodation: -", 1, "transportation"),
        ("Day 1:\nCurrent City: A\nTransportation: -\nBreakfast: Nowhere\nAttraction: -\nLunch: -\n"
         "Dinner: -\nAccommodation: -", 1, "breakfast"),
        ("Day 1:\nCurrent City: A\nCurrent City: B", 1, "current_city"),
    ],
)
def test_plan_parse_errors_name_day_and_field(text, day, field):
    with pytest.raises(PlanParseError) as ei:
        parse_plan_text(text)
    assert (ei.value.day, ei.value.field) == (day, field)


def test_plan_days_numbered():
    with pytest.raises(PlanParseError):
        Plan((parse_plan_text("Day 1:\nCurrent City: A\nTransportation: -\nBreakfast: -\nAttraction: -\n"
                              "Lunch: -\nDinner: -\nAccommodation: -").days[0],) * 2)
    with pytest.raises(PlanParseError):
        plan_from_json({"day": 1})
    with pytest.raises(PlanParseError):
        parse_plan_text("   \n")


@settings(max_examples=300)
@given(st.text(alphabet=st.sampled_from(list("Day 1:\nCurrent City from to,;-$FlightNumber0123Cost")), max_size=300))
def test_plan_parser_never_crashes(text):
    try:
        parse_plan_text(text)
    except PlanParseError:
        pass
