"""Acceptance criteria, one test each; verdict lines appear in the terminal summary."""

from __future__ import annotations

import json
import math
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest

from travelrl.evaluation import ScoreSet, evaluate
from travelrl.optim import (
    ArpoConfig,
    ClipConfig,
    GroupBatch,
    MemberRecord,
    ToyPolicy,
    TrainConfig,
    arpo_rollout_group,
    dapo_filter,
    group_advantages,
    surrogate_objective,
    train_toy,
)
from travelrl.optim.toy import MiniTask
from travelrl.plans import PlanParseError, parse_plan_text, render_plan_text
from travelrl.protocol import FinalAnswer, FormatError, ToolCall, Turn, parse_turn, render_turn
from travelrl.reward import RewardScheme, base_reward, reward
from travelrl.rollout import OraclePolicy, result_record, rollout_group, run_benchmark
from travelrl.sandbox import FailureConfig, call_tool, failure_message, generate_db
from travelrl.synthesis import split_counts, synthesize_dataset

from helpers import ACCEPTANCE, brute_check, fd_point, random_plan, rng_for


@contextmanager
def criterion(n: int, title: str):
    info: dict[str, str] = {"detail": ""}
    try:
        yield info
    except BaseException:
        ACCEPTANCE[n] = f"FAIL {n:>2} {title} {info['detail']}".rstrip()
        print(ACCEPTANCE[n], flush=True)
        raise
    ACCEPTANCE[n] = f"PASS {n:>2} {title} {info['detail']}".rstrip()
    print(ACCEPTANCE[n], flush=True)


def test_01_oracle_closure():
    with criterion(1, "oracle closure") as c:
        t0 = time.perf_counter()
        db = generate_db(0, "desk")
        assert len(db.cities) == 4 and all(len(v) == 5 for v in db.cities.values()) and len(db.dates) == 14
        items = synthesize_dataset(db, split_counts(200, (4, 3, 3)), seed=0)
        assert len(items) == 200
        assert [sum(it.difficulty == d for it in items) for d in ("easy", "medium", "hard")] == [80, 60, 60]
        report, _ = run_benchmark(OraclePolicy(db), [(it.spec, it.text) for it in items], db, seed=0, workers=None)
        secs = time.perf_counter() - t0
        c["detail"] = (f"(success {report.overall['success']:.1f}%, delivery {report.overall['delivery']:.1f}%, "
                       f"{secs:.1f} s)")
        assert report.overall["success"] == 100.0
        assert report.overall["delivery"] == 100.0
        assert secs < 60.0


def test_02_evaluator_matches_brute_force(dataset, desk_db):
    with criterion(2, "evaluator vs brute force") as c:
        disagreements, rules = 0, 0
        for i in range(1000):
            it = dataset[i % len(dataset)]
            plan = random_plan(it.spec, desk_db, rng_for(i), it.certificate.witness)
            report, _ = evaluate(plan, it.spec, desk_db)
            mine = report.outcomes()
            theirs = brute_check(render_plan_text(plan), it.spec, desk_db)
            assert set(mine) == set(theirs)
            rules += len(mine)
            disagreements += sum(mine[k] != theirs[k] for k in mine)
        c["detail"] = f"(1000 plans, {rules} rule outcomes, {disagreements} disagreements)"
        assert disagreements == 0


def test_03_score_algebra():
    with criterion(3, "score algebra") as c:
        rng = random.Random(3)
        cur = RewardScheme.curriculum(5)
        worst = 0.0
        for _ in range(10_000):
            cs = 1.0 if rng.random() < 0.3 else rng.randint(0, 7) / 8
            den = rng.randint(1, 5)
            hard = 1.0 if rng.random() < 0.3 else rng.randint(0, den) / den
            s = ScoreSet.from_micros(cs, hard)
            want_sum = s.cs_micro + s.cs_macro + s.hard_micro + s.hard_macro + s.success
            worst = max(worst, abs(base_reward("Sum", s) - want_sum))
            worst = max(worst, abs(base_reward("Macro", s) - (s.cs_macro + s.hard_macro + s.success)))
            worst = max(worst, abs(base_reward("Success", s) - s.success))
            for e in range(5):
                assert reward(cur, s, e) == base_reward(cur.active(e), s)
        assert [cur.active(e) for e in range(5)] == ["Sum", "Sum", "Macro", "Macro", "Success"]
        c["detail"] = f"(10000 score sets, max error {worst:.1e})"
        assert worst <= 1e-12


def test_04_advantage_statistics():
    with criterion(4, "advantage statistics") as c:
        rng = np.random.default_rng(4)
        worst_mean, worst_std, n = 0.0, 0.0, 0
        while n < 10_000:
            if n % 2:
                r = rng.choice([0.0, 1.0, 2.0, 3.0, 5.0], size=8)
            else:
                r = rng.random(8) * 5
            if np.ptp(r) == 0:
                continue
            a = group_advantages(r)
            worst_mean = max(worst_mean, abs(float(a.mean())))
            worst_std = max(worst_std, abs(float(a.std()) - 1.0))
            n += 1
        for v in (0.0, 1.0, 2.5, 5.0):
            assert np.all(group_advantages([v] * 8) == 0.0)
        c["detail"] = f"(max |mean| {worst_mean:.1e}, max |std-1| {worst_std:.1e})"
        assert worst_mean <= 1e-12 and worst_std <= 1e-12


def test_05_gradient_fidelity(minitask):
    with criterion(5, "gradient fidelity") as c:
        task = MiniTask(minitask.db, minitask.train[:40], minitask.val[:20])
        worst, checked, skipped = 0.0, 0, 0
        for k in range(100):
            rep = fd_point(task, k)
            worst = max(worst, rep.max_rel_error)
            checked += rep.checked
            skipped += rep.skipped
        c["detail"] = f"(100 points, {checked} coordinates, {skipped} skipped at kinks, max rel error {worst:.1e})"
        assert checked > 0
        assert worst < 1e-4


@pytest.mark.slow
def test_06_toy_learning(minitask):
    with criterion(6, "toy learning") as c:
        parts = []
        for kind in ("Sum", "Macro", "Success", "Curriculum"):
            cfg = TrainConfig(seed=0, scheme=kind, G=8, batch_size=32)
            assert cfg.total_updates == 300
            res = train_toy(cfg, minitask)
            final = res.evals[-1]["val_success"]
            parts.append(f"{kind} {res.baseline_success:.2f}->{res.best_success:.2f} "
                         f"(final {final:.2f}, {res.seconds:.0f} s)")
            c["detail"] = "(" + "; ".join(parts) + ")"
            assert res.baseline_success < 0.10
            assert res.best_success > 0.80
            assert res.seconds < 300
            if kind == "Curriculum":
                assert [(s["epoch"], s["kind"]) for s in res.switches] == [(0, "Sum"), (2, "Macro"), (4, "Success")]
                # updates are numbered from 1
                for r in res.curve:
                    epoch = (r["update"] - 1) // cfg.updates_per_epoch
                    assert r["epoch"] == epoch
                    assert r["kind"] == RewardScheme.curriculum(5).active(epoch)


def test_07_overlength_semantics():
    with criterion(7, "overlength semantics") as c:
        # one shared two-way softmax, old policy uniform
        class Model:
            theta = np.array([0.3, -0.1])

            def decision_logprob(self, key, n, choice, th):
                lse = math.log(math.exp(th[0]) + math.exp(th[1]))
                g = -np.exp(th[:n] - lse)
                g[choice] += 1.0
                return float(th[choice] - lse), 0, g

        half = math.log(0.5)
        members = [
            MemberRecord((("s", 2, 0), ("s", 2, 1)), [half, half]),
            MemberRecord((("s", 2, 1),) * 5, [half] * 5, overlength=True),
            MemberRecord((("s", 2, 1),), [half]),
            MemberRecord((("s", 2, 0),), [half]),
        ]
        rewards = [3.0, 0.0, 1.0, 0.0]
        batch = GroupBatch([members], [rewards])
        res = surrogate_objective(batch, batch.advantages(), ClipConfig(), Model())

        # by hand: mean 1, population std sqrt(3), all four rewards normalized
        sd = math.sqrt(((3 - 1) ** 2 + (0 - 1) ** 2 + (1 - 1) ** 2 + (0 - 1) ** 2) / 4)
        a = [(3 - 1) / sd, (0 - 1) / sd, (1 - 1) / sd, (0 - 1) / sd]
        lse = math.log(math.exp(0.3) + math.exp(-0.1))
        rho0 = math.exp((0.3 - lse) - half)   # ~1.198 stays inside [0.8, 1.28]
        rho1 = math.exp((-0.1 - lse) - half)  # ~0.802 stays inside [0.8, 1.28]
        terms = [rho0 * a[0], rho1 * a[0], rho1 * a[2], rho0 * a[3]]
        expected = sum(terms) / 4

        assert np.allclose(batch.advantages()[0], a, rtol=0, atol=0)
        c["detail"] = f"(objective {res.objective!r}, hand {expected!r}, terms {res.n_terms})"
        assert res.n_terms == 4
        assert res.objective == expected


def test_08_failure_injection(tiny_db):
    with criterion(8, "failure injection") as c:
        n, p = 10_000, 0.1
        state = sorted(tiny_db.cities)[0]
        calls = [ToolCall("SearchCity", {"state": state}),
                 ToolCall("SearchFlight", {"departure": "A", "destination": "B", "date": tiny_db.dates[0]})]
        rng = random.Random(8)
        hits = 0
        for i in range(n):
            call = calls[i % 2]
            obs = call_tool(tiny_db, call, FailureConfig(p), rng)
            if obs.startswith("Error: Current tool "):
                assert obs.encode() == f"Error: Current tool {call.name} is not available.".encode()
                assert obs == failure_message(call.name)
                hits += 1
        sigma = math.sqrt(p * (1 - p) / n)
        rng = random.Random(8)
        zero = sum(call_tool(tiny_db, calls[i % 2], FailureConfig(0.0), rng) == failure_message(calls[i % 2].name)
                   for i in range(n))
        c["detail"] = f"(rate {hits / n:.4f}, 3 sigma band {p - 3 * sigma:.4f}..{p + 3 * sigma:.4f}, p=0 hits {zero})"
        assert abs(hits / n - p) <= 3 * sigma
        assert zero == 0


def test_09_arpo_dapo_reductions(minitask):
    with criterion(9, "ARPO and DAPO reductions") as c:
        pol = ToyPolicy(minitask.db)
        for it in minitask.train[:10]:
            rollout_group(pol, it.spec, minitask.db, 8, seed=0, query=it.text)
        pol.theta = np.random.default_rng(9).normal(scale=0.5, size=pol.theta.size)
        groups = 0
        for i, it in enumerate(minitask.train[:10]):
            g = rollout_group(pol, it.spec, minitask.db, 8, seed=100 + i, query=it.text, failure=FailureConfig(0.1))
            a = arpo_rollout_group(pol, it.spec, minitask.db, 8, ArpoConfig(math.inf), seed=100 + i, query=it.text,
                                   failure=FailureConfig(0.1))
            ga = "\n".join(json.dumps(result_record(r, 0), sort_keys=True) for r in g.results).encode()
            aa = "\n".join(json.dumps(result_record(r, 0), sort_keys=True) for r in a.results).encode()
            assert ga == aa
            groups += 1

        mk = lambda: MemberRecord((), [])  # noqa: E731
        rewards = [[1, 1, 1, 1], [0, 1, 0, 0], [2.5] * 4, [0, 0, 0, 3], [0] * 4, [5, 5, 5, 4.999]]
        batch = GroupBatch([[mk() for _ in r] for r in rewards], rewards)
        kept = dapo_filter(batch)
        assert [list(r) for r in kept.rewards] == [[0, 1, 0, 0], [0, 0, 0, 3], [5, 5, 5, 4.999]]
        assert [m for m in kept.members] == [batch.members[1], batch.members[3], batch.members[5]]
        c["detail"] = f"({groups} groups byte-identical; DAPO kept groups 1, 3, 5 of 6)"


def _random_turn(rng: random.Random, plan_texts: list[str]) -> Turn:
    words = ["look", "up", "flights", "then", "hotels", "Day", "cheap", "é", "ü", "{", "}", "\"q\"", "'s", "a\\b"]
    thought = " ".join(rng.choice(words) for _ in range(rng.randint(0, 8)))
    if rng.random() < 0.3:
        return Turn(thought, FinalAnswer(rng.choice(plan_texts)))
    name = rng.choice(["SearchCity", "SearchFlight", "SearchRestaurant", "SearchAttraction", "SearchAccommodation",
                       "GoogleDistanceMatrix"])
    args = {rng.choice(["state", "city", "date", "departure", "destination", "mode"]) + str(k):
            " ".join(rng.choice(words) for _ in range(rng.randint(1, 3))) for k in range(rng.randint(0, 3))}
    return Turn(thought, ToolCall(name, args))


def _respace(text: str, rng: random.Random) -> str:
    """Pad every tag with random insignificant whitespace."""
    for tag in ("<think>", "</think>", "<tool_call>", "</tool_call>", "<answer>", "</answer>"):
        pad = lambda: rng.choice(["", " ", "\n", "  \n\t", "\n\n"])  # noqa: E731
        text = text.replace(tag, pad() + tag + pad(), 1)
    return text


def _fuzz_inputs(rng: random.Random, seeds: list[str]) -> list[str]:
    alphabet = list("<>/{}[]\":,;-$\n .0123456789abcdefxyz") + ["<think>", "</think>", "<tool_call>", "</tool_call>",
                                                               "<answer>", "</answer>", "Day 1:", "Day 2:",
                                                               "Current City: ", "Transportation: ", "Cost: ",
                                                               "Flight Number: ", "from ", " to ", "\u0000", "퟿"]
    out = []
    for i in range(10_000):
        mode = i % 4
        if mode == 0:
            out.append("".join(rng.choice(alphabet) for _ in range(rng.randint(0, 120))))
        else:
            s = list(rng.choice(seeds))
            for _ in range(rng.randint(1, 6)):
                op = rng.randrange(3)
                j = rng.randrange(len(s) + 1)
                if op == 0 and s:
                    del s[min(j, len(s) - 1)]
                elif op == 1:
                    s.insert(j, rng.choice(alphabet))
                else:
                    s = s[:j]
            out.append("".join(s))
    return out


def test_10_parser_round_trips(dataset, desk_db):
    with criterion(10, "parser round trips") as c:
        plan_texts = []
        for i in range(1000):
            it = dataset[i % len(dataset)]
            plan = random_plan(it.spec, desk_db, rng_for(20_000 + i), it.certificate.witness)
            text = render_plan_text(plan)
            again = render_plan_text(parse_plan_text(text))
            assert again == text
            assert parse_plan_text(again) == plan
            plan_texts.append(text)

        rng = random.Random(10)
        for _ in range(1000):
            t = _random_turn(rng, plan_texts)
            assert parse_turn(render_turn(t)) == t
            assert parse_turn(_respace(render_turn(t), rng)) == t

        seeds = plan_texts[:50] + [render_turn(_random_turn(rng, plan_texts)) for _ in range(50)]
        diagnostics = 0
        for text in _fuzz_inputs(rng, seeds):
            try:
                turn = parse_turn(text)
                if isinstance(turn.action, FinalAnswer):
                    parse_plan_text(turn.action.text)
            except FormatError as exc:
                assert exc.reason
                diagnostics += 1
            except PlanParseError as exc:
                assert str(exc)
                diagnostics += 1
            try:
                parse_plan_text(text)
            except PlanParseError as exc:
                assert str(exc)
                diagnostics += 1
        c["detail"] = f"(1000 plans, 1000 turns, 10000 fuzzed inputs, {diagnostics} diagnostics, 0 crashes)"


def test_11_throughput(dataset, desk_db):
    with criterion(11, "throughput") as c:
        items = [(it.spec, it.text) for it in dataset] * 5
        t0 = time.perf_counter()
        report, _ = run_benchmark(OraclePolicy(desk_db), items, desk_db, seed=11, workers=None)
        secs = time.perf_counter() - t0
        rate = len(items) / secs * 60
        c["detail"] = f"({len(items)} oracle rollouts in {secs:.1f} s, {rate:.0f} per minute)"
        assert report.overall["success"] == 100.0
        assert rate >= 1000
