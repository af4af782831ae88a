from __future__ import annotations

import itertools
import random
import warnings
from dataclasses import replace

import pytest

from travelrl.evaluation import compute_cost, evaluate
from travelrl.plans import DayEntry, Place, Plan, TransportLeg, render_plan_text
from travelrl.query import HardConstraintSet, QuerySpec
from travelrl.synthesis import (
    InfeasibleError,
    QueryTextError,
    SynthesisWarning,
    estimate_budget,
    extract_spec,
    load_dataset,
    render_query,
    sample_elements,
    save_dataset,
    solve,
    split_counts,
    synthesize_dataset,
)

from helpers import brute_check


def test_split_counts():
    assert split_counts(200, (4, 3, 3)) == {"easy": 80, "medium": 60, "hard": 60}
    assert split_counts(1000) == {"easy": 400, "medium": 300, "hard": 300}
    c = split_counts(7)
    assert sum(c.values()) == 7


def test_dataset_shape(dataset, desk_db):
    assert len(dataset) == 200
    assert [sum(it.difficulty == d for it in dataset) for d in ("easy", "medium", "hard")] == [80, 60, 60]
    assert len({it.spec for it in dataset}) == 200
    for it in dataset:
        n = len(it.spec.constraints.present())
        assert n == {"easy": 0, "medium": 1, "hard": n if n >= 2 else -1}[it.difficulty]
        assert it.spec.budget >= it.certificate.min_cost
        assert it.spec.days in (3, 5, 7)
        assert it.spec.visiting_city_number == (it.spec.days - 1) // 2


def test_synthesis_deterministic(desk_db, dataset):
    again = synthesize_dataset(desk_db, split_counts(200, (4, 3, 3)), seed=0)
    assert [i.to_json() for i in again] == [i.to_json() for i in dataset]
    other = synthesize_dataset(desk_db, split_counts(20), seed=1)
    assert [i.spec for i in other] != [i.spec for i in dataset[:20]]


def test_dataset_file_roundtrip(tmp_path, dataset):
    p = save_dataset(dataset[:20], tmp_path / "d.jsonl")
    assert load_dataset(p) == dataset[:20]


def test_query_text_roundtrip(dataset):
    for it in dataset:
        assert extract_spec(it.text) == it.spec
        assert render_query(it.spec) == it.text


def test_query_text_rejects_noise():
    with pytest.raises(QueryTextError):
        extract_spec("hello")


def test_infeasible_specs(desk_db, dataset):
    it = dataset[0]
    assert solve(replace(it.spec, origin="Atlantis"), desk_db).status == "infeasible"
    with pytest.raises(InfeasibleError):
        estimate_budget(replace(it.spec, origin="Atlantis"), desk_db)
    assert not solve(it.spec.with_budget(1), desk_db).feasible


def test_budget_rounding(desk_db, dataset):
    it = dataset[5]
    b = estimate_budget(it.spec.with_budget(None), desk_db, slack=1.0)
    assert b >= it.certificate.min_cost and b - it.certificate.min_cost < 1
    with pytest.raises(ValueError):
        estimate_budget(it.spec, desk_db, slack=0.5)


def test_shortfall_warns(tiny_db):
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        items = synthesize_dataset(tiny_db, {"easy": 500}, seed=0, max_attempts_per_item=2, trip_days=(3,))
    assert len(items) < 500
    assert any(issubclass(x.category, SynthesisWarning) for x in w)


# -- independent optimality check on tiny 3-day trips -------------------------------------------


def _legs(db, a, b, date):
    out = [TransportLeg("Flight", a, b, float(f.price), f.flight_number)
           for f in db.flights if (f.departure_city, f.destination_city, f.date) == (a, b, date)]
    for d in db.distances:
        if (d.departure_city, d.destination_city) == (a, b):
            out.append(TransportLeg("Taxi" if d.mode == "taxi" else "Self-driving", a, b, float(d.cost)))
    return out


def _all_plans(spec, db):
    city, origin = spec.destination, spec.origin
    rests = [Place(r.name, r.city) for r in db.restaurants if r.city == city]
    sights = [Place(r.name, r.city) for r in db.attractions if r.city == city]
    stays = [Place(r.name, r.city) for r in db.accommodations if r.city == city]
    for out, back in itertools.product(_legs(db, origin, city, spec.dates[0]), _legs(db, city, origin, spec.dates[2])):
        for meals in itertools.combinations(rests, 3):
            for h1, h2 in itertools.product(stays, stays):
                yield Plan((
                    DayEntry(1, f"from {origin} to {city}", out, accommodation=h1),
                    DayEntry(2, city, None, meals[0], (sights[0],), meals[1], meals[2], h2),
                    DayEntry(3, f"from {city} to {origin}", back),
                ))


def _brute_min_cost(spec, db):
    best = None
    free = spec.with_budget(None)
    for plan in _all_plans(spec, db):
        ok = brute_check(render_plan_text(plan), free, db)
        if all(ok.values()):
            c = compute_cost(plan, free, db)
            best = c if best is None or c < best else best
    return best


@pytest.mark.parametrize("seed", range(10))
def test_solver_min_cost_matches_enumeration(tiny_db, seed):
    rng = random.Random(seed)
    spec = sample_elements(["easy", "medium", "hard"][seed % 3], tiny_db, rng, trip_days=(3,))
    cert = solve(spec, tiny_db)
    brute = _brute_min_cost(spec, tiny_db)
    if brute is None:
        assert not cert.feasible
        return
    assert cert.feasible
    assert cert.min_cost == pytest.approx(brute)
    _, scores = evaluate(cert.witness, spec.with_budget(None), tiny_db)
    assert scores.success == 1


def test_spec_validation():
    with pytest.raises(ValueError):
        QuerySpec("A", "B", ("2022-03-01", "2022-03-03"))
    with pytest.raises(ValueError):
        QuerySpec("A", "B", ("2022-03-01",), people=0)
    with pytest.raises(ValueError):
        HardConstraintSet(room_type="castle")
