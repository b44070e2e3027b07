"""Operational oracle: exact enumeration and seeded Monte Carlo sampling."""
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emac import (AvailabilityEvidence, EvidenceModel, LatencyEvidence,
                  LeafEvidence, ResourceLimitError, SimConfig, build_q_values,
                  compose_detail, eval_optimistic, eval_pessimistic,
                  parse_expression)
from emac.simulate import replay_determinism, results_equal, run

from helpers import gen_model, gen_tree

NO_TIMEOUT = ("Series", "Parallel", "Race", "Cond", "KofN")


def model_for(avails, latencies=None):
    latencies = latencies or {}
    return EvidenceModel(
        leaves={n: LeafEvidence(
            AvailabilityEvidence(point=a),
            LatencyEvidence(tuple(latencies.get(n, ((50.0, 10),))),
                            latencies.get(n, ((50.0, 10),))[-1][1]))
            for n, a in avails.items()},
        branch_probs={}, domains={}, provenance={}, confidence={})


def test_config_rejects_bad_values():
    with pytest.raises(ValueError):
        SimConfig(trials=0, seed=1)
    with pytest.raises(ValueError):
        SimConfig(trials=10, seed=1, coupling="entangled")
    with pytest.raises(ValueError):
        SimConfig(trials=10, seed=1, mode="guess")
    with pytest.raises(ValueError):
        SimConfig(trials=10, seed=1, percentiles=(1.0,))
    with pytest.raises(ValueError):
        run(parse_expression("A"), model_for({"A": 0.9}), {}, None)


def test_enumerate_series_is_exact():
    model = model_for({"A": 0.999, "B": 0.995})
    res = run(parse_expression("Series(A, B)"), model, {},
              SimConfig(trials=1, seed=0, mode="enumerate"))
    assert res.availability == pytest.approx(0.994005, abs=1e-15)
    assert res.std_error == 0.0 and res.mode == "enumerate"


def test_enumerate_comonotone_race_shows_no_redundancy_gain():
    model = model_for({"A": 0.99, "B": 0.98})
    res = run(parse_expression("Race(A, B)"), model,
              {"d": frozenset({"A", "B"})},
              SimConfig(trials=1, seed=0, coupling="comonotone",
                        mode="enumerate"))
    assert res.availability == pytest.approx(0.99, abs=1e-15)


def test_enumerate_latency_quantiles_nearest_rank():
    model = model_for({"A": 1.0, "B": 1.0},
                      {"A": ((100.0, 10),), "B": ((50.0, 10),)})
    res = run(parse_expression("Series(A, B)"), model, {},
              SimConfig(trials=1, seed=0, mode="enumerate",
                        percentiles=(0.5, 0.99)))
    # point-mode reads single buckets at their midpoints: 50 + 25
    assert res.quantiles == {0.5: 75.0, 0.99: 75.0}
    assert res.latency.support == [(75.0, 1.0)]


def test_enumerate_reports_deadline_fractions():
    model = model_for({"B": 0.9, "F": 1.0},
                      {"B": ((100.0, 6), (250.0, 10),), "F": ((50.0, 10),)})
    res = run(parse_expression("Timeout(200ms; B, F)"), model, {},
              SimConfig(trials=1, seed=0, mode="enumerate"))
    # midpoints 50/175 both inside the deadline: q = body availability
    assert res.timeout_q == {"root": pytest.approx(0.9, abs=1e-15)}
    assert res.availability == pytest.approx(1.0, abs=1e-15)


def test_enumeration_size_overflow():
    names = [f"L{i}" for i in range(9)]
    buckets = tuple((10.0 * (j + 1), j + 1) for j in range(7))
    model = model_for({n: 0.99 for n in names}, {n: buckets for n in names})
    expr = parse_expression(f"Series({', '.join(names)})")
    with pytest.raises(ResourceLimitError):
        run(expr, model, {}, SimConfig(trials=1, seed=0, mode="enumerate"))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_enumerate_agrees_with_analytic_composition(seed):
    rng = random.Random(seed)
    expr = gen_tree(rng, max_leaves=5, max_depth=3)
    model = gen_model(rng, expr, max_points=3)
    res = run(expr, model, {}, SimConfig(trials=1, seed=0, mode="enumerate"))
    q = build_q_values(expr, model, {}, lo_hist="point")
    want = eval_optimistic(expr, model, q)
    assert res.availability == pytest.approx(want, abs=1e-12)
    detail = compose_detail(expr, model, "optimistic", {})
    got = res.latency
    assert got is not None
    assert np.allclose(got.values, detail.dist.values)
    assert np.allclose(got.masses, detail.dist.masses, atol=1e-12)


def test_montecarlo_replays_bit_identical():
    model = model_for({"A": 0.95, "B": 0.9})
    expr = parse_expression("Race(A, B)")
    cfg = SimConfig(trials=50_000, seed=42)
    assert replay_determinism(expr, model, {}, cfg)


def test_montecarlo_block_partitioning_is_stable():
    # availability over N trials must prefix-match a longer run's first block
    model = model_for({"A": 0.9})
    expr = parse_expression("A")
    small = run(expr, model, {}, SimConfig(trials=1000, seed=7))
    again = run(expr, model, {}, SimConfig(trials=1000, seed=7))
    assert results_equal(small, again)


def test_montecarlo_seeds_decorrelate():
    model = model_for({"A": 0.95, "B": 0.9})
    expr = parse_expression("Series(A, B)")
    a = run(expr, model, {}, SimConfig(trials=20_000, seed=1))
    b = run(expr, model, {}, SimConfig(trials=20_000, seed=2))
    assert not results_equal(a, b)


def test_montecarlo_tracks_analytic_independent():
    model = model_for({"A": 0.97, "B": 0.92, "C": 0.9})
    expr = parse_expression("Series(A, Race(B, C))")
    res = run(expr, model, {}, SimConfig(trials=40_000, seed=11))
    want = eval_optimistic(expr, model)
    band = 4.0 * max(res.std_error, 1e-9)
    assert abs(res.availability - want) <= band
    assert res.std_error == pytest.approx(
        math.sqrt(res.availability * (1 - res.availability) / res.trials))


def test_montecarlo_tracks_analytic_comonotone():
    model = model_for({"A": 0.97, "B": 0.92})
    expr = parse_expression("Race(A, B)")
    domains = {"d": frozenset({"A", "B"})}
    res = run(expr, model, domains,
              SimConfig(trials=40_000, seed=3, coupling="comonotone"))
    want = eval_pessimistic(expr, model, domains)
    assert abs(res.availability - want) <= 4.0 * max(res.std_error, 1e-9)


def test_montecarlo_timeout_fraction_tracks_enumerate():
    model = model_for({"B": 0.9, "F": 1.0},
                      {"B": ((100.0, 6), (250.0, 10),), "F": ((50.0, 10),)})
    expr = parse_expression("Timeout(120ms; B, F)")
    cfg = SimConfig(trials=40_000, seed=5)
    exact = run(expr, model, {}, SimConfig(trials=1, seed=0, mode="enumerate"))
    mc = run(expr, model, {}, cfg)
    # q = 0.9 * 0.6: body up and its draw under the deadline
    assert exact.timeout_q["root"] == pytest.approx(0.54, abs=1e-15)
    se = math.sqrt(0.54 * 0.46 / cfg.trials)
    assert abs(mc.timeout_q["root"] - 0.54) <= 4.0 * se


def test_result_document_shape():
    model = model_for({"A": 0.9})
    res = run(parse_expression("A"), model, {}, SimConfig(trials=100, seed=0))
    doc = res.to_doc()
    assert set(doc) == {"availability", "stdError", "trials", "coupling",
                        "mode", "quantiles", "timeoutQ", "latency"}
    assert doc["trials"] == 100 and doc["coupling"] == "independent"
    assert all(isinstance(k, str) for k in doc["quantiles"])
