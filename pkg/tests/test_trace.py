"""Per-node derivation records, verdicts, and the audit document."""
import json
import pathlib
import random

import pytest

from emac import (AvailabilityEvidence, DocumentError, EvidenceModel,
                  GovernancePolicy, JourneySpec, LatencyEvidence,
                  LeafEvidence, Objective, ProbEstimate, build_trace,
                  load_model_document, load_spec_document, parse_expression)

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="module")
def checkout():
    spec = load_spec_document((FIXTURES / "checkout.yaml").read_bytes())
    model = load_model_document((FIXTURES / "model.yaml").read_bytes())
    return spec, model, build_trace(spec, model)


def make_spec(text, *, domains=None, availability=99.0, latency=None,
              policy=None):
    pct, thr = latency if latency else (None, None)
    return JourneySpec(name="j", expression=parse_expression(text),
                       objective=Objective.build(availability, pct, thr),
                       policy=policy or GovernancePolicy(),
                       domains=domains or {})


def make_model(avails, *, latencies=None, sli=None, probs=None, windows=None):
    latencies = latencies or {}
    return EvidenceModel(
        leaves={n: LeafEvidence(
            AvailabilityEvidence(point=a, window=(windows or {}).get(n)),
            LatencyEvidence(tuple(latencies.get(n, ((50.0, 100),)),),
                            latencies.get(n, ((50.0, 100),))[-1][1]),
            (sli or {}).get(n))
            for n, a in avails.items()},
        branch_probs=probs or {}, domains={}, provenance={}, confidence={})


def test_one_record_per_node(checkout):
    spec, _, trace = checkout
    assert len(trace.records) == 10
    assert set(trace.records) == {
        "root", "root.0", "root.1", "root.1.0", "root.1.1", "root.2",
        "root.2.0", "root.2.0.0", "root.2.0.1", "root.2.1"}
    assert trace.records["root"].operator == "Series"
    assert trace.records["root.1"].operator == "Cond"
    assert trace.records["root.2"].operator == "Timeout"
    assert trace.records["root.0"].leaf == "Frontend"


def test_walkthrough_verdict_passes(checkout):
    _, _, trace = checkout
    assert trace.verdict == "pass"
    assert trace.interval.lo == pytest.approx(0.999224867655, abs=1e-12)
    assert trace.quantile.upper == 260.0
    assert len(trace.verdict_reasons) == 2
    assert all("meets" in r for r in trace.verdict_reasons)


def test_raised_target_fails_with_reason(checkout):
    spec, model, _ = checkout
    strict = JourneySpec(name=spec.name, expression=spec.expression,
                         objective=Objective.build(99.99, 0.99, 400.0),
                         policy=spec.policy, domains=spec.domains,
                         latency_query=spec.latency_query)
    trace = build_trace(strict, model)
    assert trace.verdict == "fail"
    assert any("misses target" in r for r in trace.verdict_reasons)


def test_domain_records_carry_coupling_assumptions(checkout):
    _, _, trace = checkout
    race = trace.records["root.2.0"]
    assert race.operator == "Race"
    assert "lower bound: comonotone-within-domains" in race.assumptions
    assert "upper bound: independent" in race.assumptions
    frontend = trace.records["root.0"]
    assert "lower bound: independent" in frontend.assumptions
    assert "upper bound: independent" in frontend.assumptions


def test_timeout_record_embeds_deadline_sli(checkout):
    _, _, trace = checkout
    rec = trace.records["root.2"]
    assert "deadline-sli-embedded-constant" in rec.flags
    assert any(a.startswith("deadline SLI q in [") for a in rec.assumptions)
    assert trace.q_values["root.2"].t_ms == 200


def test_windows_collected_from_evidence(checkout):
    _, _, trace = checkout
    assert trace.records["root"].windows == ("30d",)


def test_verdict_document_is_json_ready(checkout):
    _, _, trace = checkout
    doc = trace.to_doc()
    text = json.dumps(doc)
    assert '"verdict": "pass"' in text
    assert len(doc["records"]) == 10
    assert doc["objective"]["errorBudget"] == pytest.approx(0.001)
    assert doc["symbolic"]["mode"] == "pessimistic"
    assert doc["timeoutQ"]["root.2"]["tMs"] == 200


def test_backlinks_register_and_collide(checkout):
    spec, model, _ = checkout
    trace = build_trace(spec, model)
    trace.link("emac:checkout:x", ["root"])
    assert trace.to_doc()["backlinks"]["emac:checkout:x"] == ["root"]
    with pytest.raises(ValueError):
        trace.link("emac:checkout:x", ["root.1"])


def test_invalid_binding_refuses_to_trace():
    spec = make_spec("Series(A, Ghost)")
    model = make_model({"A": 0.9})
    with pytest.raises(DocumentError):
        build_trace(spec, model)


def test_spec_and_model_domains_merge():
    spec = make_spec("Series(A, B)",
                     domains={"d1": frozenset({"A", "B"})})
    base = make_model({"A": 0.999, "B": 0.995})
    model = EvidenceModel(leaves=base.leaves, branch_probs={},
                          domains={"d2": frozenset({"B"})},
                          provenance={}, confidence={})
    trace = build_trace(spec, model)
    assert set(trace.domains) == {"d1+d2"} or set(trace.domains) == {"d1"}
    assert frozenset({"A", "B"}) in trace.domains.values()


def test_missing_query_snippet_flagged():
    spec = make_spec("Series(A, B)")
    model = make_model({"A": 0.9, "B": 0.9}, sli={"A": "sum(rate(a[5m]))"})
    trace = build_trace(spec, model)
    assert "no-query-snippet" not in trace.records["root.0"].flags
    assert "no-query-snippet" in trace.records["root.1"].flags


def test_quorum_latency_flag_only_with_fallible_children():
    spec = make_spec("KofN(2; A, B, C)")
    flaky = build_trace(spec, make_model({"A": 0.9, "B": 0.9, "C": 0.9}))
    sure = build_trace(spec, make_model({"A": 1.0, "B": 1.0, "C": 1.0}))
    assert "quorum-latency-conditioned-on-success" in flaky.records["root"].flags
    assert "quorum-latency-conditioned-on-success" not in sure.records["root"].flags


def test_capped_support_flagged():
    # irregular edges so pairwise sums stay distinct and exceed the cap
    rng = random.Random(3)
    edges_a = sorted(rng.uniform(10, 600) for _ in range(70))
    edges_b = sorted(rng.uniform(10, 600) for _ in range(70))

    def mk(edges):
        return tuple((e, i + 1) for i, e in enumerate(edges))
    spec = make_spec("Series(A, B)")
    model = make_model({"A": 0.99, "B": 0.99},
                       latencies={"A": mk(edges_a), "B": mk(edges_b)})
    trace = build_trace(spec, model)
    assert "latency-support-capped" in trace.records["root"].flags
    assert trace.conservative_dist.capped


def test_availability_only_world_skips_latency():
    spec = make_spec("Race(A, B)")
    model = EvidenceModel(
        leaves={n: LeafEvidence(AvailabilityEvidence(point=0.99), None)
                for n in ("A", "B")},
        branch_probs={}, domains={}, provenance={}, confidence={})
    trace = build_trace(spec, model)
    assert trace.quantile is None and trace.conservative_dist is None
    assert trace.records["root"].quantile is None
    assert trace.verdict == "pass"
    doc = trace.to_doc()
    assert doc["latency"] is None
    json.dumps(doc)


def test_interval_brackets_named_probabilities():
    spec = make_spec("Cond(p; A, B)")
    model = make_model({"A": 0.999, "B": 0.99},
                       probs={"p": ProbEstimate(0.8, 0.7, 0.9)})
    trace = build_trace(spec, model)
    assert trace.interval.prob_endpoints == (("p", 0.7, 0.9),)
    rec_doc = trace.records["root"].to_doc()
    assert rec_doc["interval"]["probEndpoints"] == [
        {"name": "p", "lower": 0.7, "upper": 0.9}]
