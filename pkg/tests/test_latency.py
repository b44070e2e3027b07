"""Discrete latency distributions: primitives, quantiles, composition."""
import math
import random
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emac import (AvailabilityEvidence, DegenerateTruncation, DiscreteDist,
                  EvidenceModel, LatencyEvidence, LeafEvidence, build_q_values,
                  compose, convolve, dkw_epsilon, from_histogram, max_indep,
                  min_indep, mixture, order_statistic, parse_expression,
                  quantile, shift, truncate_renorm)
from emac.latency import CAPACITY

from helpers import gen_buckets

D = DiscreteDist.from_pairs


def support(d, nd=12):
    return [(round(v, nd), round(m, nd)) for v, m in d.support]


def model_for(latencies, avails=None, probs=None):
    avails = avails or {}
    return EvidenceModel(
        leaves={n: LeafEvidence(AvailabilityEvidence(point=avails.get(n, 1.0)),
                                LatencyEvidence(tuple(b), b[-1][1]))
                for n, b in latencies.items()},
        branch_probs=probs or {}, domains={}, provenance={}, confidence={})


# construction invariants


def test_dist_rejects_disorder_and_bad_mass():
    with pytest.raises(ValueError):
        DiscreteDist(np.array([2.0, 1.0]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        DiscreteDist(np.array([1.0, 2.0]), np.array([0.5, 0.4]))
    with pytest.raises(ValueError):
        DiscreteDist(np.array([-1.0]), np.array([1.0]))


def test_from_pairs_merges_duplicates():
    d = D([(100.0, 0.25), (100.0, 0.25), (300.0, 0.5)])
    assert support(d) == [(100.0, 0.5), (300.0, 0.5)]


def test_cdf_at_closed_boundary():
    d = D([(100.0, 0.5), (300.0, 0.5)])
    assert d.cdf_at(99.9) == 0.0
    assert d.cdf_at(100.0) == 0.5
    assert d.cdf_at(300.0) == 1.0
    assert list(d.cdf_at(np.array([0.0, 200.0]))) == [0.0, 0.5]


# histogram readings


def test_histogram_conservative_uses_upper_edges():
    ev = LatencyEvidence(((100.0, 60), (300.0, 100)), 100)
    d = from_histogram(ev, "conservative")
    assert support(d) == [(100.0, 0.6), (300.0, 0.4)]
    assert d.samples == 100


def test_histogram_point_uses_midpoints():
    ev = LatencyEvidence(((100.0, 60), (300.0, 100)), 100)
    d = from_histogram(ev, "point")
    assert support(d) == [(50.0, 0.6), (200.0, 0.4)]


def test_histogram_single_bucket_midpoint():
    d = from_histogram(LatencyEvidence(((50.0, 7),), 7), "point")
    assert support(d) == [(25.0, 1.0)]


def test_histogram_empty_bucket_dropped():
    ev = LatencyEvidence(((10.0, 0), (20.0, 100)), 100)
    assert support(from_histogram(ev, "point")) == [(15.0, 1.0)]
    assert support(from_histogram(ev, "conservative")) == [(20.0, 1.0)]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.001, 0.999))
def test_conservative_reading_dominates_point(seed, p):
    ev = LatencyEvidence(*gen_buckets(random.Random(seed)))
    lo = quantile(from_histogram(ev, "point"), p)
    hi = quantile(from_histogram(ev, "conservative"), p)
    assert hi.point >= lo.point and hi.upper >= lo.upper


# primitive operations


def test_convolve_deltas():
    d = convolve(DiscreteDist.delta(100.0), DiscreteDist.delta(50.0))
    assert support(d) == [(150.0, 1.0)]


def test_min_max_against_delta():
    a = D([(100.0, 0.5), (300.0, 0.5)])
    b = DiscreteDist.delta(200.0)
    assert support(min_indep([a, b])) == [(100.0, 0.5), (200.0, 0.5)]
    assert support(max_indep([a, b])) == [(200.0, 0.5), (300.0, 0.5)]


def test_order_statistic_median_of_three_coins():
    coin = D([(1.0, 0.5), (3.0, 0.5)])
    med = order_statistic(2, [coin, coin, coin])
    assert support(med) == [(1.0, 0.5), (3.0, 0.5)]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_order_statistic_edge_cases_match_min_max(seed, n):
    rng = random.Random(seed)
    dists = [from_histogram(LatencyEvidence(*gen_buckets(rng)), "point")
             for _ in range(n)]
    lo, hi = order_statistic(1, dists), order_statistic(n, dists)
    ref_lo, ref_hi = min_indep(dists), max_indep(dists)
    assert np.allclose(lo.values, ref_lo.values)
    assert np.allclose(lo.masses, ref_lo.masses, atol=1e-12)
    assert np.allclose(hi.values, ref_hi.values)
    assert np.allclose(hi.masses, ref_hi.masses, atol=1e-12)


def test_truncate_renorm_example():
    d, within = truncate_renorm(D([(100.0, 0.5), (300.0, 0.5)]), 200.0)
    assert support(d) == [(100.0, 1.0)] and within == 0.5
    with pytest.raises(DegenerateTruncation):
        truncate_renorm(D([(100.0, 1.0)]), 50.0)


def test_mixture_identities():
    a, b = D([(1.0, 1.0)]), D([(2.0, 1.0)])
    assert support(mixture(1.0, a, b)) == [(1.0, 1.0)]
    assert support(mixture(0.0, a, b)) == [(2.0, 1.0)]
    assert support(mixture(0.25, a, b)) == [(1.0, 0.25), (2.0, 0.75)]
    with pytest.raises(ValueError):
        mixture(1.5, a, b)


def test_shift_adds_constant():
    assert support(shift(D([(10.0, 0.5), (20.0, 0.5)]), 5.0)) == \
        [(15.0, 0.5), (25.0, 0.5)]
    with pytest.raises(ValueError):
        shift(DiscreteDist.delta(1.0), -1.0)


ops = st.sampled_from(["convolve", "min", "max", "mixture"])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), ops, st.floats(0.0, 1.0))
def test_operations_conserve_mass_and_order(seed, op, w):
    rng = random.Random(seed)
    a = from_histogram(LatencyEvidence(*gen_buckets(rng)), "point")
    b = from_histogram(LatencyEvidence(*gen_buckets(rng)), "conservative")
    d = {"convolve": lambda: convolve(a, b),
         "min": lambda: min_indep([a, b]),
         "max": lambda: max_indep([a, b]),
         "mixture": lambda: mixture(w, a, b)}[op]()
    assert math.isclose(float(d.masses.sum()), 1.0, abs_tol=1e-9)
    assert np.all(np.diff(d.values) > 0)
    assert np.all(d.masses >= 0)
    assert len(d.values) <= CAPACITY


def test_capacity_regrid_is_conservative():
    rng = random.Random(7)
    vals_a = sorted(rng.uniform(0, 500) for _ in range(70))
    vals_b = sorted(rng.uniform(0, 500) for _ in range(70))
    a = D([(v, 1 / 70) for v in vals_a])
    b = D([(v, 1 / 70) for v in vals_b])
    d = convolve(a, b)
    assert d.capped and len(d.values) <= CAPACITY
    # exact reference by brute force
    acc = {}
    for (va, ma), (vb, mb) in product(zip(vals_a, [1 / 70] * 70),
                                      zip(vals_b, [1 / 70] * 70)):
        acc[va + vb] = acc.get(va + vb, 0.0) + ma * mb
    xs = np.array(sorted(acc))
    exact_cdf = np.cumsum([acc[x] for x in xs])
    probe = np.concatenate([d.values, xs])
    got = d.cdf_at(probe)
    ref = np.interp(probe, xs, exact_cdf, left=0.0)
    # regridding shoves mass upward, never downward
    assert np.all(got <= ref + 1e-9)
    assert math.isclose(float(d.masses.sum()), 1.0, abs_tol=1e-9)


# quantiles


def test_quantile_analytic_no_band():
    res = quantile(D([(100.0, 0.5), (300.0, 0.5)]), 0.99)
    assert (res.point, res.upper) == (300.0, 300.0)
    assert res.effective_samples == "analytic"


def test_dkw_band_formula():
    eps = dkw_epsilon(10000, 0.05)
    assert eps == pytest.approx(math.sqrt(math.log(40.0) / 20000.0), rel=1e-12)
    assert dkw_epsilon(None, 0.05) == 0.0


def test_quantile_band_lifts_upper_two_grid_steps():
    d = D([(float(i), 0.01) for i in range(1, 101)], samples=10000)
    res = quantile(d, 0.95)
    assert res.point == 95.0
    assert res.upper == 97.0  # 0.95 + eps(10000) lands in the 97th cell


def test_quantile_band_saturates_at_support_max():
    d = D([(float(i), 0.01) for i in range(1, 101)], samples=10000)
    res = quantile(d, 0.995)
    assert res.point == 100.0 and res.upper == 100.0


def test_quantile_rejects_endpoints():
    with pytest.raises(ValueError):
        quantile(DiscreteDist.delta(1.0), 1.0)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.99))
def test_quantile_upper_never_below_point(seed, p):
    d = from_histogram(LatencyEvidence(*gen_buckets(random.Random(seed))),
                       "conservative")
    res = quantile(d, p)
    assert res.upper >= res.point
    assert res.point in d.values and res.upper in d.values


# composition


def test_series_composition_convolves():
    model = model_for({"A": [(100.0, 10)], "B": [(50.0, 10)]})
    dist, q = compose(parse_expression("Series(A, B)"), model, "pessimistic")
    assert support(dist) == [(150.0, 1.0)] and q == {}


def test_timeout_composition_splits_at_deadline():
    model = model_for({"B": [(100.0, 60), (250.0, 100)], "F": [(50.0, 100)]})
    expr = parse_expression("Timeout(200ms; B, F)")
    dist, q = compose(expr, model, "pessimistic")
    assert support(dist) == [(100.0, 0.6), (250.0, 0.4)]
    tq = q["root"]
    assert tq.t_ms == 200 and tq.lo == pytest.approx(0.6)
    # point-mode reading puts the slow bucket at 175ms, inside the deadline
    assert tq.hi == pytest.approx(1.0)
    assert tq.cdf_lo == pytest.approx(0.6) and tq.cdf_hi == pytest.approx(1.0)


def test_timeout_deadline_above_support_is_certain():
    model = model_for({"B": [(100.0, 10)], "F": [(50.0, 10)]})
    _, q = compose(parse_expression("Timeout(300ms; B, F)"), model, "pessimistic")
    assert q["root"].lo == 1.0 and q["root"].hi == 1.0


def test_timeout_deadline_below_support_falls_back():
    model = model_for({"B": [(100.0, 10)], "F": [(50.0, 10)]})
    expr = parse_expression("Timeout(50ms; B, F)")
    dist, q = compose(expr, model, "pessimistic")
    assert q["root"].lo == 0.0
    assert support(dist) == [(100.0, 1.0)]  # fallback shifted by the deadline


def test_race_latency_conditions_on_success():
    # B fast but flaky, C slow but sure: conditioning shifts mass toward C
    model = model_for({"B": [(10.0, 10)], "C": [(100.0, 10)]},
                      avails={"B": 0.5, "C": 1.0})
    dist, _ = compose(parse_expression("Race(B, C)"), model, "pessimistic")
    assert support(dist) == [(10.0, 0.5), (100.0, 0.5)]


def test_build_q_values_resolves_inner_deadlines_first():
    model = model_for({"A": [(30.0, 10)], "B": [(40.0, 10)],
                       "C": [(20.0, 10)], "D": [(10.0, 10)]})
    expr = parse_expression("Timeout(300ms; Series(A, Timeout(100ms; B, C)), D)")
    q = build_q_values(expr, model, {})
    assert list(q) == ["root.0.1", "root"]
    assert q["root.0.1"].lo == 1.0 and q["root"].lo == 1.0


def test_build_q_values_empty_without_deadlines():
    model = model_for({"A": [(30.0, 10)]})
    assert build_q_values(parse_expression("A"), model, {}) == {}


def test_compose_rejects_unknown_mode():
    model = model_for({"A": [(30.0, 10)]})
    with pytest.raises(ValueError):
        compose(parse_expression("A"), model, "middling")
