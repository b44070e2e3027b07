"""Verification oracle: exact enumeration and seeded Monte Carlo.

Implements the journey semantics operationally, one trial at a time (or one
joint outcome at a time), independently of the analytic engines:

* a leaf succeeds iff its latent uniform clears its availability — one
  uniform per leaf (independent coupling) or one per failure domain shared
  by all members (comonotone coupling);
* leaf latencies draw from the point-mode histogram reading, independently
  of fate;
* Race latency is the minimum over succeeding children only, KofN completes
  at the k-th smallest latency among succeeding children, Timeout takes the
  body iff it succeeds within t and otherwise pays t plus the fallback.

Enumerate mode integrates exactly over every joint discrete outcome (leaf
fates via domain patterns, latency support points, Cond branch draws) and
reports zero standard error. Monte Carlo mode draws vectorized trials from
counter-based streams keyed by (seed, site, trial block), so results are
bit-identical for identical configs regardless of how work is partitioned.
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .diagnostics import ResourceLimitError
from .latency import DiscreteDist, from_histogram, _finalize
from .model import (
    Cond, EvidenceModel, JourneyExpr, KofN, Leaf, Parallel, Race, Series,
    Timeout, children_of, effective_domains, leaf_names, walk,
)
from .availability import _domain_patterns, _prob_estimate

ENUM_LIMIT = 10_000_000
_CHUNK = 1 << 16  # trial block size; fixed so partitioning cannot shift draws

INDEPENDENT = "independent"
COMONOTONE = "comonotone"


@dataclass(frozen=True)
class SimConfig:
    trials: int
    seed: int
    coupling: str = INDEPENDENT
    mode: str = "montecarlo"
    percentiles: tuple[float, ...] = (0.5, 0.9, 0.99)

    def __post_init__(self):
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if self.coupling not in (INDEPENDENT, COMONOTONE):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        if self.mode not in ("enumerate", "montecarlo"):
            raise ValueError(f"unknown mode {self.mode!r}")
        for p in self.percentiles:
            if not 0.0 < p < 1.0:
                raise ValueError("percentiles must lie in (0, 1)")


@dataclass(frozen=True)
class SimResult:
    availability: float
    std_error: float
    latency: DiscreteDist | None
    quantiles: dict[float, float]
    trials: int
    timeout_q: dict[str, float]
    coupling: str
    mode: str

    def to_doc(self) -> dict:
        return {
            "availability": self.availability,
            "stdError": self.std_error,
            "trials": self.trials,
            "coupling": self.coupling,
            "mode": self.mode,
            "quantiles": {str(p): v for p, v in sorted(self.quantiles.items())},
            "timeoutQ": {k: v for k, v in sorted(self.timeout_q.items())},
            "latency": ([[v, m] for v, m in self.latency.support]
                        if self.latency is not None else None),
        }


def _same_dist(a: DiscreteDist | None, b: DiscreteDist | None) -> bool:
    if a is None or b is None:
        return a is b
    return (np.array_equal(a.values, b.values)
            and np.array_equal(a.masses, b.masses))


def results_equal(a: SimResult, b: SimResult) -> bool:
    return (a.availability == b.availability and a.std_error == b.std_error
            and a.quantiles == b.quantiles and a.timeout_q == b.timeout_q
            and a.trials == b.trials and _same_dist(a.latency, b.latency))


# ---------------------------------------------------------------------------
# Exact enumeration
# ---------------------------------------------------------------------------

class _Enumerator:
    """Propagates exact (failure mass, latency -> mass) maps up the tree."""

    def __init__(self, model: EvidenceModel, leaf_dists, overrides,
                 q_sink: dict[str, float], weight: float):
        self.model = model
        self.leaf_dists = leaf_dists
        self.overrides = overrides
        self.q_sink = q_sink
        self.weight = weight  # pattern weight, applied to recorded q values

    def node(self, expr: JourneyExpr, path: str):
        if isinstance(expr, Leaf):
            avail = self.overrides.get(expr.name)
            if avail is None:
                avail = self.model.availability_of(expr.name)
            dist = self.leaf_dists[expr.name]
            items = {float(v): avail * float(m)
                     for v, m in zip(dist.values, dist.masses)}
            return 1.0 - avail, items

        kids = [self.node(child, f"{path}.{i}")
                for i, child in enumerate(children_of(expr))]

        if isinstance(expr, (Series, Parallel)):
            combine = (lambda x, y: x + y) if isinstance(expr, Series) else max
            fail, items = kids[0]
            for f2, items2 in kids[1:]:
                out: dict[float, float] = {}
                for la, pa in sorted(items.items()):
                    for lb, pb in sorted(items2.items()):
                        key = combine(la, lb)
                        out[key] = out.get(key, 0.0) + pa * pb
                fail, items = fail + (1.0 - fail) * f2, out
            return fail, items

        if isinstance(expr, Race):
            fail, items = kids[0]
            for f2, items2 in kids[1:]:
                out = {}
                for la, pa in sorted(items.items()):
                    out[la] = out.get(la, 0.0) + pa * f2
                for lb, pb in sorted(items2.items()):
                    out[lb] = out.get(lb, 0.0) + fail * pb
                for la, pa in sorted(items.items()):
                    for lb, pb in sorted(items2.items()):
                        key = min(la, lb)
                        out[key] = out.get(key, 0.0) + pa * pb
                fail, items = fail * f2, out
            return fail, items

        if isinstance(expr, KofN):
            lists = [[(None, f)] + sorted(items.items()) for f, items in kids]
            fail = 0.0
            out = {}
            for combo in itertools.product(*lists):
                prob = 1.0
                for _, p in combo:
                    prob *= p
                if prob == 0.0:
                    continue
                lats = sorted(lat for lat, _ in combo if lat is not None)
                if len(lats) >= expr.k:
                    key = lats[expr.k - 1]
                    out[key] = out.get(key, 0.0) + prob
                else:
                    fail += prob
            return fail, out

        if isinstance(expr, Cond):
            p = _prob_estimate(self.model, expr.p).value
            (f_t, items_t), (f_f, items_f) = kids
            out = {}
            for la, pa in sorted(items_t.items()):
                out[la] = out.get(la, 0.0) + p * pa
            for lb, pb in sorted(items_f.items()):
                out[lb] = out.get(lb, 0.0) + (1.0 - p) * pb
            return p * f_t + (1.0 - p) * f_f, out

        if isinstance(expr, Timeout):
            (f_b, items_b), (f_f, items_f) = kids
            t = float(expr.t_ms)
            within = {la: pa for la, pa in items_b.items() if la <= t}
            q = math.fsum(within[k] for k in sorted(within))
            self.q_sink[path] = self.q_sink.get(path, 0.0) + self.weight * q
            miss = f_b + math.fsum(pa for la, pa in sorted(items_b.items())
                                   if la > t)
            out = dict(within)
            for lb, pb in sorted(items_f.items()):
                key = t + lb
                out[key] = out.get(key, 0.0) + miss * pb
            return miss * f_f, out

        raise TypeError(f"not a journey expression node: {expr!r}")


def _enumeration_size(expr, model, patterns_count: int) -> int:
    size = patterns_count
    size *= 2 ** sum(1 for _, n in walk(expr) if isinstance(n, Cond))
    for name in set(leaf_names(expr)):
        size *= 1 + len(model.leaves[name].latency.buckets)
    return size


def _run_enumerate(expr, model, domains, cfg: SimConfig) -> SimResult:
    eff = effective_domains(expr, domains)
    names = set(leaf_names(expr))
    leaf_dists = {n: from_histogram(model.leaves[n].latency, "point")
                  for n in names}

    if cfg.coupling == COMONOTONE:
        avail = {m: model.availability_of(m)
                 for members in eff.values() for m in members}
        lists = [_domain_patterns(members, avail)
                 for _, members in sorted(eff.items()) if len(members) > 1]
    else:
        lists = []

    patterns_count = 1
    for lst in lists:
        patterns_count *= len(lst)
    size = _enumeration_size(expr, model, patterns_count)
    if size > ENUM_LIMIT:
        raise ResourceLimitError(
            f"enumeration would visit ~{size} joint outcomes (limit {ENUM_LIMIT}); "
            "use Monte Carlo mode instead")

    q_sink: dict[str, float] = {}
    success: dict[float, float] = {}
    for combo in itertools.product(*lists) if lists else [()]:
        weight = 1.0
        fixes: dict[str, float] = {}
        for w, f in combo:
            weight *= w
            fixes.update(f)
        if weight <= 0.0:
            continue
        walker = _Enumerator(model, leaf_dists, fixes, q_sink, weight)
        _, items = walker.node(expr, "root")
        for lat in sorted(items):
            success[lat] = success.get(lat, 0.0) + weight * items[lat]

    availability = math.fsum(success[k] for k in sorted(success))
    latency = None
    quantiles: dict[float, float] = {}
    if availability > 0.0:
        lats = sorted(success)
        vals = np.asarray(lats, dtype=np.float64)
        masses = np.asarray([success[v] / availability for v in lats])
        latency = _finalize(vals, masses, None, False)
        cum = latency.cdf()
        for p in cfg.percentiles:
            idx = int(np.searchsorted(cum, p - 1e-12, side="left"))
            quantiles[p] = float(latency.values[min(idx, len(cum) - 1)])
    return SimResult(availability, 0.0, latency, quantiles, cfg.trials,
                     q_sink, cfg.coupling, "enumerate")


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def _stream(seed: int, site: str, block: int) -> np.random.Generator:
    digest = hashlib.blake2b(f"{site}#{block}".encode(), digest_size=16,
                             key=(seed & (2 ** 64 - 1)).to_bytes(8, "big"))
    key = np.frombuffer(digest.digest(), dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sample_dist(dist: DiscreteDist, u: np.ndarray) -> np.ndarray:
    cum = dist.cdf()
    idx = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
    return dist.values[idx]


class _TrialEvaluator:
    """Vectorized per-trial tree evaluation for one block of trials."""

    def __init__(self, model, fate: Mapping[str, np.ndarray],
                 lat: Mapping[str, np.ndarray],
                 branch: Mapping[str, np.ndarray],
                 q_counts: dict[str, int]):
        self.model = model
        self.fate = fate
        self.lat = lat
        self.branch = branch
        self.q_counts = q_counts

    def node(self, expr: JourneyExpr, path: str):
        if isinstance(expr, Leaf):
            ok = self.fate[expr.name] <= self.model.availability_of(expr.name)
            return ok, np.where(ok, self.lat[expr.name], np.inf)

        kids = [self.node(child, f"{path}.{i}")
                for i, child in enumerate(children_of(expr))]

        if isinstance(expr, Series):
            ok = np.logical_and.reduce([k[0] for k in kids])
            total = kids[0][1].copy()
            for _, l in kids[1:]:
                total = total + l
            return ok, np.where(ok, total, np.inf)
        if isinstance(expr, Parallel):
            ok = np.logical_and.reduce([k[0] for k in kids])
            top = np.maximum.reduce([k[1] for k in kids])
            return ok, np.where(ok, top, np.inf)
        if isinstance(expr, Race):
            ok = np.logical_or.reduce([k[0] for k in kids])
            # failed children already carry +inf latency
            return ok, np.minimum.reduce([k[1] for k in kids])
        if isinstance(expr, KofN):
            count = np.sum([k[0] for k in kids], axis=0)
            ok = count >= expr.k
            stack = np.stack([k[1] for k in kids])
            kth = np.partition(stack, expr.k - 1, axis=0)[expr.k - 1]
            return ok, np.where(ok, kth, np.inf)
        if isinstance(expr, Cond):
            p = _prob_estimate(self.model, expr.p).value
            take_true = self.branch[path] < p
            (ok_t, l_t), (ok_f, l_f) = kids
            return (np.where(take_true, ok_t, ok_f),
                    np.where(take_true, l_t, l_f))
        if isinstance(expr, Timeout):
            (ok_b, l_b), (ok_f, l_f) = kids
            t = float(expr.t_ms)
            in_time = ok_b & (l_b <= t)
            self.q_counts[path] = self.q_counts.get(path, 0) + int(in_time.sum())
            ok = np.where(in_time, True, ok_f)
            return ok, np.where(in_time, l_b, t + l_f)
        raise TypeError(f"not a journey expression node: {expr!r}")


def _run_montecarlo(expr, model, domains, cfg: SimConfig) -> SimResult:
    eff = effective_domains(expr, domains)
    names = sorted(set(leaf_names(expr)))
    leaf_dists = {n: from_histogram(model.leaves[n].latency, "point")
                  for n in names}
    domain_of: dict[str, str] = {}
    if cfg.coupling == COMONOTONE:
        for dname, members in eff.items():
            for m in members:
                domain_of[m] = dname
    cond_paths = [p for p, n in walk(expr) if isinstance(n, Cond)]

    successes = 0
    q_counts: dict[str, int] = {}
    collected: list[np.ndarray] = []
    done = 0
    block = 0
    while done < cfg.trials:
        n = min(_CHUNK, cfg.trials - done)
        fate_u: dict[str, np.ndarray] = {}
        domain_u: dict[str, np.ndarray] = {}
        fate: dict[str, np.ndarray] = {}
        lat: dict[str, np.ndarray] = {}
        for leaf in names:
            dom = domain_of.get(leaf)
            if dom is not None:
                if dom not in domain_u:
                    domain_u[dom] = _stream(cfg.seed, f"fate:domain:{dom}",
                                            block).random(n)
                fate[leaf] = domain_u[dom]
            else:
                fate[leaf] = _stream(cfg.seed, f"fate:leaf:{leaf}",
                                     block).random(n)
            u = _stream(cfg.seed, f"lat:{leaf}", block).random(n)
            lat[leaf] = _sample_dist(leaf_dists[leaf], u)
        branch = {p: _stream(cfg.seed, f"branch:{p}", block).random(n)
                  for p in cond_paths}

        ev = _TrialEvaluator(model, fate, lat, branch, q_counts)
        ok, latency = ev.node(expr, "root")
        successes += int(ok.sum())
        collected.append(latency[ok])
        done += n
        block += 1

    trials = cfg.trials
    a_hat = successes / trials
    se = math.sqrt(a_hat * (1.0 - a_hat) / trials)
    samples = np.sort(np.concatenate(collected)) if collected else np.empty(0)
    latency_dist = None
    quantiles: dict[float, float] = {}
    if samples.size:
        vals, counts = np.unique(samples, return_counts=True)
        latency_dist = _finalize(vals, counts / samples.size, None, False)
        for p in cfg.percentiles:
            idx = max(math.ceil(p * samples.size) - 1, 0)
            quantiles[p] = float(samples[idx])
    timeout_q = {path: count / trials for path, count in q_counts.items()}
    return SimResult(a_hat, se, latency_dist, quantiles, trials, timeout_q,
                     cfg.coupling, "montecarlo")


def run(expr: JourneyExpr, model: EvidenceModel,
        domains: Mapping[str, frozenset] | None = None,
        cfg: SimConfig | None = None) -> SimResult:
    """Simulate the journey, exactly (enumerate) or by sampling."""
    if cfg is None:
        raise ValueError("a SimConfig is required")
    if domains is None:
        domains = model.domains
    if cfg.mode == "enumerate":
        return _run_enumerate(expr, model, domains, cfg)
    return _run_montecarlo(expr, model, domains, cfg)


def replay_determinism(expr: JourneyExpr, model: EvidenceModel,
                       domains: Mapping[str, frozenset] | None,
                       cfg: SimConfig) -> bool:
    """Contract check: the same config reproduces bit-identical results."""
    return results_equal(run(expr, model, domains, cfg),
                         run(expr, model, domains, cfg))
