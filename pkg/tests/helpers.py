"""Shared randomized generators for trees, models, and domains."""
from __future__ import annotations

import random

from emac import (AvailabilityEvidence, Cond, EvidenceModel, KofN,
                  LatencyEvidence, Leaf, LeafEvidence, Parallel, ProbEstimate,
                  ProbRef, Race, Series, Timeout, leaf_names, walk)

ALL_OPS = ("Series", "Parallel", "Race", "Cond", "KofN", "Timeout")


def gen_tree(rng: random.Random, *, max_leaves: int = 8, max_depth: int = 4,
             ops=ALL_OPS, named_prob_rate: float = 0.0):
    """Random journey tree with unique leaf names L0..Ln."""
    counter = [0]

    def leaf():
        name = f"L{counter[0]}"
        counter[0] += 1
        return Leaf(name)

    def build(depth: int, budget: int):
        if budget <= 1 or depth >= max_depth or (depth > 0 and rng.random() < 0.35):
            return leaf(), 1
        op = rng.choice(ops)
        if op in ("Series", "Parallel", "Race", "KofN"):
            width = rng.randint(2, min(3, budget))
            kids, used = [], 0
            for i in range(width):
                share = max(1, (budget - used) // (width - i))
                child, u = build(depth + 1, share)
                kids.append(child)
                used += u
            if op == "KofN":
                return KofN(rng.randint(1, width), tuple(kids)), used
            cls = {"Series": Series, "Parallel": Parallel, "Race": Race}[op]
            return cls(tuple(kids)), used
        if op == "Cond":
            if budget < 2:
                return leaf(), 1
            t, ut = build(depth + 1, budget // 2)
            f, uf = build(depth + 1, budget - ut)
            if rng.random() < named_prob_rate:
                p = ProbRef(name=f"p{counter[0]}")
            else:
                p = ProbRef(value=round(rng.uniform(0.05, 0.95), 4))
            return Cond(p, t, f), ut + uf
        # Timeout
        if budget < 2:
            return leaf(), 1
        body, ub = build(depth + 1, budget // 2)
        fb, uf = build(depth + 1, budget - ub)
        return Timeout(rng.randint(40, 400), body, fb), ub + uf

    expr, _ = build(0, rng.randint(2, max_leaves))
    return expr


def gen_buckets(rng: random.Random, *, max_points: int = 4,
                samples: int | None = None):
    """Random cumulative latency histogram (strictly increasing edges)."""
    n_points = rng.randint(1, max_points)
    total = samples if samples is not None else rng.choice(
        (1000, 5000, 20000, 100000))
    edges = sorted(rng.sample(range(10, 600, 10), n_points))
    counts = sorted(rng.sample(range(1, total), n_points - 1)) + [total]
    return tuple((float(e), c) for e, c in zip(edges, counts)), total


def gen_model(rng: random.Random, expr, *, lo: float = 0.85, hi: float = 1.0,
              max_points: int = 4, prob_interval: bool = False,
              perfect: frozenset = frozenset()):
    """Evidence model binding every leaf and named branch probability."""
    leaves = {}
    for name in leaf_names(expr):
        avail = 1.0 if name in perfect else round(rng.uniform(lo, hi), 6)
        buckets, total = gen_buckets(rng, max_points=max_points)
        leaves[name] = LeafEvidence(
            AvailabilityEvidence(point=avail, window="30d"),
            LatencyEvidence(buckets, total, window="30d"))
    probs = {}
    for _, node in walk(expr):
        if isinstance(node, Cond) and not node.p.is_literal:
            v = round(rng.uniform(0.2, 0.8), 4)
            if prob_interval:
                span = round(rng.uniform(0.01, 0.15), 4)
                probs[node.p.name] = ProbEstimate(
                    v, max(0.0, v - span), min(1.0, v + span), 10000)
            else:
                probs[node.p.name] = ProbEstimate(v)
    return EvidenceModel(leaves=leaves, branch_probs=probs, domains={},
                         provenance={}, confidence={})


def gen_domains(rng: random.Random, expr, *, rate: float = 0.6):
    """Random disjoint multi-member domains over the tree's leaves."""
    names = list(leaf_names(expr))
    rng.shuffle(names)
    domains = {}
    i = 0
    while len(names) - i >= 2 and rng.random() < rate:
        size = rng.randint(2, min(3, len(names) - i))
        domains[f"d{len(domains)}"] = frozenset(names[i:i + size])
        i += size
    return domains


def subtree_leaves_under(expr, cls) -> frozenset:
    """Names of all leaves living beneath any node of the given type."""
    found = set()
    for _, node in walk(expr):
        if isinstance(node, cls):
            found.update(leaf_names(node))
    return frozenset(found)
