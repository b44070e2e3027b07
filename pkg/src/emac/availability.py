"""Availability engine: interval endpoints, sensitivity, symbolic forms.

Two evaluation semantics bracket the journey success probability:

* independent — every leaf fails independently; operators follow the usual
  product/complement/Poisson-binomial algebra.
* comonotone-within-domains — one latent uniform per failure domain drives
  all its members (member i succeeds iff the uniform clears its
  availability), so redundancy inside a domain yields no benefit. Sorting a
  domain's members by availability turns the coupling into m+1 success
  patterns with telescoping gap weights; patterns multiply across domains.

Only domains with two or more members present in the tree need pattern
enumeration: every operator is multilinear in each leaf's success indicator,
so leaves outside those domains integrate out analytically at their base
availabilities. Branch probabilities given as intervals are resolved at the
endpoint that extremizes the affine Cond form (per pattern for the
comonotone side); Timeout nodes consume a deadline SLI q = P(body succeeds
within t) supplied by the latency engine as override-aware CDF closures.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, TYPE_CHECKING

from .diagnostics import ResourceLimitError
from .model import (
    Cond, EvidenceModel, JourneyExpr, KofN, Leaf, Parallel, ProbEstimate,
    ProbRef, Race, Series, Timeout, children_of, effective_domains,
    leaf_names, walk,
)

if TYPE_CHECKING:
    from .latency import TimeoutQ

PATTERN_LIMIT = 1_000_000
QUORUM_EXPANSION_LIMIT = 8

INDEPENDENT = "independent"
COMONOTONE = "comonotone-within-domains"


def _pb_tail(k: int, probs) -> float:
    """Pr[at least k of independent Bernoulli(probs) succeed], scalar DP."""
    n = len(probs)
    if not 1 <= k <= n:
        raise ValueError("order k outside 1..n")
    state = [0.0] * (n + 1)
    state[0] = 1.0
    for p in probs:
        for j in range(n, 0, -1):
            state[j] = state[j] * (1.0 - p) + state[j - 1] * p
        state[0] *= (1.0 - p)
    return sum(state[k:])


def _prob_estimate(model: EvidenceModel | None, ref: ProbRef) -> ProbEstimate:
    if ref.is_literal:
        return ProbEstimate(ref.value)
    if model is None:
        raise ValueError(f"named branch probability {ref.name!r} requires an evidence model")
    est = model.branch_probs.get(ref.name)
    if est is None:
        raise ValueError(f"branch probability {ref.name!r} is not bound in the model")
    return est


def _pick_prob(est: ProbEstimate, v_true: float, v_false: float, pick: str) -> float:
    # the Cond form is affine in p, so the extreme sits at an endpoint
    if pick == "max":
        return est.hi_value if v_true >= v_false else est.lo_value
    return est.lo_value if v_true >= v_false else est.hi_value


def _eval_tree(node: JourneyExpr, path: str, model: EvidenceModel,
               q_values: Mapping[str, "TimeoutQ"], overrides: Mapping[str, float],
               pick: str, q_side: str, prob_sink: dict | None = None) -> float:
    """Independence-semantics recursion with leaf-availability overrides."""
    if isinstance(node, Leaf):
        if node.name in overrides:
            return overrides[node.name]
        return model.availability_of(node.name)

    kids = children_of(node)

    if isinstance(node, (Series, Parallel)):
        value = 1.0
        for i, child in enumerate(kids):
            value *= _eval_tree(child, f"{path}.{i}", model, q_values,
                                overrides, pick, q_side, prob_sink)
        return value

    if isinstance(node, Race):
        miss = 1.0
        for i, child in enumerate(kids):
            miss *= 1.0 - _eval_tree(child, f"{path}.{i}", model, q_values,
                                     overrides, pick, q_side, prob_sink)
        return 1.0 - miss

    if isinstance(node, KofN):
        values = [_eval_tree(child, f"{path}.{i}", model, q_values, overrides,
                             pick, q_side, prob_sink)
                  for i, child in enumerate(kids)]
        return _pb_tail(node.k, values)

    if isinstance(node, Cond):
        v_true = _eval_tree(node.if_true, f"{path}.0", model, q_values,
                            overrides, pick, q_side, prob_sink)
        v_false = _eval_tree(node.if_false, f"{path}.1", model, q_values,
                             overrides, pick, q_side, prob_sink)
        est = _prob_estimate(model, node.p)
        p = _pick_prob(est, v_true, v_false, pick)
        if prob_sink is not None and not node.p.is_literal:
            prob_sink[node.p.name] = p
        return p * v_true + (1.0 - p) * v_false

    if isinstance(node, Timeout):
        v_body = _eval_tree(node.body, f"{path}.0", model, q_values,
                            overrides, pick, q_side, prob_sink)
        v_fb = _eval_tree(node.fallback, f"{path}.1", model, q_values,
                          overrides, pick, q_side, prob_sink)
        entry = q_values.get(path)
        if entry is None:
            raise ValueError(f"missing deadline SLI for Timeout node at {path}")
        cdf_fn = entry.cdf_lo_fn if q_side == "lo" else entry.cdf_hi_fn
        q = v_body * cdf_fn(overrides)
        return q + (1.0 - q) * v_fb

    raise TypeError(f"not a journey expression node: {node!r}")


def eval_optimistic(expr: JourneyExpr, model: EvidenceModel,
                    q_values: Mapping[str, "TimeoutQ"] | None = None, *,
                    overrides: Mapping[str, float] | None = None,
                    path: str = "root", prob_sink: dict | None = None) -> float:
    """Journey success probability under full independence (upper-flavor)."""
    return _eval_tree(expr, path, model, q_values or {}, overrides or {},
                      pick="max", q_side="hi", prob_sink=prob_sink)


def _domain_patterns(members, avail: Mapping[str, float]):
    """Success patterns of one comonotone domain with telescoping weights.

    Members sorted by availability descending; pattern j fixes the top j
    members to success and the rest to failure, with weight A(j) - A(j+1)
    (A(0) read as 1, A(m+1) as 0). Zero-weight patterns are dropped.
    """
    ordered = sorted(members, key=lambda m: (-avail[m], m))
    levels = [avail[m] for m in ordered]
    patterns = []
    for j in range(len(ordered) + 1):
        upper = 1.0 if j == 0 else levels[j - 1]
        lower = levels[j] if j < len(ordered) else 0.0
        weight = upper - lower
        if weight <= 0.0:
            continue
        fixes = {m: (1.0 if i < j else 0.0) for i, m in enumerate(ordered)}
        patterns.append((weight, fixes))
    return patterns


def eval_pessimistic(expr: JourneyExpr, model: EvidenceModel,
                     domains: Mapping[str, frozenset] | None = None,
                     q_values: Mapping[str, "TimeoutQ"] | None = None, *,
                     overrides: Mapping[str, float] | None = None,
                     path: str = "root", prob_sink: dict | None = None) -> float:
    """Journey success probability under comonotone-within-domain coupling."""
    overrides = dict(overrides or {})
    q_values = q_values or {}
    eff = effective_domains(expr, model.domains if domains is None else domains)
    multi = {name: members for name, members in eff.items() if len(members) > 1}

    size = 1
    for members in multi.values():
        size *= len(members) + 1
    if size > PATTERN_LIMIT:
        raise ResourceLimitError(
            f"comonotone pattern space has {size} combinations (limit {PATTERN_LIMIT}); "
            "split or merge failure domains to simplify the correlation structure")

    base = {m: overrides.get(m, model.availability_of(m))
            for members in multi.values() for m in members}
    pattern_lists = [_domain_patterns(members, base)
                     for _, members in sorted(multi.items())]

    total = 0.0
    for combo in itertools.product(*pattern_lists):
        weight = 1.0
        fixes = dict(overrides)
        for w, f in combo:
            weight *= w
            fixes.update(f)
        if weight <= 0.0:
            continue
        total += weight * _eval_tree(expr, path, model, q_values, fixes,
                                     pick="min", q_side="lo",
                                     prob_sink=prob_sink)
    return total


def _ensure_q(expr, model, domains, q_values):
    if q_values is not None:
        return q_values
    if not any(isinstance(n, Timeout) for _, n in walk(expr)):
        return {}
    from .latency import build_q_values  # deferred: latency builds on this module
    return build_q_values(expr, model, domains)


def _clamp01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


@dataclass(frozen=True)
class AvailabilityInterval:
    """Journey availability bracketed by the two dependence assumptions.

    Each endpoint is labeled by the assumption that produced it; for
    conjunctive structure the comonotone value can exceed the independent one
    (correlation helps when everything must succeed), so endpoints are
    ordered and labels follow the values. prob_endpoints records, per named
    branch probability, the value used by each endpoint's evaluation.
    """

    lo: float
    hi: float
    lo_assumption: str
    hi_assumption: str
    prob_endpoints: tuple[tuple[str, float, float], ...] = ()

    @property
    def width(self) -> float:
        return self.hi - self.lo


def availability_interval(expr: JourneyExpr, model: EvidenceModel,
                          domains: Mapping[str, frozenset] | None = None,
                          q_values: Mapping[str, "TimeoutQ"] | None = None, *,
                          path: str = "root") -> AvailabilityInterval:
    if path == "root":
        q_values = _ensure_q(expr, model, domains, q_values)
    sink_pess: dict = {}
    sink_opt: dict = {}
    pess = _clamp01(eval_pessimistic(expr, model, domains, q_values,
                                     path=path, prob_sink=sink_pess))
    opt = _clamp01(eval_optimistic(expr, model, q_values, path=path,
                                   prob_sink=sink_opt))
    eff = effective_domains(expr, model.domains if domains is None else domains)
    correlated = any(len(m) > 1 for m in eff.values())
    if pess <= opt:
        lo, hi = pess, opt
        lo_label, hi_label = COMONOTONE, INDEPENDENT
        lo_sink, hi_sink = sink_pess, sink_opt
    else:
        lo, hi = opt, pess
        lo_label, hi_label = INDEPENDENT, COMONOTONE
        lo_sink, hi_sink = sink_opt, sink_pess
    if not correlated:
        # all-singleton domains: both endpoints are the independence value
        lo_label = hi_label = INDEPENDENT
    names = sorted(set(lo_sink) | set(hi_sink))
    endpoints = tuple((n, lo_sink.get(n, hi_sink.get(n)),
                       hi_sink.get(n, lo_sink.get(n))) for n in names)
    return AvailabilityInterval(lo, hi, lo_label, hi_label, endpoints)


# ---------------------------------------------------------------------------
# Sensitivity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensitivityEntry:
    name: str
    kind: str  # "leaf" or "domain"
    delta: float
    rank: int


@dataclass(frozen=True)
class SensitivityReport:
    entries: tuple[SensitivityEntry, ...]
    dominant: str | None
    bound_mode: str


def sensitivity(expr: JourneyExpr, model: EvidenceModel,
                domains: Mapping[str, frozenset] | None = None,
                q_values: Mapping[str, "TimeoutQ"] | None = None, *,
                bound_mode: str = "pessimistic") -> SensitivityReport:
    """Gain in the governed bound from perfecting each leaf / domain.

    Deltas recompute the bound with the leaf (or every domain member) forced
    to availability 1; entries sort by descending delta, ties by name.
    """
    if bound_mode not in ("pessimistic", "optimistic"):
        raise ValueError(f"unknown bound mode {bound_mode!r}")
    q_values = _ensure_q(expr, model, domains, q_values)

    def bound(overrides):
        if bound_mode == "pessimistic":
            return eval_pessimistic(expr, model, domains, q_values,
                                    overrides=overrides)
        return eval_optimistic(expr, model, q_values, overrides=overrides)

    baseline = bound({})
    raw: list[tuple[str, str, float]] = []
    for leaf in sorted(set(leaf_names(expr))):
        raw.append((leaf, "leaf", bound({leaf: 1.0}) - baseline))
    eff = effective_domains(expr, model.domains if domains is None else domains)
    for name, members in sorted(eff.items()):
        if len(members) < 2:
            continue  # a singleton domain duplicates its leaf entry
        raw.append((name, "domain", bound({m: 1.0 for m in members}) - baseline))

    raw.sort(key=lambda e: (-max(e[2], 0.0), e[0], e[1]))
    entries = tuple(SensitivityEntry(name, kind, max(delta, 0.0), rank)
                    for rank, (name, kind, delta) in enumerate(raw, start=1))
    return SensitivityReport(entries, entries[0].name if entries else None,
                             bound_mode)


# ---------------------------------------------------------------------------
# Symbolic availability
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SymNode:
    """One node of a symbolic availability expression (shared-subgraph DAG)."""

    op: str  # "sym" | "const" | "add" | "sub" | "mul" | "min" | "max"
    args: tuple["SymNode", ...] = ()
    name: str | None = None
    value: float | None = None


def _sym(name: str) -> SymNode:
    return SymNode("sym", name=name)


def _const(value: float) -> SymNode:
    return SymNode("const", value=float(value))


def _nary(op: str, args) -> SymNode:
    args = tuple(args)
    if len(args) == 1:
        return args[0]
    return SymNode(op, args=args)


def _add(*args) -> SymNode:
    return _nary("add", args)


def _mul(*args) -> SymNode:
    return _nary("mul", args)


def _sub(a: SymNode, b: SymNode) -> SymNode:
    # 1 - (1 - x) collapses to x (single-domain redundancy forms)
    if (a.op == "const" and a.value == 1.0 and b.op == "sub"
            and b.args[0].op == "const" and b.args[0].value == 1.0):
        return b.args[1]
    return SymNode("sub", args=(a, b))


def _min(*args) -> SymNode:
    return _nary("min", args)


def _max(*args) -> SymNode:
    return _nary("max", args)


_ONE = _const(1.0)


def _eval_sym(node: SymNode, values: Mapping[str, float], memo: dict) -> float:
    found = memo.get(id(node))
    if found is not None:
        return found
    if node.op == "sym":
        if node.name not in values:
            raise ValueError(f"no value bound for symbol {node.name!r}")
        result = float(values[node.name])
    elif node.op == "const":
        result = node.value
    elif node.op == "add":
        # compensated summation keeps wide polynomial sums within tolerance
        result = math.fsum(_eval_sym(a, values, memo) for a in node.args)
    elif node.op == "sub":
        result = (_eval_sym(node.args[0], values, memo)
                  - _eval_sym(node.args[1], values, memo))
    elif node.op == "mul":
        result = 1.0
        for a in node.args:
            result *= _eval_sym(a, values, memo)
    elif node.op == "min":
        result = min(_eval_sym(a, values, memo) for a in node.args)
    elif node.op == "max":
        result = max(_eval_sym(a, values, memo) for a in node.args)
    else:
        raise ValueError(f"unknown symbolic op {node.op!r}")
    memo[id(node)] = result
    return result


def _render_text(node: SymNode) -> str:
    if node.op == "sym":
        return node.name
    if node.op == "const":
        from .units import fmt_float
        return fmt_float(node.value)
    parts = [_render_text(a) for a in node.args]
    if node.op == "add":
        return "(" + " + ".join(parts) + ")"
    if node.op == "sub":
        return f"({parts[0]} - {parts[1]})"
    if node.op == "mul":
        return "(" + " * ".join(parts) + ")"
    return f"{node.op}({', '.join(parts)})"


@dataclass(frozen=True)
class SymbolicExpr:
    """Availability as an expression over leaf symbols, tagged by semantics.

    notes lists node paths where a value had to be embedded as a compile-time
    constant (deadline SLIs; correlation structure spanning operators).
    """

    root: SymNode
    mode: str
    notes: tuple[str, ...] = ()

    def evaluate(self, values: Mapping[str, float]) -> float:
        return _eval_sym(self.root, values, {})

    def to_text(self) -> str:
        return _render_text(self.root)

    @property
    def is_constant(self) -> bool:
        return self.root.op == "const"


def _expand_quorum(k: int, atoms) -> SymNode:
    """Multilinear polynomial for Pr[>= k of n succeed] over child atoms.

    Exact integer coefficients from a subset dynamic program; terms emitted
    in (degree, subset) order, positives and negatives grouped.
    """
    atoms = list(atoms)
    n = len(atoms)
    if n > QUORUM_EXPANSION_LIMIT:
        raise ResourceLimitError(
            f"quorum polynomial expansion over {n} children exceeds the "
            f"cap of {QUORUM_EXPANSION_LIMIT}")
    table: dict[tuple[int, int], int] = {(0, 0): 1}
    for i in range(n):
        grown: dict[tuple[int, int], int] = {}
        for (mask, j), c in table.items():
            for key, inc in (((mask, j), c), ((mask | 1 << i, j), -c),
                             ((mask | 1 << i, j + 1), c)):
                grown[key] = grown.get(key, 0) + inc
        table = grown
    coeff: dict[int, int] = {}
    for (mask, j), c in table.items():
        if j >= k:
            coeff[mask] = coeff.get(mask, 0) + c

    pos, neg = [], []
    for mask in sorted(coeff, key=lambda m: (bin(m).count("1"), m)):
        c = coeff[mask]
        if c == 0:
            continue
        members = [atoms[i] for i in range(n) if mask >> i & 1]
        factors = ([] if abs(c) == 1 else [_const(abs(c))]) + members
        term = _mul(*factors) if factors else _const(abs(c))
        (pos if c > 0 else neg).append(term)
    if not pos and not neg:
        return _const(0.0)
    if not neg:
        return _add(*pos)
    if not pos:
        return _sub(_const(0.0), _add(*neg))
    return _sub(_add(*pos), _add(*neg))


def _q_const(q_values, path: str, side: str, notes: list[str]) -> float:
    entry = q_values.get(path) if q_values else None
    if entry is None:
        raise ValueError(f"missing deadline SLI for Timeout node at {path}")
    notes.append(f"{path}: deadline SLI embedded as compile-time constant")
    return entry.lo if side == "lo" else entry.hi


def _build_independent(node: JourneyExpr, path: str, pick: str, model,
                       q_values, notes: list[str],
                       child_override=None) -> SymNode:
    """Structural form mirroring the independence evaluator.

    child_override(optional) intercepts (path, index) -> SymNode | "skip" so
    the pessimistic builder can substitute collapsed domain groups.
    """
    def build_children(kids):
        out = []
        for i, child in enumerate(kids):
            sub = child_override(path, i) if child_override else None
            if sub == "skip":
                continue
            out.append(sub if sub is not None else _build_independent(
                child, f"{path}.{i}", pick, model, q_values, notes,
                child_override))
        return out

    if isinstance(node, Leaf):
        return _sym(node.name)
    if isinstance(node, (Series, Parallel)):
        return _mul(*build_children(children_of(node)))
    if isinstance(node, Race):
        misses = [_sub(_ONE, c) for c in build_children(children_of(node))]
        return _sub(_ONE, _mul(*misses))
    if isinstance(node, KofN):
        return _expand_quorum(node.k, build_children(children_of(node)))
    if isinstance(node, Cond):
        est = _prob_estimate(model, node.p)
        if est.lo_value == est.hi_value:
            p = est.value
        else:
            if model is None:
                raise ValueError("interval branch probabilities require an evidence model")
            side = "hi" if pick == "max" else "lo"
            v_true = _numeric(node.if_true, f"{path}.0", pick, side, model, q_values)
            v_false = _numeric(node.if_false, f"{path}.1", pick, side, model, q_values)
            p = _pick_prob(est, v_true, v_false, pick)
        t_node, f_node = build_children(children_of(node))
        return _add(_mul(_const(p), t_node), _mul(_const(1.0 - p), f_node))
    if isinstance(node, Timeout):
        side = "hi" if pick == "max" else "lo"
        q = _q_const(q_values, path, side, notes)
        body, fallback = build_children(children_of(node))
        del body  # folded into the constant q
        return _add(_const(q), _mul(_const(1.0 - q), fallback))
    raise TypeError(f"not a journey expression node: {node!r}")


def _numeric(node, path, pick, side, model, q_values) -> float:
    return _eval_tree(node, path, model, q_values or {}, {}, pick, side)


def _group_node(kind: str, members) -> SymNode:
    syms = [_sym(m) for m in sorted(members)]
    return _min(*syms) if kind == "min" else _max(*syms)


def _pure_collapsed(expr, eff, conjunctive: bool) -> SymNode:
    """Whole-tree collapse for operator-pure trees.

    Conjunctive (Series/Parallel only): product over domains of the member
    minimum. Disjunctive (Race only): complement-product over domains of the
    member maximum.
    """
    names = leaf_names(expr)
    grouped: set[str] = set()
    factors: list[SymNode] = []
    kind = "min" if conjunctive else "max"
    for dname, members in sorted(eff.items()):
        factors.append(_group_node(kind, members) if len(members) > 1
                       else _sym(next(iter(members))))
        grouped.update(members)
    for leaf in names:
        if leaf not in grouped:
            factors.append(_sym(leaf))
    if conjunctive:
        return _mul(*factors)
    return _sub(_ONE, _mul(*[_sub(_ONE, f) for f in factors]))


def _lca_path(paths: list[str]) -> str:
    split = [p.split(".") for p in paths]
    prefix = split[0]
    for parts in split[1:]:
        n = 0
        while n < min(len(prefix), len(parts)) and prefix[n] == parts[n]:
            n += 1
        prefix = prefix[:n]
    return ".".join(prefix)


def _build_pessimistic(expr: JourneyExpr, model, domains, q_values,
                       notes: list[str]) -> SymNode:
    eff = effective_domains(expr, domains)
    multi = {d: members for d, members in eff.items() if len(members) > 1}
    if not multi:
        return _build_independent(expr, "root", "min", model, q_values, notes)

    ops = {type(n) for _, n in walk(expr) if not isinstance(n, Leaf)}
    if ops and ops <= {Series, Parallel}:
        return _pure_collapsed(expr, eff, conjunctive=True)
    if ops == {Race}:
        return _pure_collapsed(expr, eff, conjunctive=False)

    nodes = dict(walk(expr))
    leaf_paths = {n.name: p for p, n in nodes.items() if isinstance(n, Leaf)}
    correlated = {m for members in multi.values() for m in members}

    # Domains whose members are all direct leaf children of one Series/
    # Parallel/Race node collapse to a min/max group there; any other
    # cross-operator correlation folds the enclosing subtree to a constant.
    collapse: dict[str, list[tuple[str, str, list[int]]]] = {}
    folds: set[str] = set()
    for dname, members in sorted(multi.items()):
        paths = [leaf_paths[m] for m in sorted(members)]
        join = _lca_path(paths)
        parent = nodes[join]
        direct = all(p.rsplit(".", 1)[0] == join for p in paths)
        if direct and isinstance(parent, (Series, Parallel, Race)):
            kind = "max" if isinstance(parent, Race) else "min"
            idxs = sorted(int(p.rsplit(".", 1)[1]) for p in paths)
            collapse.setdefault(join, []).append((dname, kind, idxs))
        else:
            folds.add(join)

    # Deadline CDFs and interval branch splits vary with the success pattern;
    # no single expression covers that, so fold those subtrees too.
    for path, node in nodes.items():
        if isinstance(node, Timeout):
            if set(leaf_names(node.body)) & correlated:
                folds.add(path)
        elif isinstance(node, Cond) and set(leaf_names(node)) & correlated:
            est = _prob_estimate(model, node.p)
            if est.lo_value != est.hi_value:
                folds.add(path)

    outer = {f for f in folds
             if not any(f != g and f.startswith(g + ".") for g in folds)}

    group_at: dict[tuple[str, int], SymNode] = {}
    skip_at: set[tuple[str, int]] = set()
    for join, groups in collapse.items():
        if any(join == f or join.startswith(f + ".") for f in outer):
            continue  # consumed by an enclosing constant fold
        for dname, kind, idxs in groups:
            members = sorted(multi[dname])
            group_at[(join, idxs[0])] = _group_node(kind, members)
            skip_at.update((join, i) for i in idxs[1:])

    def child_override(path: str, index: int):
        child_path = f"{path}.{index}"
        if child_path in outer:
            value = eval_pessimistic(nodes[child_path], model, domains,
                                     q_values, path=child_path)
            notes.append(f"{child_path}: availability embedded as compile-time "
                         "constant (correlated members span operators)")
            return _const(value)
        if (path, index) in skip_at:
            return "skip"
        return group_at.get((path, index))

    if "root" in outer:
        value = eval_pessimistic(expr, model, domains, q_values)
        notes.append("root: availability embedded as compile-time constant "
                     "(correlated members span operators)")
        return _const(value)
    return _build_independent(expr, "root", "min", model, q_values, notes,
                              child_override)


def symbolic_availability(expr: JourneyExpr,
                          domains: Mapping[str, frozenset] | None = None,
                          mode: str = "pessimistic", *,
                          model: EvidenceModel | None = None,
                          q_values: Mapping[str, "TimeoutQ"] | None = None
                          ) -> SymbolicExpr:
    """Expression over leaf symbols mirroring the chosen numeric evaluator.

    Optimistic mode is fully structural (products, complements, expanded
    quorum polynomials). Pessimistic mode collapses within-domain redundancy
    to min/max where the members share one Series/Parallel/Race parent and
    otherwise embeds the enumerated value as a constant, noted per node.
    Evaluating the result at the model's numeric leaf availabilities
    reproduces the corresponding evaluator within 1e-12.
    """
    notes: list[str] = []
    if domains is None:
        domains = model.domains if model is not None else {}
    if model is not None:
        q_values = _ensure_q(expr, model, domains, q_values)
    if mode == "optimistic":
        root = _build_independent(expr, "root", "max", model, q_values, notes)
    elif mode == "pessimistic":
        root = _build_pessimistic(expr, model, domains, q_values, notes)
    else:
        raise ValueError(f"unknown symbolic mode {mode!r}")
    return SymbolicExpr(root, mode, tuple(notes))
