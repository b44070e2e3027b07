"""Journey model: operator AST, evidence bindings, objectives, policy, domains.

The journey expression is a tree of reliability operators over named leaves
(atomic components). Everything downstream — availability bounds, latency
composition, simulation, artifact emission — consumes these types. All types
are immutable after construction and safe to share across threads.

Tree addressing: every node has a dotted path ("root", "root.0", "root.2.1"),
with child order Series/Parallel/Race/KofN = declaration order, Cond =
(if_true, if_false), Timeout = (body, fallback). Diagnostics and derivation
traces use these paths.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterator, Mapping, Optional, Union

from .diagnostics import Diagnostic

# Configured structural limits (validate_spec accepts overrides).
DEFAULT_MAX_DEPTH = 16
DEFAULT_MAX_LEAVES = 20


# ---------------------------------------------------------------------------
# Expression AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbRef:
    """A branch probability: literal in [0,1] or a named model reference."""

    value: float | None = None
    name: str | None = None

    def __post_init__(self):
        if (self.value is None) == (self.name is None):
            raise ValueError("ProbRef needs exactly one of value, name")
        if self.value is not None and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"branch probability {self.value} outside [0, 1]")

    @property
    def is_literal(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class Leaf:
    name: str


@dataclass(frozen=True)
class Series:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 1:
            raise ValueError("Series needs children")


@dataclass(frozen=True)
class Parallel:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 1:
            raise ValueError("Parallel needs children")


@dataclass(frozen=True)
class Cond:
    p: ProbRef
    if_true: "JourneyExpr"
    if_false: "JourneyExpr"


@dataclass(frozen=True)
class Race:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 1:
            raise ValueError("Race needs children")


@dataclass(frozen=True)
class KofN:
    k: int
    children: tuple

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("KofN quorum k must be >= 1")
        if len(self.children) < 1:
            raise ValueError("KofN needs children")


@dataclass(frozen=True)
class Timeout:
    t_ms: int
    body: "JourneyExpr"
    fallback: "JourneyExpr"

    def __post_init__(self):
        if self.t_ms <= 0:
            raise ValueError("Timeout deadline must be positive")


JourneyExpr = Union[Leaf, Series, Parallel, Cond, Race, KofN, Timeout]

_MULTI = (Series, Parallel, Race, KofN)


def children_of(expr: JourneyExpr) -> tuple:
    if isinstance(expr, _MULTI):
        return expr.children
    if isinstance(expr, Cond):
        return (expr.if_true, expr.if_false)
    if isinstance(expr, Timeout):
        return (expr.body, expr.fallback)
    return ()


def operator_name(expr: JourneyExpr) -> str:
    return type(expr).__name__


def walk(expr: JourneyExpr, path: str = "root") -> Iterator[tuple[str, JourneyExpr]]:
    """Depth-first pre-order traversal yielding (path, node)."""
    yield path, expr
    for i, child in enumerate(children_of(expr)):
        yield from walk(child, f"{path}.{i}")


def leaf_names(expr: JourneyExpr) -> list[str]:
    """Leaf names in traversal order (duplicates preserved for validation)."""
    return [n.name for _, n in walk(expr) if isinstance(n, Leaf)]


def tree_depth(expr: JourneyExpr) -> int:
    kids = children_of(expr)
    return 1 + (max(tree_depth(c) for c in kids) if kids else 0)


def prob_ref_names(expr: JourneyExpr) -> list[str]:
    return [
        n.p.name
        for _, n in walk(expr)
        if isinstance(n, Cond) and not n.p.is_literal
    ]


# ---------------------------------------------------------------------------
# Evidence
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AvailabilityEvidence:
    """Either a point success probability or good/total counts over a window."""

    point: float | None = None
    good: int | None = None
    total: int | None = None
    window: str | None = None

    def __post_init__(self):
        counts = self.good is not None and self.total is not None
        if counts == (self.point is not None):
            raise ValueError("availability evidence is point xor counts")
        if self.point is not None and not 0.0 <= self.point <= 1.0:
            raise ValueError("point availability outside [0, 1]")
        if counts:
            if self.total <= 0:
                raise ValueError("total must be positive")
            if not 0 <= self.good <= self.total:
                raise ValueError("good must satisfy 0 <= good <= total")

    @property
    def value(self) -> float:
        if self.point is not None:
            return self.point
        return self.good / self.total


@dataclass(frozen=True)
class LatencyEvidence:
    """Cumulative histogram: (upper_edge_ms, cumulative_count) per bucket."""

    buckets: tuple  # of (float upper_edge_ms, int cumulative_count)
    samples: int
    window: str | None = None

    def __post_init__(self):
        if not self.buckets:
            raise ValueError("latency evidence needs at least one bucket")
        if self.samples <= 0:
            raise ValueError("samples must be positive")
        prev_edge, prev_count = None, 0
        for edge, count in self.buckets:
            if edge <= 0:
                raise ValueError("bucket upper edges must be positive")
            if prev_edge is not None and edge <= prev_edge:
                raise ValueError("bucket upper edges must be strictly increasing")
            if count < prev_count:
                raise ValueError("cumulative counts must be nondecreasing")
            prev_edge, prev_count = edge, count
        if self.buckets[-1][1] != self.samples:
            raise ValueError("final cumulative count must equal samples")


@dataclass(frozen=True)
class ProbEstimate:
    """Branch probability evidence with optional interval and sample count."""

    value: float
    lo: float | None = None
    hi: float | None = None
    samples: int | None = None

    def __post_init__(self):
        for v in (self.value, self.lo, self.hi):
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if self.lo is not None and self.lo > self.value:
            raise ValueError("lo must not exceed value")
        if self.hi is not None and self.hi < self.value:
            raise ValueError("hi must not be below value")
        if self.samples is not None and self.samples <= 0:
            raise ValueError("samples must be positive")

    @property
    def lo_value(self) -> float:
        return self.value if self.lo is None else self.lo

    @property
    def hi_value(self) -> float:
        return self.value if self.hi is None else self.hi


@dataclass(frozen=True)
class LeafEvidence:
    availability: AvailabilityEvidence
    latency: LatencyEvidence
    sli_query: str | None = None  # runtime SLI query snippet, optional


# DomainMap: domain-name -> frozenset of leaf names. Leaves absent from all
# sets are implicit singleton domains.
DomainMap = Mapping[str, frozenset]


@dataclass(frozen=True)
class EvidenceModel:
    leaves: Mapping[str, LeafEvidence]
    branch_probs: Mapping[str, ProbEstimate] = field(default_factory=dict)
    domains: Mapping[str, frozenset] = field(default_factory=dict)
    provenance: Mapping[str, str] = field(default_factory=dict)
    confidence: Mapping[str, float] = field(default_factory=dict)

    def availability_of(self, leaf: str) -> float:
        return self.leaves[leaf].availability.value

    def leaf_availabilities(self) -> dict[str, float]:
        return {name: ev.availability.value for name, ev in self.leaves.items()}


# ---------------------------------------------------------------------------
# Objective and policy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Objective:
    """At least one of availability/latency targets is required by validation.

    Percentages are converted with exact decimal arithmetic so that the error
    budget (1 - target) reprints without representation drift: 99.9 -> budget
    exactly 0.001.
    """

    availability_percent: float | None = None
    availability_target: float | None = None  # fraction, derived
    availability_budget: float | None = None  # 1 - target, derived
    latency_percentile: float | None = None
    latency_threshold_ms: float | None = None

    @staticmethod
    def build(availability_percent=None, latency_percentile=None,
              latency_threshold_ms=None) -> "Objective":
        target = budget = None
        if availability_percent is not None:
            pct = Decimal(str(availability_percent))
            if not 0 <= pct <= 100:
                raise ValueError("availability percentage outside [0, 100]")
            target = float(pct / 100)
            budget = float(1 - pct / 100)
        if latency_percentile is not None:
            if not 0.0 < latency_percentile < 1.0:
                raise ValueError("latency percentile must lie in (0, 1)")
            if latency_threshold_ms is None or latency_threshold_ms <= 0:
                raise ValueError("latency threshold must be positive")
        return Objective(
            availability_percent=(
                None if availability_percent is None else float(availability_percent)
            ),
            availability_target=target,
            availability_budget=budget,
            latency_percentile=latency_percentile,
            latency_threshold_ms=latency_threshold_ms,
        )

    @property
    def empty(self) -> bool:
        return self.availability_target is None and self.latency_percentile is None


@dataclass(frozen=True)
class BurnRatePolicyRow:
    long_window_ms: int
    short_window_ms: int
    factor: float
    severity: str

    def __post_init__(self):
        if self.factor <= 0:
            raise ValueError("burn factor must be positive")
        if self.short_window_ms <= 0 or self.long_window_ms <= 0:
            raise ValueError("windows must be positive durations")
        if self.short_window_ms >= self.long_window_ms:
            raise ValueError("short window must be shorter than long window")


@dataclass(frozen=True)
class CanaryPolicy:
    short_window_ms: int
    long_window_ms: int
    interval_ms: int
    max_failures: int

    def __post_init__(self):
        if self.short_window_ms <= 0 or self.long_window_ms <= 0 or self.interval_ms <= 0:
            raise ValueError("canary windows must be positive durations")
        if self.short_window_ms >= self.long_window_ms:
            raise ValueError("canary short window must be shorter than long window")
        if self.max_failures < 0:
            raise ValueError("max_failures must be nonnegative")


# Multi-window multi-burn-rate defaults: fast pages, slow tickets.
DEFAULT_BURN_ROWS = (
    BurnRatePolicyRow(3_600_000, 300_000, 14.4, "page"),       # 1h / 5m
    BurnRatePolicyRow(21_600_000, 1_800_000, 6.0, "page"),     # 6h / 30m
    BurnRatePolicyRow(259_200_000, 21_600_000, 1.0, "ticket"), # 3d / 6h
)
DEFAULT_CANARY = CanaryPolicy(300_000, 3_600_000, 60_000, 1)   # 5m / 1h @ 1m


@dataclass(frozen=True)
class GovernancePolicy:
    burn_windows: tuple = DEFAULT_BURN_ROWS
    canary: CanaryPolicy = DEFAULT_CANARY
    bound_mode: str = "pessimistic"
    dkw_delta: float = 0.05

    def __post_init__(self):
        if self.bound_mode not in ("pessimistic", "optimistic"):
            raise ValueError(f"unknown bound mode {self.bound_mode!r}")
        if not 0.0 < self.dkw_delta < 1.0:
            raise ValueError("dkw_delta must lie in (0, 1)")


@dataclass(frozen=True)
class JourneySpec:
    name: str
    expression: JourneyExpr
    objective: Objective
    policy: GovernancePolicy = GovernancePolicy()
    domains: Mapping[str, frozenset] = field(default_factory=dict)
    latency_query: str | None = None  # end-to-end latency SLI snippet, optional


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _domain_diagnostics(domains: DomainMap, prefix: str) -> list[Diagnostic]:
    diags = []
    seen: dict[str, str] = {}
    for dom in sorted(domains):
        for leaf in sorted(domains[dom]):
            if leaf in seen:
                diags.append(Diagnostic(
                    "error", "DomainOverlap",
                    f"leaf {leaf!r} appears in domains {seen[leaf]!r} and {dom!r}",
                    path=f"{prefix}.{dom}"))
            else:
                seen[leaf] = dom
    return diags


def validate_spec(spec: JourneySpec, model: EvidenceModel | None = None, *,
                  max_depth: int = DEFAULT_MAX_DEPTH,
                  max_leaves: int = DEFAULT_MAX_LEAVES) -> list[Diagnostic]:
    """Structural and binding validation.

    Returns one diagnostic per violation, ordered by node path. With
    model=None only spec-side structure is checked (CLI `validate` without
    --model).
    """
    diags: list[Diagnostic] = []
    expr = spec.expression

    seen_leaves: set[str] = set()
    for path, node in walk(expr):
        if isinstance(node, _MULTI) and len(node.children) < 2:
            diags.append(Diagnostic(
                "error", "ChildCount",
                f"{operator_name(node)} needs at least 2 children", path=path))
        if isinstance(node, KofN) and node.k > len(node.children):
            diags.append(Diagnostic(
                "error", "KExceedsN",
                f"quorum k={node.k} exceeds n={len(node.children)} children",
                path=path))
        if isinstance(node, Leaf):
            if node.name in seen_leaves:
                diags.append(Diagnostic(
                    "error", "DuplicateLeaf",
                    f"leaf {node.name!r} referenced more than once "
                    "(use distinct leaves in a shared failure domain instead)",
                    path=path))
            seen_leaves.add(node.name)

    depth = tree_depth(expr)
    if depth > max_depth:
        diags.append(Diagnostic(
            "error", "DepthLimit",
            f"tree depth {depth} exceeds limit {max_depth}", path="root"))
    n_leaves = len(set(leaf_names(expr)))
    if n_leaves > max_leaves:
        diags.append(Diagnostic(
            "error", "LeafLimit",
            f"{n_leaves} leaves exceed limit {max_leaves}", path="root"))

    if spec.objective.empty:
        diags.append(Diagnostic(
            "error", "NoObjective",
            "objective needs an availability or latency target", path="root"))

    diags.extend(_domain_diagnostics(spec.domains, "domains"))
    tree_leaves = set(leaf_names(expr))
    for dom in sorted(spec.domains):
        for leaf in sorted(spec.domains[dom]):
            if leaf not in tree_leaves:
                diags.append(Diagnostic(
                    "warning", "DomainUnknownLeaf",
                    f"domain {dom!r} names leaf {leaf!r} not present in the tree",
                    path=f"domains.{dom}"))

    if model is not None:
        needs_latency = spec.objective.latency_percentile is not None or any(
            isinstance(n, Timeout) for _, n in walk(expr))
        for path, node in walk(expr):
            if isinstance(node, Leaf) and node.name not in model.leaves:
                diags.append(Diagnostic(
                    "error", "UnboundLeaf",
                    f"leaf {node.name!r} has no evidence binding", path=path))
            elif isinstance(node, Leaf) and needs_latency \
                    and model.leaves[node.name].latency is None:
                diags.append(Diagnostic(
                    "error", "MissingLatency",
                    f"leaf {node.name!r} has no latency histogram but the "
                    "journey has a latency objective or deadline", path=path))
            if isinstance(node, Cond) and not node.p.is_literal:
                if node.p.name not in model.branch_probs:
                    diags.append(Diagnostic(
                        "error", "UnboundProb",
                        f"branch probability {node.p.name!r} is not in the model",
                        path=path))
        diags.extend(_domain_diagnostics(model.domains, "model.domains"))

    return sorted(diags, key=lambda d: (d.path or "", d.code))


# ---------------------------------------------------------------------------
# Domain merging
# ---------------------------------------------------------------------------

def merge_domains(spec_domains: DomainMap, model_domains: DomainMap) -> dict[str, frozenset]:
    """Union-of-groupings merge: the most-correlated assignment wins.

    Any two leaves grouped together by either input end up grouped together
    (transitive closure). Merged groups are named by joining their
    constituent group names with "+" (sorted); untouched groups keep their
    names. Commutative, associative, idempotent.
    """
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str):
        ra, rb = find(a), find(b)
        if ra != rb:
            # deterministic root choice
            lo, hi = sorted((ra, rb))
            parent[hi] = lo

    names: dict[str, set[str]] = {}
    for domains in (spec_domains, model_domains):
        for dom in sorted(domains):
            members = sorted(domains[dom])
            for leaf in members:
                parent.setdefault(leaf, leaf)
                names.setdefault(leaf, set())
                # composite names flatten so merging stays associative
                names[leaf].update(dom.split("+"))
            for leaf in members[1:]:
                union(members[0], leaf)

    groups: dict[str, set[str]] = {}
    group_names: dict[str, set[str]] = {}
    for leaf in parent:
        root = find(leaf)
        groups.setdefault(root, set()).add(leaf)
        group_names.setdefault(root, set()).update(names[leaf])

    merged: dict[str, frozenset] = {}
    for root in sorted(groups):
        name = "+".join(sorted(group_names[root]))
        if name in merged:  # distinct groups sharing a name: disambiguate
            suffix = 2
            while f"{name}~{suffix}" in merged:
                suffix += 1
            name = f"{name}~{suffix}"
        merged[name] = frozenset(groups[root])
    return merged


def effective_domains(expr: JourneyExpr, domains: DomainMap) -> dict[str, frozenset]:
    """Restrict a domain map to leaves present in the tree, dropping empties."""
    present = set(leaf_names(expr))
    out = {}
    for dom in sorted(domains):
        members = frozenset(m for m in domains[dom] if m in present)
        if members:
            out[dom] = members
    return out
