"""Derivation trace: one record per AST node, journey verdict, provenance.

The trace is the single computation pass everything downstream reads from.
It composes latency in both histogram modes, evaluates the availability
interval and sensitivity ranking, and stores per-node records carrying the
computed bounds, the assumptions behind them, the evidence windows and
sample counts consumed, and approximation flags. The journey verdict
compares the pessimistic availability endpoint and the conservative-upper
latency quantile against the objective; artifact emitters later register
their outputs in `backlinks` so every generated rule resolves back to the
node paths it derived from.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from . import latency
from .availability import (
    AvailabilityInterval, SensitivityReport, SymbolicExpr,
    availability_interval, sensitivity, symbolic_availability,
)
from .diagnostics import DocumentError, has_errors
from .latency import DiscreteDist, QuantileResult, TimeoutQ
from .model import (
    Cond, EvidenceModel, JourneySpec, KofN, Leaf, Timeout, children_of,
    leaf_names, merge_domains, operator_name, validate_spec, walk,
)
from .units import fmt_float, round_float

DEFAULT_PERCENTILE = 0.99


@dataclass(frozen=True)
class NodeRecord:
    path: str
    operator: str
    leaf: str | None
    interval: AvailabilityInterval
    quantile: QuantileResult | None
    assumptions: tuple[str, ...]
    windows: tuple[str, ...]
    samples: int | None
    flags: tuple[str, ...]

    def to_doc(self) -> dict:
        doc = {
            "path": self.path,
            "operator": self.operator,
            "interval": {
                "lo": round_float(self.interval.lo),
                "hi": round_float(self.interval.hi),
                "loAssumption": self.interval.lo_assumption,
                "hiAssumption": self.interval.hi_assumption,
            },
            "latency": None if self.quantile is None else {
                "percentile": self.quantile.percentile,
                "point": round_float(self.quantile.point),
                "upper": round_float(self.quantile.upper),
                "delta": self.quantile.delta,
                "effectiveSamples": self.quantile.effective_samples,
            },
            "assumptions": list(self.assumptions),
            "windows": list(self.windows),
            "samples": self.samples,
            "flags": list(self.flags),
        }
        if self.leaf is not None:
            doc["leaf"] = self.leaf
        if self.interval.prob_endpoints:
            doc["interval"]["probEndpoints"] = [
                {"name": n, "lower": round_float(lo), "upper": round_float(hi)}
                for n, lo, hi in self.interval.prob_endpoints
            ]
        return doc


@dataclass
class DerivationTrace:
    journey: str
    spec: JourneySpec
    model: EvidenceModel
    domains: dict[str, frozenset]
    interval: AvailabilityInterval
    quantile: QuantileResult | None
    percentile: float
    verdict: str
    verdict_reasons: tuple[str, ...]
    sensitivity: SensitivityReport
    records: dict[str, NodeRecord]
    q_values: dict[str, TimeoutQ]
    symbolic: SymbolicExpr
    conservative_dist: DiscreteDist | None
    point_dist: DiscreteDist | None
    flags: list[str] = field(default_factory=list)
    backlinks: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def dominant(self) -> str | None:
        return self.sensitivity.dominant

    def to_doc(self) -> dict:
        objective = {}
        obj = self.spec.objective
        if obj.availability_target is not None:
            objective["availabilityPercent"] = round_float(obj.availability_percent)
            objective["availabilityTarget"] = round_float(obj.availability_target)
            objective["errorBudget"] = round_float(obj.availability_budget)
        if obj.latency_percentile is not None:
            objective["latencyPercentile"] = round_float(obj.latency_percentile)
            objective["latencyThresholdMs"] = round_float(obj.latency_threshold_ms)
        return {
            "journey": self.journey,
            "objective": objective,
            "interval": {
                "lo": round_float(self.interval.lo),
                "hi": round_float(self.interval.hi),
                "loAssumption": self.interval.lo_assumption,
                "hiAssumption": self.interval.hi_assumption,
            },
            "latency": None if self.quantile is None else {
                "percentile": self.percentile,
                "point": round_float(self.quantile.point),
                "upper": round_float(self.quantile.upper),
                "delta": self.quantile.delta,
                "effectiveSamples": self.quantile.effective_samples,
            },
            "verdict": self.verdict,
            "verdictReasons": list(self.verdict_reasons),
            "sensitivity": {
                "boundMode": self.sensitivity.bound_mode,
                "dominant": self.sensitivity.dominant,
                "entries": [
                    {"name": e.name, "kind": e.kind,
                     "delta": round_float(e.delta), "rank": e.rank}
                    for e in self.sensitivity.entries
                ],
            },
            "domains": {d: sorted(m) for d, m in sorted(self.domains.items())},
            "timeoutQ": {
                path: {"tMs": q.t_ms, "lo": round_float(q.lo),
                       "hi": round_float(q.hi),
                       "cdfLo": round_float(q.cdf_lo),
                       "cdfHi": round_float(q.cdf_hi)}
                for path, q in sorted(self.q_values.items())
            },
            "symbolic": {
                "mode": self.symbolic.mode,
                "constant": self.symbolic.is_constant,
                "expression": self.symbolic.to_text(),
                "notes": list(self.symbolic.notes),
            },
            "records": [r.to_doc() for r in self.records.values()],
            "flags": list(self.flags),
            "backlinks": {k: list(v) for k, v in sorted(self.backlinks.items())},
        }

    def link(self, artifact_id: str, paths) -> str:
        if artifact_id in self.backlinks:
            raise ValueError(f"artifact id collision: {artifact_id}")
        self.backlinks[artifact_id] = tuple(paths)
        return artifact_id


def _leaf_windows(model: EvidenceModel, names) -> tuple[str, ...]:
    windows = set()
    for name in names:
        ev = model.leaves[name]
        if ev.availability.window:
            windows.add(ev.availability.window)
        if ev.latency is not None and ev.latency.window:
            windows.add(ev.latency.window)
    return tuple(sorted(windows))


def build_trace(spec: JourneySpec, model: EvidenceModel,
                domains: Mapping[str, frozenset] | None = None
                ) -> DerivationTrace:
    """Compute bounds for every node and the journey-level verdict."""
    diags = validate_spec(spec, model)
    if has_errors(diags):
        raise DocumentError(diags)

    expr = spec.expression
    if domains is None:
        domains = merge_domains(spec.domains, model.domains)
    else:
        domains = dict(domains)
    policy = spec.policy
    percentile = spec.objective.latency_percentile or DEFAULT_PERCENTILE

    q_values = latency.build_q_values(expr, model, domains)
    # availability-only worlds may omit latency histograms entirely
    has_latency = all(model.leaves[n].latency is not None
                      for n in set(leaf_names(expr)))
    pess = opt = None
    if has_latency:
        pess = latency.compose_detail(expr, model, latency.PESSIMISTIC,
                                      domains, q_values)
        opt = latency.compose_detail(expr, model, latency.OPTIMISTIC, domains,
                                     q_values)
    root_interval = availability_interval(expr, model, domains, q_values)
    sens = sensitivity(expr, model, domains, q_values,
                       bound_mode=policy.bound_mode)
    symbolic = symbolic_availability(expr, domains, "pessimistic",
                                     model=model, q_values=q_values)

    records: dict[str, NodeRecord] = {}
    for path, node in walk(expr):
        interval = (root_interval if path == "root" else
                    availability_interval(node, model, domains, q_values,
                                          path=path))
        dist = pess.node_dists[path] if pess is not None else None
        quantile = (latency.quantile(dist, percentile, policy.dkw_delta)
                    if dist is not None else None)
        assumptions = [f"lower bound: {interval.lo_assumption}",
                       f"upper bound: {interval.hi_assumption}",
                       "cross-leaf latency independence (both modes)"]
        flags = []
        if dist is not None and dist.capped:
            flags.append("latency-support-capped")
        if isinstance(node, Leaf):
            if model.leaves[node.name].sli_query is None:
                flags.append("no-query-snippet")
        elif isinstance(node, Timeout):
            q = q_values[path]
            assumptions.append(
                f"deadline SLI q in [{fmt_float(q.lo)}, {fmt_float(q.hi)}] "
                f"at t={q.t_ms}ms")
            flags.append("deadline-sli-embedded-constant")
        elif isinstance(node, Cond) and not node.p.is_literal:
            assumptions.append(
                f"branch probability {node.p.name!r} taken at interval endpoints")
        elif isinstance(node, KofN) and opt is not None:
            child_avail = [opt.node_avail[f"{path}.{i}"]
                           for i in range(len(children_of(node)))]
            if any(a < 1.0 for a in child_avail):
                flags.append("quorum-latency-conditioned-on-success")
        names = set(leaf_names(node))
        records[path] = NodeRecord(
            path=path,
            operator=operator_name(node),
            leaf=node.name if isinstance(node, Leaf) else None,
            interval=interval,
            quantile=quantile,
            assumptions=tuple(assumptions),
            windows=_leaf_windows(model, names),
            samples=dist.samples if dist is not None else None,
            flags=tuple(flags),
        )

    root_quantile = records["root"].quantile
    reasons = []
    passed = True
    obj = spec.objective
    if obj.availability_target is not None:
        ok = root_interval.lo >= obj.availability_target
        passed &= ok
        reasons.append(
            f"pessimistic availability {fmt_float(root_interval.lo)} "
            f"{'meets' if ok else 'misses'} target {fmt_float(obj.availability_target)}")
    if obj.latency_percentile is not None:
        ok = root_quantile.upper <= obj.latency_threshold_ms
        passed &= ok
        reasons.append(
            f"conservative-upper p{round(obj.latency_percentile * 100)} "
            f"{fmt_float(root_quantile.upper)}ms "
            f"{'meets' if ok else 'misses'} threshold "
            f"{fmt_float(obj.latency_threshold_ms)}ms")
    if obj.empty:
        reasons.append("no objective declared; nothing to gate")

    trace = DerivationTrace(
        journey=spec.name,
        spec=spec,
        model=model,
        domains=dict(domains),
        interval=root_interval,
        quantile=root_quantile,
        percentile=percentile,
        verdict="pass" if passed else "fail",
        verdict_reasons=tuple(reasons),
        sensitivity=sens,
        records=records,
        q_values=q_values,
        symbolic=symbolic,
        conservative_dist=pess.dist if pess is not None else None,
        point_dist=opt.dist if opt is not None else None,
    )
    trace.flags.extend(symbolic.notes)
    return trace
