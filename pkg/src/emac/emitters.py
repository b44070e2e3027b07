"""Governance artifact emitters and the what-if delta report.

Compiles a derivation trace into four deterministic documents:

* recording rules — the journey success-ratio SLI as a Prometheus rule
  tree over per-leaf SLI queries (pessimistic symbolic form), plus the
  journey error rate;
* alerting rules — one multi-window burn-rate alert per policy row, firing
  when the error rate over both windows exceeds factor x budget;
* rollout gate — an Argo-Rollouts-style AnalysisTemplate checking canary
  burn rates and the compiled latency upper bound;
* provenance — the full trace plus artifact backlinks.

Metric and rule ids follow `emac:<journey>:<artifact>:<qualifier>` and are
collision-checked per bundle. Every float renders at 12 significant digits
and documents carry no timestamps, so identical inputs compile to
byte-identical files.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Mapping

from .availability import SymNode
from .documents import EMAC_VERSION, dump_json, dump_yaml, write_atomic
from .model import EvidenceModel, JourneySpec, effective_domains
from .trace import DerivationTrace, build_trace
from .units import fmt_float, format_duration, round_float

_PROM_ADDRESS = "http://prometheus.monitoring.svc:9090"


def _metric_part(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", text)


def _dash_part(text: str) -> str:
    return re.sub(r"[^a-z0-9-]", "-", text.lower()).strip("-")


def _budget(spec: JourneySpec) -> Decimal:
    # exact decimal arithmetic: 99.9 -> 0.001, no float drift
    pct = Decimal(str(spec.objective.availability_percent))
    return 1 - pct / 100


def _dec_str(value: Decimal) -> str:
    text = format(value.normalize(), "f")
    return text if text else "0"


def _threshold_str(factor: float, budget: Decimal) -> str:
    return _dec_str(Decimal(str(factor)) * budget)


# ---------------------------------------------------------------------------
# Recording rules
# ---------------------------------------------------------------------------

def _leaf_metric(journey: str, leaf: str) -> str:
    return f"emac:{_metric_part(journey)}:leaf_sli:{_metric_part(leaf)}"


def _domain_metric(journey: str, domain: str) -> str:
    return f"emac:{_metric_part(journey)}:domain_sli:{_metric_part(domain)}"


def _collect_symbols(node: SymNode, syms: list[str], groups: list[SymNode]):
    if node.op == "sym":
        if node.name not in syms:
            syms.append(node.name)
    elif node.op in ("min", "max"):
        groups.append(node)
        for a in node.args:
            if a.op != "sym":
                raise ValueError("collapsed domain groups must hold leaf symbols")
    else:
        for a in node.args:
            _collect_symbols(a, syms, groups)


def _render_promql(node: SymNode, journey: str,
                   domain_of: Mapping[frozenset, str]) -> str:
    if node.op == "sym":
        return f"scalar({_leaf_metric(journey, node.name)})"
    if node.op == "const":
        return fmt_float(node.value)
    if node.op in ("min", "max"):
        members = frozenset(a.name for a in node.args)
        domain = domain_of.get(members)
        if domain is None:
            raise ValueError(f"no failure domain matches members {sorted(members)}")
        return f"scalar({node.op}({_domain_metric(journey, domain)}))"
    parts = [_render_promql(a, journey, domain_of) for a in node.args]
    if node.op == "add":
        return "(" + " + ".join(parts) + ")"
    if node.op == "sub":
        return f"({parts[0]} - {parts[1]})"
    if node.op == "mul":
        return "(" + " * ".join(parts) + ")"
    raise ValueError(f"unknown symbolic op {node.op!r}")


def emit_recording_rules(trace: DerivationTrace, spec: JourneySpec) -> dict:
    """Journey SLI and error-rate recording rules from the symbolic form."""
    journey = spec.name
    j = _metric_part(journey)
    model = trace.model
    leaf_paths = {r.leaf: r.path for r in trace.records.values()
                  if r.leaf is not None}

    syms: list[str] = []
    groups: list[SymNode] = []
    _collect_symbols(trace.symbolic.root, syms, groups)

    eff = effective_domains(spec.expression, trace.domains)
    domain_of = {members: name for name, members in eff.items()}

    rules = []
    for leaf in sorted(syms):
        snippet = model.leaves[leaf].sli_query
        if snippet is None:
            snippet = f"vector({fmt_float(model.availability_of(leaf))})"
            trace.flags.append(
                f"recording: leaf {leaf} has no query snippet; "
                "compile-time constant embedded")
        rule_id = trace.link(_leaf_metric(journey, leaf), (leaf_paths[leaf],))
        rules.append({
            "record": rule_id,
            "expr": snippet,
            "labels": {"journey": journey, "leaf": leaf},
        })

    emitted_domains = set()
    for group in groups:
        members = frozenset(a.name for a in group.args)
        domain = domain_of[members]
        if domain in emitted_domains:
            continue
        emitted_domains.add(domain)
        rule_id = trace.link(_domain_metric(journey, domain),
                             tuple(sorted(leaf_paths[m] for m in members)))
        for member in sorted(members):
            snippet = model.leaves[member].sli_query
            if snippet is None:
                snippet = f"vector({fmt_float(model.availability_of(member))})"
                trace.flags.append(
                    f"recording: leaf {member} has no query snippet; "
                    "compile-time constant embedded")
            rules.append({
                "record": rule_id,
                "expr": snippet,
                "labels": {"journey": journey, "domain": domain,
                           "member": member},
            })

    sli_expr = _render_promql(trace.symbolic.root, journey, domain_of)
    sli_id = trace.link(f"emac:{j}:journey_sli:pessimistic", ("root",))
    err_id = trace.link(f"emac:{j}:journey_error_rate:pessimistic", ("root",))
    if trace.symbolic.is_constant:
        trace.flags.append("recording: journey SLI is a compile-time constant")
    rules.append({
        "record": sli_id,
        "expr": f"vector({sli_expr})",
        "labels": {"journey": journey, "bound": "pessimistic"},
    })
    rules.append({
        "record": err_id,
        "expr": f"1 - {sli_id}",
        "labels": {"journey": journey, "bound": "pessimistic"},
    })
    return {
        "emacVersion": EMAC_VERSION,
        "groups": [{"name": f"emac-{_dash_part(journey)}-recording",
                    "rules": rules}],
    }


# ---------------------------------------------------------------------------
# Burn-rate alerts
# ---------------------------------------------------------------------------

def emit_burn_rate_alerts(trace: DerivationTrace, spec: JourneySpec) -> dict:
    journey = spec.name
    j = _metric_part(journey)
    if spec.objective.availability_target is None:
        trace.flags.append("alerting: no availability objective; no burn-rate alerts")
        return {"emacVersion": EMAC_VERSION, "groups": [],
                "warnings": ["no availability objective; nothing to alert on"]}

    budget = _budget(spec)
    error_metric = f"emac:{j}:journey_error_rate:pessimistic"
    rules = []
    for row in spec.policy.burn_windows:
        long_w = format_duration(row.long_window_ms)
        short_w = format_duration(row.short_window_ms)
        threshold = _threshold_str(row.factor, budget)
        alert_id = trace.link(f"emac:{j}:burn_alert:{long_w}", ("root",))
        rules.append({
            "alert": f"emac_{j}_burn_{long_w}",
            "expr": (f"(avg_over_time({error_metric}[{long_w}]) > {threshold})"
                     f" and "
                     f"(avg_over_time({error_metric}[{short_w}]) > {threshold})"),
            # both windows already damp flapping; no extra hold period
            "for": "0m",
            "labels": {"severity": row.severity, "journey": journey},
            "annotations": {
                "summary": (f"{journey}: error rate above {threshold} "
                            f"({fmt_float(row.factor)}x budget {_dec_str(budget)}) "
                            f"over {long_w} and {short_w}"),
                "artifactId": alert_id,
                "longWindow": long_w,
                "shortWindow": short_w,
            },
        })
    return {
        "emacVersion": EMAC_VERSION,
        "groups": [{"name": f"emac-{_dash_part(journey)}-burn-alerts",
                    "rules": rules}],
    }


# ---------------------------------------------------------------------------
# Rollout gate
# ---------------------------------------------------------------------------

def emit_rollout_gate(trace: DerivationTrace, spec: JourneySpec) -> dict:
    journey = spec.name
    j = _metric_part(journey)
    jd = _dash_part(journey)
    policy = spec.policy
    canary = policy.canary
    interval = format_duration(canary.interval_ms)
    metrics = []

    if spec.objective.availability_target is not None:
        budget = _budget(spec)
        factor = policy.burn_windows[0].factor if policy.burn_windows else 1.0
        threshold = _threshold_str(factor, budget)
        error_metric = f"emac:{j}:journey_error_rate:pessimistic"
        for qualifier, window_ms in (("burn_short", canary.short_window_ms),
                                     ("burn_long", canary.long_window_ms)):
            window = format_duration(window_ms)
            metric_id = trace.link(f"emac:{j}:gate_metric:{qualifier}", ("root",))
            metrics.append({
                "name": f"emac-{jd}-{qualifier.replace('_', '-')}",
                "interval": interval,
                "failureLimit": canary.max_failures,
                "successCondition": f"result[0] <= {threshold}",
                "provider": {"prometheus": {
                    "address": _PROM_ADDRESS,
                    "query": f"avg_over_time({error_metric}[{window}])",
                }},
                "annotations": {"artifactId": metric_id},
            })

    if spec.objective.latency_percentile is not None:
        upper = trace.quantile.upper
        threshold_ms = spec.objective.latency_threshold_ms
        if spec.latency_query is not None:
            metric_id = trace.link(f"emac:{j}:gate_metric:latency", ("root",))
            metrics.append({
                "name": f"emac-{jd}-latency",
                "interval": interval,
                "failureLimit": canary.max_failures,
                "successCondition": f"result[0] <= {fmt_float(upper)}",
                "provider": {"prometheus": {
                    "address": _PROM_ADDRESS,
                    "query": spec.latency_query,
                }},
                "annotations": {"artifactId": metric_id},
            })
        else:
            # no runtime latency SLI: embed the compiled bound, advisory only
            metric_id = trace.link(f"emac:{j}:gate_metric:latency_advisory",
                                   ("root",))
            trace.flags.append(
                "gate: latency check advisory; no end-to-end latency query")
            metrics.append({
                "name": f"emac-{jd}-latency-advisory",
                "interval": interval,
                "failureLimit": canary.max_failures,
                "successCondition": f"result[0] <= {fmt_float(threshold_ms)}",
                "provider": {"prometheus": {
                    "address": _PROM_ADDRESS,
                    "query": f"vector({fmt_float(upper)})",
                }},
                "annotations": {"artifactId": metric_id},
            })

    return {
        "emacVersion": EMAC_VERSION,
        "apiVersion": "argoproj.io/v1alpha1",
        "kind": "AnalysisTemplate",
        "metadata": {"name": f"emac-{jd}-gate"},
        "spec": {"metrics": metrics},
    }


# ---------------------------------------------------------------------------
# Provenance and bundle assembly
# ---------------------------------------------------------------------------

def emit_provenance(trace: DerivationTrace, spec: JourneySpec,
                    artifacts: list[dict]) -> dict:
    return {
        "emacVersion": EMAC_VERSION,
        "journey": spec.name,
        "verdict": trace.verdict,
        "verdictReasons": list(trace.verdict_reasons),
        "dominantContributor": trace.dominant,
        "artifacts": artifacts,
        "evidence": {
            "provenance": dict(sorted(trace.model.provenance.items())),
            "confidence": {k: round_float(v) for k, v in
                           sorted(trace.model.confidence.items())},
        },
        "trace": trace.to_doc(),
    }


def _rule_ids(doc: dict, kind: str, file_name: str) -> list[dict]:
    out = []
    for group in doc.get("groups", []):
        for rule in group["rules"]:
            name = rule.get("record") or rule.get("alert")
            rule_id = (rule.get("record")
                       or rule.get("annotations", {}).get("artifactId"))
            out.append({"id": rule_id, "kind": kind, "name": name,
                        "file": file_name})
    for metric in doc.get("spec", {}).get("metrics", []):
        out.append({"id": metric["annotations"]["artifactId"], "kind": kind,
                    "name": metric["name"], "file": file_name})
    return out


RECORDING_FILE = "recording_rules.yaml"
ALERTING_FILE = "alerting_rules.yaml"
GATE_FILE = "rollout_gate.yaml"
PROVENANCE_FILE = "provenance.json"


@dataclass
class CompilationBundle:
    recording: dict
    alerting: dict
    gate: dict
    provenance: dict
    trace: DerivationTrace

    def files(self) -> dict[str, str]:
        return {
            RECORDING_FILE: dump_yaml(self.recording),
            ALERTING_FILE: dump_yaml(self.alerting),
            GATE_FILE: dump_yaml(self.gate),
            PROVENANCE_FILE: dump_json(self.provenance),
        }


def compile_bundle(spec: JourneySpec, model: EvidenceModel, *,
                   domains: Mapping[str, frozenset] | None = None
                   ) -> CompilationBundle:
    """Full pipeline: trace plus the four governance documents."""
    trace = build_trace(spec, model, domains)
    recording = emit_recording_rules(trace, spec)
    alerting = emit_burn_rate_alerts(trace, spec)
    gate = emit_rollout_gate(trace, spec)
    artifacts = (_rule_ids(recording, "recording-rule", RECORDING_FILE)
                 + _rule_ids(alerting, "alert-rule", ALERTING_FILE)
                 + _rule_ids(gate, "gate-metric", GATE_FILE))
    seen = set()
    artifacts = [a for a in artifacts
                 if not (a["id"] in seen or seen.add(a["id"]))]
    provenance = emit_provenance(trace, spec, artifacts)
    return CompilationBundle(recording, alerting, gate, provenance, trace)


def write_bundle(bundle: CompilationBundle, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, content in bundle.files().items():
        path = out / name
        write_atomic(path, content)
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# What-if comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WhatIfReport:
    before: DerivationTrace
    after: DerivationTrace

    def to_doc(self) -> dict:
        a, b = self.before, self.after

        def pair(x: float, y: float) -> dict:
            return {"before": round_float(x), "after": round_float(y),
                    "delta": round_float(y - x)}

        ranks_a = {(e.kind, e.name): e.rank for e in a.sensitivity.entries}
        ranks_b = {(e.kind, e.name): e.rank for e in b.sensitivity.entries}
        rank_changes = []
        for key in sorted(set(ranks_a) | set(ranks_b)):
            ra, rb = ranks_a.get(key), ranks_b.get(key)
            if ra != rb:
                rank_changes.append({"kind": key[0], "name": key[1],
                                     "before": ra, "after": rb})

        timeout_q = {}
        for path in sorted(set(a.q_values) | set(b.q_values)):
            qa, qb = a.q_values.get(path), b.q_values.get(path)
            if qa is None or qb is None:
                timeout_q[path] = {"note": "present on one side only"}
            else:
                timeout_q[path] = {"lo": pair(qa.lo, qb.lo),
                                   "hi": pair(qa.hi, qb.hi)}

        return {
            "emacVersion": EMAC_VERSION,
            "journeys": {"before": a.journey, "after": b.journey},
            "availability": {
                "lo": pair(a.interval.lo, b.interval.lo),
                "hi": pair(a.interval.hi, b.interval.hi),
            },
            "latency": None if a.quantile is None or b.quantile is None else {
                "percentile": a.percentile,
                "point": pair(a.quantile.point, b.quantile.point),
                "upper": pair(a.quantile.upper, b.quantile.upper),
            },
            "verdict": {"before": a.verdict, "after": b.verdict,
                        "changed": a.verdict != b.verdict},
            "dominant": {"before": a.dominant, "after": b.dominant},
            "sensitivityRankChanges": rank_changes,
            "timeoutQ": timeout_q,
        }


def whatif(spec_a: JourneySpec, model_a: EvidenceModel,
           spec_b: JourneySpec, model_b: EvidenceModel) -> WhatIfReport:
    """Compile both worlds and report the governed-value deltas."""
    return WhatIfReport(build_trace(spec_a, model_a),
                        build_trace(spec_b, model_b))
