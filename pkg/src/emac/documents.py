"""Structured spec/model documents (YAML/JSON) and deterministic file output.

Both document kinds are versioned with a required top-level `emacVersion: 1`.
Unknown fields produce warnings, never errors, so documents written by newer
tools still load. Schema violations carry a dotted path into the document
("leaves.PayA.latency.buckets[1].leMs").
"""
from __future__ import annotations

import json
import os
import tempfile
from typing import Any

import yaml

from .diagnostics import Diagnostic, DocumentError, ParseError, has_errors
from .model import (
    AvailabilityEvidence, BurnRatePolicyRow, CanaryPolicy, EvidenceModel,
    GovernancePolicy, JourneySpec, LatencyEvidence, LeafEvidence, Objective,
    ProbEstimate,
)
from .parser import parse_expression
from .units import format_duration, parse_duration

EMAC_VERSION = 1

_SPEC_FIELDS = {"emacVersion", "name", "expression", "objective", "domains",
                "policy", "latencyQuery"}
_MODEL_FIELDS = {"emacVersion", "leaves", "branchProbs", "domains",
                 "provenance", "confidence"}


class _Check:
    """Diagnostic-collecting type checks over a parsed document tree."""

    def __init__(self):
        self.diags: list[Diagnostic] = []

    def error(self, code: str, message: str, path: str):
        self.diags.append(Diagnostic("error", code, message, path=path))

    def warn(self, code: str, message: str, path: str):
        self.diags.append(Diagnostic("warning", code, message, path=path))

    def mapping(self, obj, path) -> dict | None:
        if not isinstance(obj, dict):
            self.error("Schema", f"expected a mapping, found {type(obj).__name__}", path)
            return None
        return obj

    def sequence(self, obj, path) -> list | None:
        if not isinstance(obj, list):
            self.error("Schema", f"expected a list, found {type(obj).__name__}", path)
            return None
        return obj

    def string(self, obj, path) -> str | None:
        if not isinstance(obj, str):
            self.error("Schema", f"expected a string, found {type(obj).__name__}", path)
            return None
        return obj

    def number(self, obj, path) -> float | None:
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            self.error("Schema", f"expected a number, found {type(obj).__name__}", path)
            return None
        return float(obj)

    def integer(self, obj, path) -> int | None:
        if isinstance(obj, bool) or not isinstance(obj, int):
            self.error("Schema", f"expected an integer, found {type(obj).__name__}", path)
            return None
        return obj

    def duration_ms(self, obj, path) -> int | None:
        """Window durations: integer ms or a string like '5m' / '1h'."""
        if isinstance(obj, bool):
            self.error("Schema", "expected a duration", path)
            return None
        if isinstance(obj, int):
            if obj <= 0:
                self.error("Schema", "duration must be positive", path)
                return None
            return obj
        if isinstance(obj, str):
            try:
                ms, exact = parse_duration(obj)
            except ValueError as exc:
                self.error("Schema", str(exc), path)
                return None
            if not exact:
                self.warn("DurationRounded", f"{obj} rounded to {ms}ms", path)
            return ms
        self.error("Schema", f"expected a duration, found {type(obj).__name__}", path)
        return None

    def unknown_fields(self, obj: dict, known: set, path: str):
        for key in sorted(set(obj) - known):
            self.warn("UnknownField", f"unknown field {key!r} ignored",
                      f"{path}.{key}" if path else str(key))


def _load_yaml(data: bytes | str, check: _Check) -> Any:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        check.error("Malformed", f"document does not parse: {exc}", "")
        return None


def _check_version(doc: dict, check: _Check):
    version = doc.get("emacVersion")
    if version is None:
        check.error("Version", "missing required field emacVersion", "emacVersion")
    elif version != EMAC_VERSION:
        check.error("Version",
                    f"unsupported emacVersion {version!r} (expected {EMAC_VERSION})",
                    "emacVersion")


def _load_domains(obj, check: _Check, path: str) -> dict[str, frozenset]:
    domains: dict[str, frozenset] = {}
    mapping = check.mapping(obj, path)
    if mapping is None:
        return domains
    for dom in sorted(mapping, key=str):
        members = check.sequence(mapping[dom], f"{path}.{dom}")
        if members is None:
            continue
        names = []
        for i, m in enumerate(members):
            s = check.string(m, f"{path}.{dom}[{i}]")
            if s is not None:
                names.append(s)
        domains[str(dom)] = frozenset(names)
    return domains


# ---------------------------------------------------------------------------
# Journey spec document
# ---------------------------------------------------------------------------

def _load_policy(obj, check: _Check) -> GovernancePolicy:
    defaults = GovernancePolicy()
    mapping = check.mapping(obj, "policy")
    if mapping is None:
        return defaults
    check.unknown_fields(mapping, {"burnWindows", "canary", "boundMode", "dkwDelta"},
                         "policy")

    rows = defaults.burn_windows
    if "burnWindows" in mapping:
        seq = check.sequence(mapping["burnWindows"], "policy.burnWindows")
        parsed = []
        for i, row in enumerate(seq or []):
            rpath = f"policy.burnWindows[{i}]"
            rmap = check.mapping(row, rpath)
            if rmap is None:
                continue
            check.unknown_fields(rmap, {"long", "short", "factor", "severity"}, rpath)
            long_ms = check.duration_ms(rmap.get("long"), f"{rpath}.long")
            short_ms = check.duration_ms(rmap.get("short"), f"{rpath}.short")
            factor = check.number(rmap.get("factor"), f"{rpath}.factor")
            severity = rmap.get("severity", "page")
            if None in (long_ms, short_ms, factor):
                continue
            try:
                parsed.append(BurnRatePolicyRow(long_ms, short_ms, factor,
                                                str(severity)))
            except ValueError as exc:
                check.error("Schema", str(exc), rpath)
        if seq is not None:
            rows = tuple(parsed)

    canary = defaults.canary
    if "canary" in mapping:
        cmap = check.mapping(mapping["canary"], "policy.canary")
        if cmap is not None:
            check.unknown_fields(cmap, {"short", "long", "interval", "maxFailures"},
                                 "policy.canary")
            short_ms = check.duration_ms(cmap.get("short", defaults.canary.short_window_ms),
                                         "policy.canary.short")
            long_ms = check.duration_ms(cmap.get("long", defaults.canary.long_window_ms),
                                        "policy.canary.long")
            interval = check.duration_ms(cmap.get("interval", defaults.canary.interval_ms),
                                         "policy.canary.interval")
            max_failures = check.integer(cmap.get("maxFailures", defaults.canary.max_failures),
                                         "policy.canary.maxFailures")
            if None not in (short_ms, long_ms, interval, max_failures):
                try:
                    canary = CanaryPolicy(short_ms, long_ms, interval, max_failures)
                except ValueError as exc:
                    check.error("Schema", str(exc), "policy.canary")

    bound_mode = mapping.get("boundMode", defaults.bound_mode)
    dkw_delta = mapping.get("dkwDelta", defaults.dkw_delta)
    try:
        return GovernancePolicy(rows, canary, bound_mode, float(dkw_delta))
    except (TypeError, ValueError) as exc:
        check.error("Schema", str(exc), "policy")
        return defaults


def load_spec_document(data: bytes | str,
                       warnings: list[Diagnostic] | None = None) -> JourneySpec:
    """Deserialize and structurally validate a journey spec document.

    Raises DocumentError on schema/parse errors; appends warnings (unknown
    fields, rounding) to `warnings` when a sink is supplied.
    """
    check = _Check()
    doc = _load_yaml(data, check)
    if not check.diags:
        check.mapping(doc, "")
    if has_errors(check.diags):
        raise DocumentError(check.diags)

    _check_version(doc, check)
    check.unknown_fields(doc, _SPEC_FIELDS, "")

    name = check.string(doc.get("name"), "name") if "name" in doc else None
    if name is None:
        check.error("Schema", "missing journey name", "name")
        name = "journey"

    expression = None
    expr_text = check.string(doc.get("expression"), "expression") \
        if "expression" in doc else None
    if expr_text is None:
        check.error("Schema", "missing expression", "expression")
    else:
        try:
            expression = parse_expression(expr_text, check.diags)
        except ParseError as exc:
            d = exc.diagnostic
            check.diags.append(Diagnostic(d.severity, d.code, d.message,
                                          path="expression"))

    objective = Objective()
    if "objective" in doc:
        omap = check.mapping(doc["objective"], "objective")
        if omap is not None:
            check.unknown_fields(omap, {"availability", "latency"}, "objective")
            avail = None
            if "availability" in omap:
                avail = check.number(omap["availability"], "objective.availability")
            lat_pct = lat_thr = None
            if "latency" in omap:
                lmap = check.mapping(omap["latency"], "objective.latency")
                if lmap is not None:
                    check.unknown_fields(lmap, {"percentile", "thresholdMs"},
                                         "objective.latency")
                    lat_pct = check.number(lmap.get("percentile"),
                                           "objective.latency.percentile")
                    lat_thr = check.number(lmap.get("thresholdMs"),
                                           "objective.latency.thresholdMs")
            try:
                objective = Objective.build(avail, lat_pct, lat_thr)
            except (ValueError, ArithmeticError) as exc:
                check.error("Schema", str(exc), "objective")
    else:
        check.error("Schema", "missing objective", "objective")

    domains = _load_domains(doc.get("domains", {}), check, "domains")
    policy = _load_policy(doc.get("policy", {}), check)
    latency_query = None
    if "latencyQuery" in doc:
        latency_query = check.string(doc["latencyQuery"], "latencyQuery")

    if has_errors(check.diags):
        raise DocumentError([d for d in check.diags if d.severity == "error"])
    if warnings is not None:
        warnings.extend(d for d in check.diags if d.severity == "warning")
    return JourneySpec(name=name, expression=expression, objective=objective,
                       policy=policy, domains=domains, latency_query=latency_query)


# ---------------------------------------------------------------------------
# Evidence model document
# ---------------------------------------------------------------------------

def _load_availability(obj, check: _Check, path: str) -> AvailabilityEvidence | None:
    amap = check.mapping(obj, path)
    if amap is None:
        return None
    check.unknown_fields(amap, {"point", "good", "total", "window"}, path)
    point = good = total = None
    if "point" in amap:
        point = check.number(amap["point"], f"{path}.point")
    if "good" in amap:
        good = check.integer(amap["good"], f"{path}.good")
    if "total" in amap:
        total = check.integer(amap["total"], f"{path}.total")
    window = amap.get("window")
    try:
        return AvailabilityEvidence(point=point, good=good, total=total,
                                    window=None if window is None else str(window))
    except ValueError as exc:
        check.error("Counts", str(exc), path)
        return None


def _load_latency(obj, check: _Check, path: str) -> LatencyEvidence | None:
    lmap = check.mapping(obj, path)
    if lmap is None:
        return None
    check.unknown_fields(lmap, {"buckets", "samples", "window"}, path)
    seq = check.sequence(lmap.get("buckets"), f"{path}.buckets")
    samples = check.integer(lmap.get("samples"), f"{path}.samples")
    if seq is None or samples is None:
        return None
    buckets = []
    for i, b in enumerate(seq):
        bpath = f"{path}.buckets[{i}]"
        bmap = check.mapping(b, bpath)
        if bmap is None:
            return None
        check.unknown_fields(bmap, {"leMs", "count"}, bpath)
        le = check.number(bmap.get("leMs"), f"{bpath}.leMs")
        count = check.integer(bmap.get("count"), f"{bpath}.count")
        if le is None or count is None:
            return None
        buckets.append((le, count))
    window = lmap.get("window")
    try:
        return LatencyEvidence(tuple(buckets), samples,
                               None if window is None else str(window))
    except ValueError as exc:
        check.error("Buckets", str(exc), f"{path}.buckets")
        return None


def load_model_document(data: bytes | str,
                        warnings: list[Diagnostic] | None = None) -> EvidenceModel:
    """Deserialize and structurally validate an evidence model document."""
    check = _Check()
    doc = _load_yaml(data, check)
    if not check.diags:
        check.mapping(doc, "")
    if has_errors(check.diags):
        raise DocumentError(check.diags)

    _check_version(doc, check)
    check.unknown_fields(doc, _MODEL_FIELDS, "")

    leaves: dict[str, LeafEvidence] = {}
    lmap = check.mapping(doc.get("leaves", {}), "leaves")
    for leaf in sorted(lmap or {}, key=str):
        lpath = f"leaves.{leaf}"
        entry = check.mapping(lmap[leaf], lpath)
        if entry is None:
            continue
        check.unknown_fields(entry, {"availability", "latency", "sliQuery"}, lpath)
        if "availability" not in entry or "latency" not in entry:
            check.error("Schema", "leaf needs availability and latency evidence",
                        lpath)
            continue
        avail = _load_availability(entry["availability"], check,
                                   f"{lpath}.availability")
        latency = _load_latency(entry["latency"], check, f"{lpath}.latency")
        sli_query = entry.get("sliQuery")
        if avail is not None and latency is not None:
            leaves[str(leaf)] = LeafEvidence(
                avail, latency,
                None if sli_query is None else str(sli_query))

    branch_probs: dict[str, ProbEstimate] = {}
    bmap = check.mapping(doc.get("branchProbs", {}), "branchProbs")
    for name in sorted(bmap or {}, key=str):
        bpath = f"branchProbs.{name}"
        entry = check.mapping(bmap[name], bpath)
        if entry is None:
            continue
        check.unknown_fields(entry, {"value", "lo", "hi", "samples"}, bpath)
        value = check.number(entry.get("value"), f"{bpath}.value")
        if value is None:
            continue
        lo = check.number(entry["lo"], f"{bpath}.lo") if "lo" in entry else None
        hi = check.number(entry["hi"], f"{bpath}.hi") if "hi" in entry else None
        samples = (check.integer(entry["samples"], f"{bpath}.samples")
                   if "samples" in entry else None)
        try:
            branch_probs[str(name)] = ProbEstimate(value, lo, hi, samples)
        except ValueError as exc:
            check.error("Schema", str(exc), bpath)

    domains = _load_domains(doc.get("domains", {}), check, "domains")

    provenance: dict[str, str] = {}
    pmap = check.mapping(doc.get("provenance", {}), "provenance")
    for leaf in sorted(pmap or {}, key=str):
        provenance[str(leaf)] = str(pmap[leaf])

    confidence: dict[str, float] = {}
    cmap = check.mapping(doc.get("confidence", {}), "confidence")
    for leaf in sorted(cmap or {}, key=str):
        v = check.number(cmap[leaf], f"confidence.{leaf}")
        if v is not None:
            confidence[str(leaf)] = v

    if has_errors(check.diags):
        raise DocumentError([d for d in check.diags if d.severity == "error"])
    if warnings is not None:
        warnings.extend(d for d in check.diags if d.severity == "warning")
    return EvidenceModel(leaves=leaves, branch_probs=branch_probs, domains=domains,
                         provenance=provenance, confidence=confidence)


# ---------------------------------------------------------------------------
# Deterministic output
# ---------------------------------------------------------------------------

def spec_skeleton(name: str, expression_text: str,
                  objective: Objective | None) -> dict:
    """Spec-document skeleton for the script converter (parse-script)."""
    obj: dict[str, Any] = {}
    if objective is not None and objective.availability_percent is not None:
        obj["availability"] = objective.availability_percent
    if objective is not None and objective.latency_percentile is not None:
        obj["latency"] = {"percentile": objective.latency_percentile,
                          "thresholdMs": objective.latency_threshold_ms}
    return {
        "emacVersion": EMAC_VERSION,
        "name": name,
        "expression": expression_text,
        "objective": obj,
        "domains": {},
    }


def dump_yaml(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=False, width=120)


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def write_atomic(path: str, content: str):
    """Write-temp-then-rename so partial files never land at `path`."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".emac-")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def policy_to_doc(policy: GovernancePolicy) -> dict:
    return {
        "burnWindows": [
            {"long": format_duration(r.long_window_ms),
             "short": format_duration(r.short_window_ms),
             "factor": r.factor, "severity": r.severity}
            for r in policy.burn_windows
        ],
        "canary": {
            "short": format_duration(policy.canary.short_window_ms),
            "long": format_duration(policy.canary.long_window_ms),
            "interval": format_duration(policy.canary.interval_ms),
            "maxFailures": policy.canary.max_failures,
        },
        "boundMode": policy.bound_mode,
        "dkwDelta": policy.dkw_delta,
    }
