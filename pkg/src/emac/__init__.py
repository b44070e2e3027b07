"""Journey reliability compiler.

Composes per-dependency availability and latency evidence through a journey
operator tree into bounded end-to-end objectives, then emits the governance
artifacts (recording rules, burn-rate alerts, rollout gate, provenance) that
enforce them.
"""
from .availability import (AvailabilityInterval, SensitivityEntry,
                           SensitivityReport, SymbolicExpr,
                           availability_interval, eval_optimistic,
                           eval_pessimistic, sensitivity,
                           symbolic_availability)
from .diagnostics import (Diagnostic, DocumentError, EmacError, ParseError,
                          ResourceLimitError, SourceSpan)
from .documents import (dump_json, dump_yaml, load_model_document,
                        load_spec_document, spec_skeleton, write_atomic)
from .emitters import (CompilationBundle, WhatIfReport, compile_bundle,
                       emit_burn_rate_alerts, emit_recording_rules,
                       emit_rollout_gate, whatif, write_bundle)
from .latency import (DegenerateTruncation, DiscreteDist, QuantileResult,
                      TimeoutQ, build_q_values, compose, compose_detail,
                      convolve, dkw_epsilon, from_histogram, max_indep,
                      min_indep, mixture, quantile, order_statistic, shift,
                      truncate_renorm)
from .model import (AvailabilityEvidence, BurnRatePolicyRow, CanaryPolicy,
                    Cond, EvidenceModel, GovernancePolicy, JourneySpec, KofN,
                    LatencyEvidence, Leaf, LeafEvidence, Objective, Parallel,
                    ProbEstimate, ProbRef, Race, Series, Timeout,
                    effective_domains, leaf_names, merge_domains,
                    validate_spec, walk)
from .parser import parse_expression, parse_script, pretty_print
from .simulate import SimConfig, SimResult, replay_determinism, run
from .trace import DerivationTrace, NodeRecord, build_trace

__all__ = [
    "AvailabilityEvidence", "AvailabilityInterval", "BurnRatePolicyRow",
    "CanaryPolicy", "CompilationBundle", "Cond", "DegenerateTruncation",
    "DerivationTrace",
    "Diagnostic", "DiscreteDist", "DocumentError", "EmacError",
    "EvidenceModel", "GovernancePolicy", "JourneySpec", "KofN",
    "LatencyEvidence", "Leaf", "LeafEvidence", "NodeRecord", "Objective",
    "Parallel", "ParseError", "ProbEstimate", "ProbRef", "QuantileResult",
    "Race", "ResourceLimitError", "SensitivityEntry", "SensitivityReport",
    "Series", "SimConfig", "SimResult", "SourceSpan", "SymbolicExpr",
    "Timeout", "TimeoutQ", "WhatIfReport", "availability_interval",
    "build_q_values", "build_trace", "compile_bundle", "compose",
    "compose_detail", "convolve", "dkw_epsilon", "dump_json", "dump_yaml",
    "effective_domains", "emit_burn_rate_alerts", "emit_recording_rules",
    "emit_rollout_gate", "eval_optimistic", "eval_pessimistic",
    "from_histogram", "leaf_names", "load_model_document",
    "load_spec_document", "max_indep", "merge_domains", "min_indep",
    "mixture", "order_statistic", "parse_expression", "parse_script",
    "pretty_print", "quantile", "replay_determinism", "run", "sensitivity",
    "shift", "simulate", "spec_skeleton", "symbolic_availability",
    "truncate_renorm", "validate_spec", "walk", "whatif", "write_atomic",
    "write_bundle",
]
