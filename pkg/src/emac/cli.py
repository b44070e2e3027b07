"""Command-line front end.

Single-process batch pipeline over plain-text documents:

    compile <spec> --model <model> --out <dir> [--mode ...] [--no-gate]
    validate <spec> [--model <model>]
    explain <spec> --model <model> [--format json|text]
    simulate <spec> --model <model> --trials N --seed S --coupling C [--enumerate]
    whatif <specA> <modelA> <specB> <modelB>
    parse-script <file>

Exit codes: 0 success, 1 validation or parse failure, 2 objective gate
failure, 3 I/O failure, 4 resource limit exceeded.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import emitters, simulate
from .diagnostics import (Diagnostic, DocumentError, ParseError,
                          ResourceLimitError, has_errors)
from .documents import (dump_json, dump_yaml, load_model_document,
                        load_spec_document, spec_skeleton)
from .model import EvidenceModel, JourneySpec, merge_domains, validate_spec
from .parser import parse_script, pretty_print
from .trace import DerivationTrace, build_trace
from .units import fmt_float

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_GATE = 2
EXIT_IO = 3
EXIT_RESOURCE = 4


def _read(path: str) -> bytes:
    return Path(path).read_bytes()


def _print_diags(diags: list[Diagnostic]):
    for d in diags:
        print(d.render(), file=sys.stderr)


def _load_pair(spec_path: str, model_path: str
               ) -> tuple[JourneySpec, EvidenceModel]:
    warnings: list[Diagnostic] = []
    spec = load_spec_document(_read(spec_path), warnings)
    model = load_model_document(_read(model_path), warnings)
    _print_diags(warnings)
    return spec, model


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_compile(args) -> int:
    spec, model = _load_pair(args.spec, args.model)
    bundle = emitters.compile_bundle(spec, model)
    written = emitters.write_bundle(bundle, args.out)
    trace = bundle.trace
    for path in written:
        print(f"wrote {path}")
    modes = ("pessimistic", "optimistic") if args.mode == "both" else (args.mode,)
    for mode in modes:
        avail = trace.interval.lo if mode == "pessimistic" else trace.interval.hi
        print(f"{mode}: availability {fmt_float(avail)}", end="")
        if trace.quantile is not None:
            q = (trace.quantile.upper if mode == "pessimistic"
                 else trace.quantile.point)
            print(f", p{fmt_float(trace.percentile * 100)}"
                  f" {'<=' if mode == 'pessimistic' else '~'} {fmt_float(q)} ms",
                  end="")
        print()
    print(f"verdict: {trace.verdict}")
    for reason in trace.verdict_reasons:
        print(f"  {reason}")
    if trace.verdict == "fail" and not args.no_gate:
        return EXIT_GATE
    return EXIT_OK


def _cmd_validate(args) -> int:
    warnings: list[Diagnostic] = []
    spec = load_spec_document(_read(args.spec), warnings)
    model = None
    if args.model is not None:
        model = load_model_document(_read(args.model), warnings)
    diags = validate_spec(spec, model)
    _print_diags(warnings + diags)
    if has_errors(diags):
        return EXIT_VALIDATION
    print(f"{spec.name}: valid")
    return EXIT_OK


def _node_line(record) -> str:
    kind = record.operator if record.leaf is None else f"leaf {record.leaf}"
    line = (f"  {record.path}: {kind}"
            f" availability [{fmt_float(record.interval.lo)},"
            f" {fmt_float(record.interval.hi)}]")
    if record.quantile is not None:
        line += (f" latency point {fmt_float(record.quantile.point)}"
                 f" upper {fmt_float(record.quantile.upper)} ms")
    return line


def _trace_text(trace: DerivationTrace) -> str:
    lines = [f"journey: {trace.journey}"]
    lines.append(f"availability: [{fmt_float(trace.interval.lo)},"
                 f" {fmt_float(trace.interval.hi)}]")
    lines.append(f"  lower bound: {trace.interval.lo_assumption}")
    lines.append(f"  upper bound: {trace.interval.hi_assumption}")
    if trace.quantile is not None:
        lines.append(f"latency p{fmt_float(trace.percentile * 100)}:"
                     f" point {fmt_float(trace.quantile.point)} ms,"
                     f" upper {fmt_float(trace.quantile.upper)} ms"
                     f" (effective samples {trace.quantile.effective_samples})")
    lines.append(f"verdict: {trace.verdict}")
    for reason in trace.verdict_reasons:
        lines.append(f"  {reason}")
    if trace.dominant is not None:
        lines.append(f"dominant contributor: {trace.dominant}")
    for entry in trace.sensitivity.entries[:5]:
        lines.append(f"  #{entry.rank} {entry.kind} {entry.name}:"
                     f" delta {fmt_float(entry.delta)}")
    lines.append(f"symbolic SLI: {trace.symbolic.to_text()}")
    if trace.q_values:
        lines.append("deadline success probabilities:")
        for path in sorted(trace.q_values):
            q = trace.q_values[path]
            lines.append(f"  {path} (t={fmt_float(q.t_ms)} ms):"
                         f" [{fmt_float(q.lo)}, {fmt_float(q.hi)}]")
    lines.append("nodes:")
    for path in sorted(trace.records):
        lines.append(_node_line(trace.records[path]))
    for flag in trace.flags:
        lines.append(f"flag: {flag}")
    return "\n".join(lines) + "\n"


def _cmd_explain(args) -> int:
    spec, model = _load_pair(args.spec, args.model)
    trace = build_trace(spec, model)
    if args.format == "json":
        sys.stdout.write(dump_json(trace.to_doc()))
    else:
        sys.stdout.write(_trace_text(trace))
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec, model = _load_pair(args.spec, args.model)
    diags = validate_spec(spec, model)
    if has_errors(diags):
        _print_diags(diags)
        return EXIT_VALIDATION
    cfg = simulate.SimConfig(
        trials=args.trials, seed=args.seed, coupling=args.coupling,
        mode="enumerate" if args.enumerate else "montecarlo")
    domains = merge_domains(spec.domains, model.domains)
    result = simulate.run(spec.expression, model, domains, cfg)
    sys.stdout.write(dump_json(result.to_doc()))
    return EXIT_OK


def _cmd_whatif(args) -> int:
    spec_a, model_a = _load_pair(args.spec_a, args.model_a)
    spec_b, model_b = _load_pair(args.spec_b, args.model_b)
    report = emitters.whatif(spec_a, model_a, spec_b, model_b)
    sys.stdout.write(dump_json(report.to_doc()))
    return EXIT_OK


def _cmd_parse_script(args) -> int:
    script = parse_script(_read(args.file).decode("utf-8"))
    _print_diags(script.diagnostics)
    if has_errors(script.diagnostics):
        return EXIT_VALIDATION
    doc = spec_skeleton(script.name, pretty_print(script.expression),
                        script.objective)
    sys.stdout.write(dump_yaml(doc))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser and dispatch
# ---------------------------------------------------------------------------

class _ArgumentParser(argparse.ArgumentParser):
    # usage errors are validation failures (exit 1), not gate failures
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="emac",
        description="Compile journey reliability objectives into governance "
                    "artifacts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", parents=[], help="write the artifact bundle")
    p.add_argument("spec")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("pessimistic", "optimistic", "both"),
                   default="pessimistic")
    p.add_argument("--no-gate", action="store_true",
                   help="exit 0 even when the objective verdict is fail")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("validate", help="check a spec (and optional model)")
    p.add_argument("spec")
    p.add_argument("--model")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("explain", help="print the derivation trace")
    p.add_argument("spec")
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("simulate", help="oracle run (sampling or exact)")
    p.add_argument("spec")
    p.add_argument("--model", required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--coupling",
                   choices=(simulate.INDEPENDENT, simulate.COMONOTONE),
                   default=simulate.INDEPENDENT)
    p.add_argument("--enumerate", action="store_true",
                   help="exact enumeration instead of sampling")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("whatif", help="delta report between two worlds")
    p.add_argument("spec_a")
    p.add_argument("model_a")
    p.add_argument("spec_b")
    p.add_argument("model_b")
    p.set_defaults(func=_cmd_whatif)

    p = sub.add_parser("parse-script",
                       help="convert script form to a spec skeleton")
    p.add_argument("file")
    p.set_defaults(func=_cmd_parse_script)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParseError as exc:
        print(exc.diagnostic.render(), file=sys.stderr)
        return EXIT_VALIDATION
    except DocumentError as exc:
        _print_diags(exc.diagnostics)
        return EXIT_VALIDATION
    except ResourceLimitError as exc:
        print(f"error[ResourceLimit]: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValueError as exc:
        print(f"error[Validation]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error[IO]: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
