"""Journey expression grammar and the textual script form.

Grammar (whitespace and newlines insignificant, optional trailing "."):

    expr     := "Series(" expr ("," expr)+ ")"
              | "Parallel(" expr ("," expr)+ ")"
              | "Cond(" prob ";" expr "," expr ")"
              | "Race(" expr ("," expr)+ ")"
              | "KofN(" int ";" expr ("," expr)+ ")"
              | "Timeout(" duration ";" expr "," expr ")"
              | ident
    prob     := decimal in [0,1] | ident
    duration := decimal ("ms" | "s")
    ident    := [A-Za-z_][A-Za-z0-9_]*

Script form: "name := expr." statements plus objective lines
("objective: A >= 99.9", "objective: p99 < 400ms"); "#" starts a comment line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal

from .diagnostics import Diagnostic, ParseError, SourceSpan
from .model import (
    Cond, JourneyExpr, KofN, Leaf, Objective, Parallel, ProbRef, Race, Series,
    Timeout,
)

_OPERATORS = ("Series", "Parallel", "Cond", "Race", "KofN", "Timeout")

_TOKEN_RE = re.compile(
    r"""
    (?P<WS>\s+)
  | (?P<DURATION>\d+(?:\.\d+)?(?:ms|s)\b)
  | (?P<NUMBER>\d+(?:\.\d+)?)
  | (?P<IDENT>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<LPAREN>\()
  | (?P<RPAREN>\))
  | (?P<COMMA>,)
  | (?P<SEMI>;)
  | (?P<DOT>\.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    span: SourceSpan


def _tokenize(text: str, base_line: int = 1, base_offset: int = 0) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, base_line, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(line, pos - line_start + 1,
                              base_offset + pos, base_offset + pos + 1)
            raise ParseError(Diagnostic(
                "error", "Syntax", f"unexpected character {text[pos]!r}", span=span))
        kind = m.lastgroup
        if kind != "WS":
            span = SourceSpan(line, m.start() - line_start + 1,
                              base_offset + m.start(), base_offset + m.end())
            tokens.append(_Token(kind, m.group(), span))
        line += text.count("\n", m.start(), m.end())
        nl = text.rfind("\n", m.start(), m.end())
        if nl >= 0:
            line_start = nl + 1
        pos = m.end()
    eof = SourceSpan(line, len(text) - line_start + 1,
                     base_offset + len(text), base_offset + len(text))
    tokens.append(_Token("EOF", "", eof))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], warnings: list[Diagnostic]):
        self.tokens = tokens
        self.pos = 0
        self.warnings = warnings

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, code: str, message: str, span: SourceSpan):
        raise ParseError(Diagnostic("error", code, message, span=span))

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            self.fail("Syntax", f"expected {what}, found {tok.text or 'end of input'!r}",
                      tok.span)
        return self.advance()

    # -- grammar ------------------------------------------------------------

    def expression(self) -> JourneyExpr:
        tok = self.expect("IDENT", "an operator or leaf name")
        if tok.text in _OPERATORS and self.peek().kind == "LPAREN":
            return self.operator(tok)
        return Leaf(tok.text)

    def operator(self, head: _Token) -> JourneyExpr:
        self.expect("LPAREN", "'('")
        name = head.text
        if name in ("Series", "Parallel", "Race"):
            children = self.child_list(minimum=2)
            cls = {"Series": Series, "Parallel": Parallel, "Race": Race}[name]
            node = cls(tuple(children))
        elif name == "KofN":
            k = self.integer("quorum k")
            self.expect("SEMI", "';'")
            children = self.child_list(minimum=1)
            try:
                node = KofN(k, tuple(children))
            except ValueError as exc:
                self.fail("QuorumRange", str(exc), head.span)
        elif name == "Cond":
            p = self.prob_ref()
            self.expect("SEMI", "';'")
            if_true = self.expression()
            self.expect("COMMA", "','")
            if_false = self.expression()
            node = Cond(p, if_true, if_false)
        else:  # Timeout
            t_ms = self.duration_ms()
            self.expect("SEMI", "';'")
            body = self.expression()
            self.expect("COMMA", "','")
            fallback = self.expression()
            try:
                node = Timeout(t_ms, body, fallback)
            except ValueError as exc:
                self.fail("DurationRange", str(exc), head.span)
        self.expect("RPAREN", "')'")
        return node

    def child_list(self, minimum: int) -> list[JourneyExpr]:
        children = [self.expression()]
        while self.peek().kind == "COMMA":
            self.advance()
            children.append(self.expression())
        if len(children) < minimum:
            self.fail("ChildCount", f"operator needs at least {minimum} children",
                      self.peek().span)
        return children

    def integer(self, what: str) -> int:
        tok = self.expect("NUMBER", what)
        if "." in tok.text:
            self.fail("Syntax", f"{what} must be an integer", tok.span)
        return int(tok.text)

    def prob_ref(self) -> ProbRef:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            try:
                return ProbRef(value=float(tok.text))
            except ValueError as exc:
                self.fail("ProbRange", str(exc), tok.span)
        if tok.kind == "IDENT":
            self.advance()
            return ProbRef(name=tok.text)
        self.fail("Syntax", "expected a probability literal or name", tok.span)

    def duration_ms(self) -> int:
        tok = self.expect("DURATION", "a duration like 200ms or 1.5s")
        unit = "ms" if tok.text.endswith("ms") else "s"
        qty = Decimal(tok.text[: -len(unit)]) * (1 if unit == "ms" else 1000)
        ms = int(qty.to_integral_value(rounding="ROUND_HALF_EVEN"))
        if qty != ms:
            self.warnings.append(Diagnostic(
                "warning", "DurationRounded",
                f"duration {tok.text} rounded to {ms}ms", span=tok.span))
        if ms <= 0:
            self.fail("DurationRange", f"duration {tok.text} must be positive",
                      tok.span)
        return ms


def parse_expression(text: str, warnings: list[Diagnostic] | None = None, *,
                     _base_line: int = 1, _base_offset: int = 0) -> JourneyExpr:
    """Parse a journey expression; raises ParseError with a source span."""
    sink = [] if warnings is None else warnings
    parser = _Parser(_tokenize(text, _base_line, _base_offset), sink)
    expr = parser.expression()
    if parser.peek().kind == "DOT":  # optional trailing "."
        parser.advance()
    parser.expect("EOF", "end of expression")
    return expr


# ---------------------------------------------------------------------------
# Canonical printing
# ---------------------------------------------------------------------------

def _fmt_prob(p: float) -> str:
    # grammar has no exponent form; fixed-point decimal round-trips exactly
    return format(Decimal(repr(p)), "f")


def _fmt_expr_duration(ms: int) -> str:
    return f"{ms // 1000}s" if ms % 1000 == 0 else f"{ms}ms"


def pretty_print(expr: JourneyExpr) -> str:
    """Canonical single-line rendering; parse_expression(pretty_print(e)) == e."""
    if isinstance(expr, Leaf):
        return expr.name
    if isinstance(expr, (Series, Parallel, Race)):
        inner = ", ".join(pretty_print(c) for c in expr.children)
        return f"{type(expr).__name__}({inner})"
    if isinstance(expr, KofN):
        inner = ", ".join(pretty_print(c) for c in expr.children)
        return f"KofN({expr.k}; {inner})"
    if isinstance(expr, Cond):
        p = expr.p.name if not expr.p.is_literal else _fmt_prob(expr.p.value)
        return f"Cond({p}; {pretty_print(expr.if_true)}, {pretty_print(expr.if_false)})"
    if isinstance(expr, Timeout):
        return (f"Timeout({_fmt_expr_duration(expr.t_ms)}; "
                f"{pretty_print(expr.body)}, {pretty_print(expr.fallback)})")
    raise TypeError(f"not a journey expression: {expr!r}")


# ---------------------------------------------------------------------------
# Script form
# ---------------------------------------------------------------------------

@dataclass
class ParsedScript:
    name: str
    expression: JourneyExpr
    objective: Objective | None
    diagnostics: list[Diagnostic] = field(default_factory=list)


_OBJ_AVAIL_RE = re.compile(
    r"^\s*objective\s*:\s*A\s*>=\s*(\d+(?:\.\d+)?)\s*%?\s*$")
_OBJ_LAT_RE = re.compile(
    r"^\s*objective\s*:\s*p(\d+(?:\.\d+)?)\s*<\s*(\d+(?:\.\d+)?)\s*(ms|s)\s*$")
_ASSIGN_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*:=")


def _balanced(text: str) -> bool:
    return text.count("(") == text.count(")")


def parse_script(text: str) -> ParsedScript:
    """Parse the script form; returns the journey plus any objective lines.

    A missing objective is a warning (carried in .diagnostics), duplicate
    assignments or objectives are errors.
    """
    diags: list[Diagnostic] = []
    name: str | None = None
    expr: JourneyExpr | None = None
    avail_pct: float | None = None
    lat: tuple[float, float] | None = None

    lines = text.split("\n")
    offsets = []
    off = 0
    for ln in lines:
        offsets.append(off)
        off += len(ln) + 1

    buf_start: int | None = None
    buf_text = ""

    def line_span(i: int) -> SourceSpan:
        return SourceSpan(i + 1, 1, offsets[i], offsets[i] + len(lines[i]))

    def flush(end_line: int):
        nonlocal name, expr, buf_start, buf_text
        m = _ASSIGN_RE.match(buf_text)
        if m is None:
            raise ParseError(Diagnostic(
                "error", "Syntax", "expected 'name := expression'",
                span=line_span(buf_start)))
        if name is not None:
            raise ParseError(Diagnostic(
                "error", "DuplicateAssignment",
                f"journey already assigned as {name!r}", span=line_span(buf_start)))
        name = m.group(1)
        body = buf_text[m.end():]
        expr = parse_expression(
            body, diags,
            _base_line=buf_start + 1,
            _base_offset=offsets[buf_start] + m.end(),
        )
        buf_start, buf_text = None, ""

    for i, raw in enumerate(lines):
        stripped = raw.strip()
        if buf_start is not None and _balanced(buf_text) and (
                _OBJ_AVAIL_RE.match(raw) or _OBJ_LAT_RE.match(raw)
                or _ASSIGN_RE.match(raw)):
            flush(i - 1)  # dot-less statement ended by the next statement
        if buf_start is None:
            if not stripped or stripped.startswith("#"):
                continue
            m = _OBJ_AVAIL_RE.match(raw)
            if m:
                if avail_pct is not None:
                    raise ParseError(Diagnostic(
                        "error", "DuplicateObjective",
                        "availability objective given twice", span=line_span(i)))
                avail_pct = float(m.group(1))
                continue
            m = _OBJ_LAT_RE.match(raw)
            if m:
                if lat is not None:
                    raise ParseError(Diagnostic(
                        "error", "DuplicateObjective",
                        "latency objective given twice", span=line_span(i)))
                pct = float(Decimal(m.group(1)) / 100)
                thr = float(Decimal(m.group(2)) * (1 if m.group(3) == "ms" else 1000))
                lat = (pct, thr)
                continue
            if stripped.startswith("objective"):
                raise ParseError(Diagnostic(
                    "error", "Syntax",
                    "objective must be 'A >= <percent>' or 'p<q> < <duration>'",
                    span=line_span(i)))
            buf_start, buf_text = i, raw
        else:
            buf_text += "\n" + raw
        if buf_start is not None and _balanced(buf_text) and buf_text.rstrip().endswith("."):
            flush(i)

    if buf_start is not None:
        if not _balanced(buf_text):
            raise ParseError(Diagnostic(
                "error", "Syntax", "unbalanced parentheses in expression",
                span=line_span(buf_start)))
        flush(len(lines) - 1)

    if expr is None or name is None:
        raise ParseError(Diagnostic(
            "error", "Syntax", "script contains no 'name := expression' statement",
            span=SourceSpan(1, 1, 0, 0)))

    objective: Objective | None = None
    if avail_pct is None and lat is None:
        diags.append(Diagnostic(
            "warning", "NoObjective", "script declares no objective", path="root"))
    else:
        objective = Objective.build(
            availability_percent=avail_pct,
            latency_percentile=lat[0] if lat else None,
            latency_threshold_ms=lat[1] if lat else None,
        )
    return ParsedScript(name, expr, objective, diags)
