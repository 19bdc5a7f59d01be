"""The ``.tm`` text format: parser and canonical serializer.

One file carries a static model and optionally its regions, events, behavior,
wap constraints and stimulus scenarios::

    model "heart transplant"

    thimac Living "living human" {
      create "there is a living person" @2
      thimac Heart {
        release @5
        transfer @6
      }
    }
    flow Living.create -> Living.Heart.release -> Living.Heart.transfer
    trigger Living.Heart.transfer --> Deceased.Heart.release
    region C1 { Living.create }
    event E1 region C1 duration 2 ms
    behavior { repeat E1  branch E1 { when speed >= 20 -> E2 else -> skip } }
    wap E1.finish - E1.start <= 5 ms warn W1
    scenario crash { tick 0 ms { speed = 25  delay E1 6 ms } }

``#`` starts a line comment. Line breaks carry no meaning.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator

from .changes import Region, check_regions, ChangePartition
from .document import Document
from .errors import BuildError, TMError
from .events import (
    UNIT_US,
    Anchor,
    Arm,
    BehaviorSpec,
    Branch,
    Comparison,
    DynamicModel,
    EventSpec,
    GuardExpr,
    InstantRef,
    TimeValue,
    WapConstraint,
)
from .model import (
    STAGE_KEYWORDS,
    FlowDecl,
    StageDecl,
    StageKind,
    StaticModel,
    ThimacDecl,
    TriggerDecl,
    build_model,
)
from .simulator import Scenario, Tick

MAX_ERRORS = 20
MAX_NESTING = 100


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int
    column: int
    length: int = 1

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


@dataclass(frozen=True)
class ParseError:
    span: SourceSpan
    expected: str
    found: str
    code: str = "Syntax"

    def __str__(self) -> str:
        if self.code == "Syntax":
            return f"{self.span}: expected {self.expected}, found {self.found}"
        return f"{self.span}: {self.code}: {self.expected} ({self.found})"


class TMParseError(TMError):
    def __init__(self, errors):
        self.errors = list(errors)[:MAX_ERRORS]
        super().__init__("\n".join(str(e) for e in self.errors))


# --- lexer -------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<badstring>"[^\n]*)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<sym>-->|->|<=|>=|==|[{},.@=<>\-])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | string | int | float | sym | eof
    text: str
    span: SourceSpan
    value: object = None

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return repr(self.text)


def _unescape(body: str) -> str:
    return re.sub(r"\\(.)", lambda m: _ESCAPES.get(m.group(1), m.group(1)), body)


def tokenize(text: str, file: str = "<input>") -> tuple[list[Token], list[ParseError]]:
    tokens: list[Token] = []
    errors: list[ParseError] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        span = SourceSpan(file, line, pos - line_start + 1, 1)
        if m is None:
            errors.append(ParseError(span, "a token", repr(text[pos])))
            pos += 1
            continue
        kind, raw = m.lastgroup, m.group()
        span = SourceSpan(file, line, pos - line_start + 1, len(raw))
        if kind == "string":
            tokens.append(Token("string", raw, span, _unescape(raw[1:-1])))
        elif kind == "badstring":
            errors.append(ParseError(span, "closing quote", "end of line"))
        elif kind == "number":
            if re.fullmatch(r"\d+", raw):
                tokens.append(Token("int", raw, span, int(raw)))
            else:
                tokens.append(Token("float", raw, span, float(raw)))
        elif kind in ("ident", "sym"):
            tokens.append(Token(kind, raw, span))
        newlines = raw.count("\n")
        if newlines:
            line += newlines
            line_start = pos + raw.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", SourceSpan(file, line, pos - line_start + 1, 0)))
    return tokens, errors


# --- parser ------------------------------------------------------------------


class _Bail(Exception):
    pass


_TOP_KEYWORDS = {"thimac", "flow", "trigger", "region", "event", "behavior", "wap", "scenario"}


@dataclass
class _Decls:
    name: str = ""
    model_span: SourceSpan | None = None
    model: list = field(default_factory=list)
    regions: list[Region] = field(default_factory=list)
    events: list[EventSpec] = field(default_factory=list)
    behavior: list = field(default_factory=list)  # (kind, payload, span)
    has_behavior: bool = False
    constraints: list[WapConstraint] = field(default_factory=list)
    scenarios: list[Scenario] = field(default_factory=list)


class _Parser:
    def __init__(self, tokens: list[Token], errors: list[ParseError]):
        self.toks = tokens
        self.i = 0
        self.errors = errors
        self.out = _Decls()

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "ident") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, expected: str):
        self.errors.append(ParseError(self.tok.span, expected, self.tok.describe()))
        raise _Bail

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            self.fail(what)
        return self.advance()

    def integer(self) -> int:
        if self.tok.kind != "int":
            self.fail("integer")
        return self.advance().value

    def number(self):
        neg = False
        if self.at("-"):
            self.advance()
            neg = True
        if self.tok.kind not in ("int", "float"):
            self.fail("number")
        v = self.advance().value
        return -v if neg else v

    def time(self) -> TimeValue:
        mag = self.integer()
        if self.tok.kind != "ident" or self.tok.text not in UNIT_US:
            self.fail("time unit (us, ms, s)")
        return TimeValue(mag, self.advance().text)

    def recover(self) -> None:
        """Skip to the next top-level keyword outside any brace block."""
        depth = 0
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind == "sym" and t.text == "{":
                depth += 1
            elif t.kind == "sym" and t.text == "}":
                depth = max(depth - 1, 0)
                if depth == 0:
                    self.advance()
                    if self.tok.kind == "ident" and self.tok.text in _TOP_KEYWORDS:
                        return
                    continue
            elif depth == 0 and t.kind == "ident" and t.text in _TOP_KEYWORDS and self.i > 0:
                return
            self.advance()

    # grammar
    def parse(self) -> _Decls:
        try:
            span = self.expect("model").span
            if self.tok.kind != "string":
                self.fail("model name string")
            self.out.name = self.advance().value
            self.out.model_span = span
        except _Bail:
            self.recover()
        while self.tok.kind != "eof" and len(self.errors) < MAX_ERRORS:
            start = self.i
            try:
                self.item()
            except _Bail:
                if self.i == start:
                    self.advance()
                self.recover()
        return self.out

    def item(self) -> None:
        t = self.tok
        handler = {
            "thimac": lambda: self.thimac(None),
            "flow": self.flow,
            "trigger": self.trigger,
            "region": self.region,
            "event": self.event,
            "behavior": self.behavior,
            "wap": self.wap,
            "scenario": self.scenario,
        }.get(t.text if t.kind == "ident" else None)
        if handler is None:
            self.fail("a declaration (" + ", ".join(sorted(_TOP_KEYWORDS)) + ")")
        handler()

    def thimac(self, parent: str | None) -> None:
        if parent is not None and parent.count(".") >= MAX_NESTING:
            self.fail(f"at most {MAX_NESTING} levels of thimac nesting")
        self.expect("thimac")
        name_tok = self.ident("thimac name")
        if name_tok.text in STAGE_KEYWORDS:
            self.errors.append(ParseError(name_tok.span, "thimac name", f"stage keyword {name_tok.text!r}"))
        tid = f"{parent}.{name_tok.text}" if parent else name_tok.text
        display = self.advance().value if self.tok.kind == "string" else None
        self.out.model.append(ThimacDecl(tid, display, name_tok.span))
        self.expect("{")
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("'}'")
            if self.at("thimac"):
                self.thimac(tid)
            elif self.tok.kind == "ident" and self.tok.text in STAGE_KEYWORDS:
                kt = self.advance()
                label = self.advance().value if self.tok.kind == "string" else None
                anchor = None
                if self.at("@"):
                    self.advance()
                    anchor = self.integer()
                self.out.model.append(StageDecl(tid, StageKind.parse(kt.text), label, anchor, kt.span))
            else:
                self.fail("stage kind or nested thimac")
        self.advance()

    def path(self) -> tuple[str, SourceSpan]:
        # a keyword here means the statement was cut short; leave it for recovery
        if self.tok.kind == "ident" and self.tok.text in _TOP_KEYWORDS and not self.peek().text == ".":
            self.fail("stage path")
        first = self.ident("stage path")
        parts = [first.text]
        while self.at("."):
            self.advance()
            parts.append(self.ident("path segment").text)
        if len(parts) < 2 or parts[-1] not in STAGE_KEYWORDS:
            self.errors.append(
                ParseError(first.span, "path ending in a stage kind", ".".join(parts))
            )
            raise _Bail
        return ".".join(parts), first.span

    def flow(self) -> None:
        self.expect("flow")
        src, span = self.path()
        self.expect("->")
        while True:
            dst, _ = self.path()
            self.out.model.append(FlowDecl(src, dst, span))
            if not self.at("->"):
                break
            self.advance()
            src = dst

    def trigger(self) -> None:
        span = self.expect("trigger").span
        src, _ = self.path()
        self.expect("-->")
        dst, _ = self.path()
        join = None
        if self.at("join"):
            self.advance()
            join = self.ident("join group name").text
        self.out.model.append(TriggerDecl(src, dst, join, span))

    def region(self) -> None:
        self.expect("region")
        name = self.ident("region name")
        self.expect("{")
        stages = [self.path()[0]]
        while self.at(","):
            self.advance()
            stages.append(self.path()[0])
        self.expect("}")
        self.out.regions.append(Region(name.text, frozenset(stages), name.span))

    def event(self) -> None:
        self.expect("event")
        name = self.ident("event name")
        self.expect("region")
        region = self.ident("region name").text
        duration = None
        if self.at("duration"):
            self.advance()
            duration = self.time()
        self.out.events.append(EventSpec(name.text, region, duration, name.span))

    def behavior(self) -> None:
        self.expect("behavior")
        self.out.has_behavior = True
        self.expect("{")
        while not self.at("}"):
            if self.tok.kind == "eof":
                self.fail("'}'")
            if self.at("repeat") and self.peek().kind == "ident":
                self.advance()
                t = self.ident("event name")
                self.out.behavior.append(("repeat", t.text, t.span))
            elif self.at("branch") and self.peek().kind == "ident":
                self.branch()
            else:
                a = self.ident("behavior edge, repeat or branch")
                self.expect("->")
                b = self.ident("event name")
                self.out.behavior.append(("edge", (a.text, b.text), a.span))
        self.advance()

    def branch(self) -> None:
        self.expect("branch")
        at = self.ident("event name")
        self.expect("{")
        arms = []
        else_skip = False
        while True:
            if self.at("else"):
                self.advance()
                self.expect("->")
                self.expect("skip")
                else_skip = True
                break
            self.expect("when")
            guard = self.guard()
            self.expect("->")
            arms.append(Arm(guard, self.ident("event name").text))
            if self.at(","):
                self.advance()
                continue
            if not self.at("else"):
                break
        if not arms:
            self.fail("'when' arm")
        self.expect("}")
        self.out.behavior.append(("branch", Branch(at.text, tuple(arms), else_skip, at.span), at.span))

    def guard(self) -> GuardExpr:
        terms = [self.comparison()]
        while self.at("and"):
            self.advance()
            terms.append(self.comparison())
        return GuardExpr(tuple(terms))

    def comparison(self) -> Comparison:
        name = self.ident("measurement name").text
        if not (self.tok.kind == "sym" and self.tok.text in ("<", "<=", ">", ">=", "==")):
            self.fail("comparison operator")
        op = self.advance().text
        return Comparison(name, op, self.number())

    def instant(self) -> InstantRef:
        ev = self.ident("event name").text
        self.expect(".")
        if not (self.at("start") or self.at("finish")):
            self.fail("'start' or 'finish'")
        return InstantRef(ev, Anchor(self.advance().text))

    def wap(self) -> None:
        span = self.expect("wap").span
        later = self.instant()
        self.expect("-")
        earlier = self.instant()
        self.expect("<=")
        bound_span = self.tok.span
        bound = self.time()
        warning = f"wap_{later.event}"
        if self.at("warn"):
            self.advance()
            warning = self.ident("warning id").text
        if bound.us <= 0:
            self.errors.append(ParseError(bound_span, "positive wap bound", str(bound)))
            raise _Bail
        self.out.constraints.append(WapConstraint(earlier, later, bound, warning, span))

    def scenario(self) -> None:
        self.expect("scenario")
        name = self.ident("scenario name")
        self.expect("{")
        ticks = []
        while not self.at("}"):
            self.expect("tick")
            when = self.time()
            self.expect("{")
            measurements: dict[str, float] = {}
            delays: dict[str, TimeValue] = {}
            while not self.at("}"):
                if self.at("delay") and self.peek().kind == "ident":
                    self.advance()
                    ev = self.ident("event name").text
                    delays[ev] = self.time()
                else:
                    key = self.ident("measurement name or 'delay'").text
                    self.expect("=")
                    measurements[key] = self.number()
                if self.at(","):
                    self.advance()
            self.advance()
            ticks.append(Tick(when, measurements, delays))
        self.advance()
        self.out.scenarios.append(Scenario(name.text, tuple(ticks), name.span))


def _span_or(span, fallback: SourceSpan) -> SourceSpan:
    return span if isinstance(span, SourceSpan) else fallback


def _assemble(d: _Decls, file: str) -> tuple[Document | None, list[ParseError]]:
    errors: list[ParseError] = []
    top = d.model_span or SourceSpan(file, 1, 1, 0)

    def err(span, code, what, found):
        errors.append(ParseError(_span_or(span, top), what, found, code))

    try:
        model = build_model(d.model, d.name)
    except BuildError as exc:
        for diag in exc.diagnostics:
            if diag.severity == "error":
                err(diag.span, diag.code, diag.message, diag.location)
        return None, errors

    partition = None
    if d.regions or d.events:
        for diag in check_regions(model, d.regions):
            err(diag.span, diag.code, diag.message, diag.location)
        partition = ChangePartition(model, tuple(d.regions))

    region_ids = {r.id for r in d.regions}
    dynamic = None
    if d.events:
        seen_regions: dict[str, str] = {}
        seen_ids: set[str] = set()
        for ev in d.events:
            if ev.region not in region_ids:
                err(ev.span, "UnknownRegion", f"event {ev.id} names an undeclared region", ev.region)
            elif ev.region in seen_regions:
                err(ev.span, "DuplicateEventForRegion", f"region already lifted to {seen_regions[ev.region]}", ev.id)
            else:
                seen_regions[ev.region] = ev.id
            if ev.id in seen_ids:
                err(ev.span, "DuplicateId", "event declared twice", ev.id)
            seen_ids.add(ev.id)
        dynamic = DynamicModel(partition, tuple(d.events))
    event_ids = {ev.id for ev in d.events}

    def known(eid, span):
        if eid not in event_ids:
            err(span, "UnknownEvent", "reference to an undeclared event", eid)

    behavior = None
    if d.has_behavior:
        edges, repeats, branches = [], [], []
        for kind, payload, span in d.behavior:
            if kind == "edge":
                known(payload[0], span)
                known(payload[1], span)
                if payload not in edges:
                    edges.append(payload)
            elif kind == "repeat":
                known(payload, span)
                if payload not in repeats:
                    repeats.append(payload)
            else:
                known(payload.at, span)
                for arm in payload.arms:
                    known(arm.to, span)
                branches.append(payload)
        behavior = BehaviorSpec(tuple(sorted(edges)), tuple(sorted(repeats)), tuple(branches))

    for c in d.constraints:
        known(c.earlier.event, c.span)
        known(c.later.event, c.span)

    scenarios: dict[str, Scenario] = {}
    for sc in d.scenarios:
        if sc.name in scenarios:
            err(sc.span, "DuplicateId", "scenario declared twice", sc.name)
        scenarios[sc.name] = sc
        try:
            sc.check()
        except TMError as exc:
            err(sc.span, "ScenarioError", str(exc), sc.name)
        for tick in sc.ticks:
            for ev in tick.delays:
                known(ev, sc.span)

    if errors:
        return None, errors
    return (
        Document(model, partition, dynamic, behavior, tuple(d.constraints), scenarios),
        errors,
    )


def parse(text: str, file: str = "<input>") -> Document:
    """Parse ``.tm`` source into a ``Document``.

    Raises ``TMParseError`` carrying up to 20 ``ParseError`` records. Build
    and reference errors come back the same way, tagged with their code.
    """
    tokens, errors = tokenize(text, file)
    decls = _Parser(tokens, errors).parse()
    if errors:
        raise TMParseError(errors)
    doc, errors = _assemble(decls, file)
    if errors:
        raise TMParseError(errors)
    return doc


def parse_scenarios(text: str, file: str = "<input>") -> dict[str, Scenario]:
    """Parse a file holding only ``scenario`` sections."""
    tokens, errors = tokenize(text, file)
    p = _Parser(tokens, errors)
    while p.tok.kind != "eof" and len(errors) < MAX_ERRORS:
        start = p.i
        try:
            if not p.at("scenario"):
                p.fail("'scenario'")
            p.scenario()
        except _Bail:
            if p.i == start:
                p.advance()
            p.recover()
    out: dict[str, Scenario] = {}
    for sc in p.out.scenarios:
        try:
            sc.check()
        except TMError as exc:
            errors.append(ParseError(sc.span, str(exc), sc.name, "ScenarioError"))
        if sc.name in out:
            errors.append(ParseError(sc.span, "scenario declared twice", sc.name, "DuplicateId"))
        out[sc.name] = sc
    if errors:
        raise TMParseError(errors)
    return out


# --- serializer --------------------------------------------------------------

HEADER = "# tmkit canonical form"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


def _num(v) -> str:
    return repr(v)


def _time(t: TimeValue) -> str:
    return f"{t.magnitude} {t.unit}"


def _thimac_lines(model: StaticModel, tid: str, depth: int) -> Iterator[str]:
    t = model.thimacs[tid]
    pad = "  " * depth
    short = tid.split(".")[-1]
    head = f"{pad}thimac {short}"
    if t.name != short:
        head += " " + _quote(t.name)
    yield head + " {"
    for sid in sorted(t.stages, key=lambda s: model.stages[s].kind.order):
        st = model.stages[sid]
        line = f"{pad}  {st.kind.value}"
        if st.label is not None:
            line += " " + _quote(st.label)
        if st.anchor is not None:
            line += f" @{st.anchor}"
        yield line
    for child in t.children:
        yield from _thimac_lines(model, child, depth + 1)
    yield pad + "}"


def serialize_scenario(sc: Scenario) -> list[str]:
    lines = [f"scenario {sc.name} {{"]
    for tick in sc.ticks:
        lines.append(f"  tick {_time(tick.time)} {{")
        for key, val in tick.measurements.items():
            lines.append(f"    {key} = {_num(val)}")
        for ev, t in tick.delays.items():
            lines.append(f"    delay {ev} {_time(t)}")
        lines.append("  }")
    lines.append("}")
    return lines


def serialize(
    model: StaticModel | Document,
    partition: ChangePartition | None = None,
    dynamic: DynamicModel | None = None,
) -> str:
    """Canonical text for a model or a whole document; deterministic."""
    if isinstance(model, Document):
        doc = model
    else:
        doc = Document(model, partition, dynamic)
    m = doc.model
    lines = [HEADER, f"model {_quote(m.name)}"]

    def section(body: list[str]):
        if body:
            lines.append("")
            lines.extend(body)

    body: list[str] = []
    for root in m.roots():
        body.extend(_thimac_lines(m, root, 0))
    section(body)
    section([f"flow {e.src} -> {e.dst}" for e in sorted(m.flows)])
    section([str(t) for t in sorted(m.triggers, key=lambda t: t.sort_key())])
    if doc.partition is not None:
        section([f"region {r.id} {{ {', '.join(sorted(r.stages))} }}" for r in doc.partition.regions])
    if doc.dynamic is not None:
        section(
            [
                f"event {e.id} region {e.region}" + (f" duration {_time(e.duration)}" if e.duration else "")
                for e in doc.dynamic.events
            ]
        )
    if doc.behavior is not None:
        b = doc.behavior
        body = ["behavior {"]
        body += [f"  {a} -> {c}" for a, c in sorted(b.edges)]
        body += [f"  repeat {e}" for e in sorted(b.repeats)]
        for br in b.branches:
            body.append(f"  branch {br.at} {{")
            arms = [f"    when {arm.guard} -> {arm.to}" for arm in br.arms]
            body.append(",\n".join(arms))
            if br.else_skip:
                body.append("    else -> skip")
            body.append("  }")
        body.append("}")
        section(body)
    section(
        [
            f"wap {c.later} - {c.earlier} <= {_time(c.max_separation)} warn {c.warning_id}"
            for c in doc.constraints
        ]
    )
    for sc in doc.scenarios.values():
        section(serialize_scenario(sc))
    return "\n".join(lines) + "\n"

