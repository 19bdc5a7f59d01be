"""``tmkit`` command line.

Exit codes: 0 success, 1 findings (errors, or warnings under ``--strict``),
2 usage or IO problems.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from pathlib import Path
from typing import Sequence, TextIO

from .changes import OrderClass, classify_pair, enumerate_chronologies, weak_components
from .document import Document
from .dsl import TMParseError, parse, parse_scenarios
from .errors import TMError
from .events import TimeValue
from .exporters import ExportOptions, Target, to_dot, to_json
from .model import validate
from .simulator import format_trace

OK, FINDINGS, USAGE = 0, 1, 2

_TIME_RE = re.compile(r"^\s*(\d+)\s*(us|ms|s)?\s*$")
_SYMBOL = {OrderClass.BEFORE: "<", OrderClass.AFTER: ">", OrderClass.UNORDERED: "|"}


class _UsageError(Exception):
    pass


def _color_enabled() -> bool:
    return os.environ.get("TMKIT_COLOR", "0") == "1"


def _paint(text: str, code: str) -> str:
    return f"\x1b[{code}m{text}\x1b[0m" if _color_enabled() else text


def parse_time(text: str) -> TimeValue:
    """``"5ms"``, ``"5 ms"`` or a bare integer of microseconds."""
    m = _TIME_RE.match(text)
    if not m:
        raise argparse.ArgumentTypeError(f"not a time value: {text!r} (use e.g. 5ms, 250us, 1s)")
    return TimeValue(int(m.group(1)), m.group(2) or "us")


def _load(path: str) -> Document:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse(text, path)


class _App:
    def __init__(self, args: argparse.Namespace, out: TextIO, err: TextIO):
        self.args = args
        self.out = out
        self.err = err

    def say(self, line: str = "") -> None:
        print(line, file=self.out)

    def complain(self, line: str) -> None:
        print(line, file=self.err)

    def validate(self) -> int:
        try:
            doc = _load(self.args.file)
        except TMParseError as exc:
            for e in exc.errors:
                self.say(_paint("error", "31") + f" {e}")
            self.say(f"{len(exc.errors)} errors")
            return FINDINGS
        diags = validate(doc.model)
        for d in diags:
            color = "31" if d.severity == "error" else "33"
            self.say(_paint(d.severity, color) + f" {d.code} {d.location}: {d.message}")
        errors = sum(d.severity == "error" for d in diags)
        warnings = len(diags) - errors
        self.say(f"{errors} errors, {warnings} warnings")
        if errors or (self.args.strict and warnings):
            return FINDINGS
        return OK

    def changes(self) -> int:
        doc = _load(self.args.file)
        part = doc.regions_or_empty()
        width = max((len(r.id) for r in part.regions), default=6)
        self.say(f"{'region'.ljust(width)}  stages  connected")
        m = doc.model
        for r in part.regions:
            inner = [(e.src, e.dst) for e in m.flows if e.src in r.stages and e.dst in r.stages]
            parts = weak_components(sorted(r.stages), inner)
            flag = "yes" if len(parts) == 1 else f"no ({len(parts)} parts)"
            self.say(f"{r.id.ljust(width)}  {len(r.stages):>6}  {flag}")
            for sid in sorted(r.stages):
                self.say(f"  {sid}")
        loose = part.unassigned()
        self.say(f"unassigned stages: {len(loose)}")
        for sid in loose:
            self.say(f"  {sid}")
        return OK

    def order(self) -> int:
        doc = _load(self.args.file)
        dag = doc.precedence(allow_multi=True)
        comps = weak_components(dag.nodes, dag.pairs)
        for e in sorted(dag.edges):
            self.say(f"{e.before} -> {e.after} ({e.cause.value})")
        if not dag.nodes:
            self.say("no regions")
            return OK
        width = max(len(n) for n in dag.nodes)
        self.say("")
        self.say(" " * width + "  " + " ".join(n.rjust(width) for n in dag.nodes))
        for a in dag.nodes:
            cells = ["=" if a == b else _SYMBOL[classify_pair(dag, a, b)] for b in dag.nodes]
            self.say(a.ljust(width) + "  " + " ".join(c.rjust(width) for c in cells))
        if len(comps) > 1:
            self.say(_paint("warning", "33") + f" MULTI_COMPONENT: {len(comps)} unconnected groups of changes")
            if self.args.strict:
                return FINDINGS
        return OK

    def chronologies(self) -> int:
        doc = _load(self.args.file)
        dag = doc.precedence(allow_multi=self.args.allow_multi)
        seqs, total = enumerate_chronologies(dag, limit=self.args.limit, exact=False)
        for seq in seqs:
            self.say(" ".join(seq))
        if total is None:
            self.say(f"total: more than {len(seqs)} (too many nodes to count exactly)")
        else:
            if total > len(seqs):
                self.say(f"... {total - len(seqs)} more")
            self.say(f"total: {total}")
        return OK

    def simulate(self) -> int:
        doc = _load(self.args.file)
        scenarios = dict(doc.scenarios)
        for path in self.args.scenario_file or ():
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise _UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
            scenarios.update(parse_scenarios(text, path))
        if self.args.scenario not in scenarios:
            known = ", ".join(sorted(scenarios)) or "none"
            raise _UsageError(f"no scenario named {self.args.scenario!r} (available: {known})")
        trace = doc.simulate(scenarios[self.args.scenario], self.args.horizon, allow_multi=True)
        text = format_trace(trace)
        if trace.warnings:
            text = text.replace("WARN ", _paint("WARN", "33") + " ")
        self.out.write(text)
        if self.args.strict and trace.warnings:
            return FINDINGS
        return OK

    def export(self) -> int:
        doc = _load(self.args.file)
        if self.args.format == "json":
            text = to_json(doc)
        else:
            opts = ExportOptions(Target(self.args.target), not self.args.no_anchors, self.args.rankdir)
            text = to_dot(doc, opts)
        if self.args.output:
            try:
                Path(self.args.output).write_text(text, encoding="utf-8")
            except OSError as exc:
                raise _UsageError(f"cannot write {self.args.output}: {exc.strerror or exc}") from exc
        else:
            self.out.write(text)
        return OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tmkit", description="Analyse, simulate and export thinging-machine models.")
    p.add_argument("--strict", action="store_true", help="treat warnings as errors")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def cmd(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("file", metavar="FILE", help=".tm model file")
        sp.add_argument("--strict", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
        return sp

    cmd("validate", "check the static model and list diagnostics")
    cmd("changes", "list regions and their connectivity")
    cmd("order", "precedence edges and pairwise order matrix")
    sp = cmd("chronologies", "enumerate linear extensions of the change order")
    sp.add_argument("--limit", type=int, default=1000, help="maximum sequences to print (default 1000)")
    sp.add_argument("--allow-multi", action="store_true", help="accept disconnected precedence graphs")
    sp = cmd("simulate", "run a scenario and print the trace")
    sp.add_argument("--scenario", required=True, metavar="NAME")
    sp.add_argument("--horizon", type=parse_time, default=TimeValue(1, "s"), metavar="T", help="default 1s")
    sp.add_argument("--scenario-file", action="append", metavar="PATH", help="extra file of scenario sections")
    sp = cmd("export", "write DOT or JSON")
    sp.add_argument("--format", choices=("dot", "json"), required=True)
    sp.add_argument("--target", choices=[t.value for t in Target], default="static")
    sp.add_argument("--rankdir", choices=("LR", "TB"), default="LR")
    sp.add_argument("--no-anchors", action="store_true", help="omit @N anchors from stage labels")
    sp.add_argument("-o", "--output", metavar="OUT")
    return p


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code else OK
    if args.command == "chronologies" and args.limit < 1:
        print("tmkit: --limit must be at least 1", file=err)
        return USAGE
    app = _App(args, out, err)
    try:
        return getattr(app, args.command)()
    except _UsageError as exc:
        app.complain(f"tmkit: {exc}")
        return USAGE
    except TMParseError as exc:
        for e in exc.errors:
            app.complain(f"error {e}")
        return FINDINGS
    except TMError as exc:
        app.complain(f"tmkit: {type(exc).__name__}: {exc}")
        return FINDINGS


if __name__ == "__main__":
    sys.exit(main())
