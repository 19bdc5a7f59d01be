"""Bundled example models and their frozen golden outputs.

Each entry pairs a ``.tm`` model with what it must produce: diagnostics,
precedence edges, chronology count, DOT/JSON exports and scenario traces.
``corpus_check`` re-derives all of it and reports mismatches.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..changes import enumerate_chronologies
from ..document import Document
from ..dsl import parse, parse_scenarios
from ..events import TimeValue
from ..exporters import ExportOptions, Target, to_dot, to_json
from ..model import validate
from ..simulator import Scenario, format_trace

CORPUS_DIR = Path(__file__).resolve().parent
GOLDEN_DIR = CORPUS_DIR / "golden"
HORIZON = TimeValue(1, "s")


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    model_file: str
    expected_diagnostics: tuple[str, ...] = ()
    expected_edges: frozenset[tuple[str, str, str]] = frozenset()
    expected_chronologies: int = 1
    scenario_files: tuple[str, ...] = ()

    @property
    def path(self) -> Path:
        return CORPUS_DIR / self.model_file


ENTRIES = (
    CorpusEntry(
        "heart",
        "heart.tm",
        expected_edges=frozenset(
            {
                ("C1", "C3", "flow"),
                ("C1", "C4", "flow"),
                ("C2", "C4", "flow"),
                ("C3", "C4", "trigger"),
            }
        ),
        expected_chronologies=3,
    ),
    CorpusEntry(
        "car",
        "car.tm",
        expected_edges=frozenset(
            {
                ("enter", "start_signal", "trigger"),
                ("start_signal", "started", "flow"),
                ("started", "move_signal", "trigger"),
                ("move_signal", "moving", "flow"),
                ("moving", "to_traffic", "trigger"),
                ("to_traffic", "traffic_stop", "flow"),
                ("traffic_stop", "to_garage", "flow"),
                ("to_garage", "garage_stop", "flow"),
                ("garage_stop", "leave", "trigger"),
                ("enter", "leave", "flow"),
            }
        ),
        expected_chronologies=1,
    ),
    CorpusEntry(
        "airbag",
        "airbag.tm",
        expected_edges=frozenset(
            {
                ("speed", "decision", "trigger"),
                ("angle", "decision", "trigger"),
                ("frontal", "decision", "trigger"),
                ("decision", "activation", "flow"),
                ("speed", "speed_warning", "trigger"),
                ("angle", "angle_warning", "trigger"),
                ("frontal", "frontal_warning", "trigger"),
            }
        ),
        expected_chronologies=630,
        scenario_files=("scenarios/airbag_boundary.tm", "scenarios/airbag_no_crash.tm"),
    ),
)


def entry(name: str) -> CorpusEntry:
    for e in ENTRIES:
        if e.name == name:
            return e
    raise KeyError(name)


def load(name: str) -> Document:
    e = entry(name)
    return parse(e.path.read_text(encoding="utf-8"), e.model_file)


def scenarios(name: str) -> dict[str, Scenario]:
    """Inline scenarios of a model followed by those in its scenario files."""
    e = entry(name)
    out = dict(load(name).scenarios)
    for rel in e.scenario_files:
        out.update(parse_scenarios((CORPUS_DIR / rel).read_text(encoding="utf-8"), rel))
    return out


def render_goldens(name: str) -> dict[str, str]:
    """Golden file name -> expected content, derived from the model file."""
    doc = load(name)
    out = {f"{name}.json": to_json(doc)}
    for target in Target:
        out[f"{name}.{target.value}.dot"] = to_dot(doc, ExportOptions(target))
    for sname, sc in scenarios(name).items():
        out[f"{name}.{sname}.trace"] = format_trace(doc.simulate(sc, HORIZON))
    return out


def regenerate_goldens(directory: Path = GOLDEN_DIR) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for e in ENTRIES:
        for fname, text in render_goldens(e.name).items():
            path = directory / fname
            path.write_text(text, encoding="utf-8")
            written.append(path)
    return written


@dataclass
class EntryResult:
    name: str
    mismatches: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def __str__(self) -> str:
        head = f"{'PASS' if self.ok else 'FAIL'} {self.name}"
        return "\n".join([head] + [f"  {m}" for m in self.mismatches])


def check_entry(e: CorpusEntry, golden_dir: Path = GOLDEN_DIR) -> EntryResult:
    res = EntryResult(e.name)
    try:
        doc = load(e.name)
    except Exception as exc:  # report, don't abort the whole check
        res.mismatches.append(f"model does not load: {exc}")
        return res
    codes = tuple(sorted(d.code for d in validate(doc.model)))
    if codes != tuple(sorted(e.expected_diagnostics)):
        res.mismatches.append(f"diagnostics {codes} != expected {e.expected_diagnostics}")
    dag = doc.precedence()
    edges = frozenset((p.before, p.after, p.cause.value) for p in dag.edges)
    if edges != e.expected_edges:
        res.mismatches.append(
            f"precedence: missing {sorted(e.expected_edges - edges)}, unexpected {sorted(edges - e.expected_edges)}"
        )
    _, total = enumerate_chronologies(dag, limit=1)
    if total != e.expected_chronologies:
        res.mismatches.append(f"chronologies {total} != expected {e.expected_chronologies}")
    for fname, text in render_goldens(e.name).items():
        path = golden_dir / fname
        if not path.exists():
            res.mismatches.append(f"golden {fname} missing")
        elif path.read_text(encoding="utf-8") != text:
            res.mismatches.append(f"golden {fname} differs from re-export")
    return res


def corpus_check(golden_dir: Path = GOLDEN_DIR) -> list[EntryResult]:
    return [check_entry(e, golden_dir) for e in ENTRIES]


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="python -m tmkit.corpus", description="Check or regenerate corpus goldens.")
    p.add_argument("--regenerate", action="store_true", help="rewrite golden files from the models")
    args = p.parse_args(argv)
    if args.regenerate:
        for path in regenerate_goldens():
            print(f"wrote {path.relative_to(CORPUS_DIR)}")
        return 0
    results = corpus_check()
    for r in results:
        print(r)
    return 0 if all(r.ok for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
