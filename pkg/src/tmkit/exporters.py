"""DOT and JSON renderings of a model bundle.

A bundle is a ``Document`` (or a bare ``StaticModel``). DOT output is meant
for graphviz; layout is left to it. JSON is a flat, versioned interchange
format that round-trips to an equal ``Document``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Any

from .changes import Region, build_partition
from .document import Document
from .errors import BuildError, MalformedJson, SchemaVersionMismatch, TMError
from .events import (
    Anchor,
    Arm,
    BehaviorSpec,
    Branch,
    Comparison,
    EventSpec,
    GuardExpr,
    InstantRef,
    TimeValue,
    WapConstraint,
    lift_to_events,
)
from .model import FlowDecl, StageDecl, StageKind, StaticModel, ThimacDecl, TriggerDecl, build_model
from .simulator import Scenario, Tick, trace_to_json

__all__ = ["ExportOptions", "Target", "SCHEMA_VERSION", "to_dot", "to_json", "from_json", "trace_to_json"]

SCHEMA_VERSION = 1

# Pastel fills, cycled by region/event position.
PALETTE = (
    "#fde2e4", "#d7e3fc", "#e2f0cb", "#fff1c1", "#e8d7f1",
    "#c9f2ef", "#ffd8be", "#dfe7fd", "#f1e4c3", "#cde8d6",
)


class Target(enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"
    BEHAVIOR = "behavior"


@dataclass(frozen=True)
class ExportOptions:
    target: Target = Target.STATIC
    show_anchors: bool = True
    rankdir: str = "LR"

    def __post_init__(self):
        if isinstance(self.target, str):
            object.__setattr__(self, "target", Target(self.target.lower()))
        if self.rankdir not in ("LR", "TB"):
            raise ValueError(f"rankdir must be LR or TB, not {self.rankdir!r}")


def _bundle(x: Document | StaticModel) -> Document:
    return x if isinstance(x, Document) else Document(x)


# --- DOT ---------------------------------------------------------------------


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _stage_label(model: StaticModel, sid: str, show_anchors: bool) -> str:
    st = model.stages[sid]
    text = st.kind.value
    if st.label:
        text += "\n" + st.label
    if show_anchors and st.anchor is not None:
        text += f"\n({st.anchor})"
    return text


class _Dot:
    def __init__(self, name: str, rankdir: str):
        self.lines = [f"digraph {_q(name)} {{", f"  graph [rankdir={rankdir}, compound=true];"]
        self.depth = 1

    def add(self, text: str) -> None:
        self.lines.append("  " * self.depth + text)

    def open(self, cid: str, label: str, extra: str = "") -> None:
        self.add(f"subgraph {_q('cluster_' + cid)} {{")
        self.depth += 1
        self.add(f"label={_q(label)};")
        if extra:
            self.add(extra)

    def close(self) -> None:
        self.depth -= 1
        self.add("}")

    def text(self) -> str:
        return "\n".join(self.lines + ["}"]) + "\n"


def _edges(out: _Dot, model: StaticModel) -> None:
    for e in sorted(model.flows):
        out.add(f"{_q(e.src)} -> {_q(e.dst)};")
    for t in sorted(model.triggers, key=lambda t: t.sort_key()):
        attrs = "style=dashed"
        if t.join:
            attrs += f", label={_q('join ' + t.join)}"
        out.add(f"{_q(t.src)} -> {_q(t.dst)} [{attrs}];")


def _static_dot(doc: Document, opts: ExportOptions) -> str:
    m = doc.model
    out = _Dot(m.name, opts.rankdir)
    out.add("node [shape=box, fontsize=10];")
    fill = {}
    if doc.partition is not None:
        for i, r in enumerate(doc.partition.regions):
            for sid in r.stages:
                fill[sid] = (r.id, PALETTE[i % len(PALETTE)])

    def thimac(tid: str) -> None:
        t = m.thimacs[tid]
        out.open(tid, t.name)
        for sid in t.stages:
            attrs = [f"label={_q(_stage_label(m, sid, opts.show_anchors))}"]
            if sid in fill:
                rid, color = fill[sid]
                attrs += ["style=filled", f"fillcolor={_q(color)}", f"tooltip={_q('region ' + rid)}"]
            out.add(f"{_q(sid)} [{', '.join(attrs)}];")
        for child in t.children:
            thimac(child)
        out.close()

    for root in m.roots():
        thimac(root)
    _edges(out, m)
    return out.text()


def _dynamic_dot(doc: Document, opts: ExportOptions) -> str:
    m = doc.model
    out = _Dot(m.name, opts.rankdir)
    out.add("node [shape=box, fontsize=10];")
    dynamic = doc.dynamic_or_empty()
    placed: set[str] = set()
    for i, ev in enumerate(dynamic.events):
        region = dynamic.partition.region(ev.region)
        label = f"{ev.id} ({ev.region})"
        if ev.duration is not None:
            label += f" {ev.duration}"
        out.open(ev.id, label, f"style=filled; fillcolor={_q(PALETTE[i % len(PALETTE)])};")
        for sid in sorted(region.stages):
            out.add(f"{_q(sid)} [label={_q(_stage_label(m, sid, opts.show_anchors))}];")
            placed.add(sid)
        out.close()
    for sid in m.stages:
        if sid not in placed:
            out.add(f"{_q(sid)} [label={_q(_stage_label(m, sid, opts.show_anchors))}, color=gray];")
    _edges(out, m)
    return out.text()


def _behavior_dot(doc: Document, opts: ExportOptions) -> str:
    out = _Dot(doc.model.name, opts.rankdir)
    out.add("node [shape=ellipse, fontsize=10];")
    dynamic = doc.dynamic_or_empty()
    if not dynamic.events:
        return out.text()
    b = doc.behavior_model(allow_multi=True)
    for i, ev in enumerate(dynamic.events):
        label = ev.id
        if ev.duration is not None:
            label += f"\n{ev.duration}"
        out.add(f"{_q(ev.id)} [label={_q(label)}, style=filled, fillcolor={_q(PALETTE[i % len(PALETTE)])}];")
    for a, c in sorted(b.edges):
        out.add(f"{_q(a)} -> {_q(c)};")
    for e in sorted(b.repeats):
        out.add(f"{_q(e)} -> {_q(e)} [style=bold, label=\"repeat\"];")
    for br in b.branches:
        for arm in br.arms:
            out.add(f"{_q(br.at)} -> {_q(arm.to)} [style=dotted, label={_q(str(arm.guard))}];")
    events = set(dynamic.ids)
    for c in doc.constraints:
        if c.warning_id in events:
            label = f"{c.later} - {c.earlier} > {c.max_separation}"
            out.add(f"{_q(c.later.event)} -> {_q(c.warning_id)} [style=dotted, color=red, label={_q(label)}];")
    return out.text()


def to_dot(bundle: Document | StaticModel, options: ExportOptions | None = None) -> str:
    """Render ``bundle`` as graphviz DOT; output is deterministic."""
    opts = options or ExportOptions()
    doc = _bundle(bundle)
    if opts.target is Target.STATIC:
        return _static_dot(doc, opts)
    if opts.target is Target.DYNAMIC:
        return _dynamic_dot(doc, opts)
    return _behavior_dot(doc, opts)


# --- JSON --------------------------------------------------------------------


def _time_out(t: TimeValue | None):
    return None if t is None else {"magnitude": t.magnitude, "unit": t.unit}


def _time_in(d) -> TimeValue | None:
    return None if d is None else TimeValue(d["magnitude"], d["unit"])


def _instant_out(r: InstantRef) -> dict:
    return {"event": r.event, "anchor": r.anchor.value}


def to_json(bundle: Document | StaticModel) -> str:
    """Flat JSON with id references, tagged ``"tm_schema": 1``."""
    doc = _bundle(bundle)
    m = doc.model
    payload: dict[str, Any] = {
        "tm_schema": SCHEMA_VERSION,
        "name": m.name,
        "thimacs": [{"id": t.id, "name": t.name, "parent": t.parent} for t in m.walk()],
        "stages": [
            {"id": sid, "owner": st.owner, "kind": st.kind.value, "label": st.label, "anchor": st.anchor}
            for t in m.walk()
            for sid in t.stages
            for st in [m.stages[sid]]
        ],
        "flows": [{"src": e.src, "dst": e.dst} for e in m.flows],
        "triggers": [{"src": t.src, "dst": t.dst, "join": t.join} for t in m.triggers],
        "regions": None,
        "events": None,
        "behavior": None,
        "constraints": [
            {
                "earlier": _instant_out(c.earlier),
                "later": _instant_out(c.later),
                "max_separation": _time_out(c.max_separation),
                "warning_id": c.warning_id,
            }
            for c in doc.constraints
        ],
        "scenarios": [
            {
                "name": sc.name,
                "ticks": [
                    {
                        "time": _time_out(tick.time),
                        "measurements": dict(tick.measurements),
                        "delays": {ev: _time_out(t) for ev, t in tick.delays.items()},
                    }
                    for tick in sc.ticks
                ],
            }
            for sc in doc.scenarios.values()
        ],
    }
    if doc.partition is not None:
        payload["regions"] = [{"id": r.id, "stages": sorted(r.stages)} for r in doc.partition.regions]
    if doc.dynamic is not None:
        payload["events"] = [
            {"id": e.id, "region": e.region, "duration": _time_out(e.duration)} for e in doc.dynamic.events
        ]
    if doc.behavior is not None:
        b = doc.behavior
        payload["behavior"] = {
            "edges": [list(e) for e in b.edges],
            "repeats": list(b.repeats),
            "branches": [
                {
                    "at": br.at,
                    "arms": [
                        {
                            "to": arm.to,
                            "guard": [
                                {"measurement": t.measurement, "op": t.op, "threshold": t.threshold}
                                for t in arm.guard.terms
                            ],
                        }
                        for arm in br.arms
                    ],
                    "else_skip": br.else_skip,
                }
                for br in b.branches
            ],
        }
    return json.dumps(payload, indent=2, ensure_ascii=False) + "\n"


def _decode(data: dict) -> Document:
    decls: list = [ThimacDecl(t["id"], t["name"]) for t in data["thimacs"]]
    decls += [
        StageDecl(s["owner"], StageKind.parse(s["kind"]), s.get("label"), s.get("anchor"))
        for s in data["stages"]
    ]
    decls += [FlowDecl(f["src"], f["dst"]) for f in data["flows"]]
    decls += [TriggerDecl(t["src"], t["dst"], t.get("join")) for t in data["triggers"]]
    model = build_model(decls, data["name"])

    partition = None
    if data.get("regions") is not None:
        partition = build_partition(model, [Region(r["id"], frozenset(r["stages"])) for r in data["regions"]])
    dynamic = None
    if data.get("events") is not None:
        if partition is None:
            raise MalformedJson("events given without regions")
        dynamic = lift_to_events(
            partition, [EventSpec(e["id"], e["region"], _time_in(e.get("duration"))) for e in data["events"]]
        )
    behavior = None
    if data.get("behavior") is not None:
        b = data["behavior"]
        branches = tuple(
            Branch(
                br["at"],
                tuple(
                    Arm(GuardExpr(tuple(Comparison(c["measurement"], c["op"], c["threshold"]) for c in arm["guard"])), arm["to"])
                    for arm in br["arms"]
                ),
                bool(br.get("else_skip", False)),
            )
            for br in b.get("branches", [])
        )
        behavior = BehaviorSpec(
            tuple((a, c) for a, c in b.get("edges", [])),
            tuple(b.get("repeats", [])),
            branches,
        )
    constraints = tuple(
        WapConstraint(
            InstantRef(c["earlier"]["event"], Anchor(c["earlier"]["anchor"])),
            InstantRef(c["later"]["event"], Anchor(c["later"]["anchor"])),
            _time_in(c["max_separation"]),
            c["warning_id"],
        )
        for c in data.get("constraints", [])
    )
    scenarios = {}
    for sc in data.get("scenarios", []):
        ticks = tuple(
            Tick(
                _time_in(t["time"]),
                dict(t.get("measurements", {})),
                {ev: _time_in(v) for ev, v in t.get("delays", {}).items()},
            )
            for t in sc["ticks"]
        )
        scenarios[sc["name"]] = Scenario(sc["name"], ticks)
    return Document(model, partition, dynamic, behavior, constraints, scenarios)


def from_json(text: str) -> Document:
    """Inverse of ``to_json``.

    Raises ``SchemaVersionMismatch`` unless ``tm_schema`` is the integer 1
    and ``MalformedJson`` for anything else that does not decode.
    """
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedJson(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedJson("top level must be an object")
    version = data.get("tm_schema")
    if type(version) is not int or version != SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"expected tm_schema {SCHEMA_VERSION}, found {version!r}")
    try:
        return _decode(data)
    except BuildError as exc:
        first = next((d for d in exc.diagnostics if d.severity == "error"), None)
        raise MalformedJson(f"model does not build: {first}") from exc
    except TMError as exc:
        if isinstance(exc, MalformedJson):
            raise
        raise MalformedJson(str(exc)) from exc
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise MalformedJson(f"bad or missing field: {exc!r}") from exc
