"""Static TM models: thimac hierarchy, stages, flows and triggers.

A static model is atemporal. It records which thimacs exist, which of the
five generic stages each one owns, how things flow between stages, and which
flow-disconnected parts trigger one another. Nothing here carries a time.
"""

from __future__ import annotations

import enum
import re
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .errors import BuildError

SEGMENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class StageKind(enum.Enum):
    CREATE = "create"
    RECEIVE = "receive"
    PROCESS = "process"
    RELEASE = "release"
    TRANSFER = "transfer"

    @property
    def order(self) -> int:
        return _KIND_ORDER[self]

    @classmethod
    def parse(cls, text: str) -> "StageKind":
        return cls(text.lower())


_KIND_ORDER = {kind: i for i, kind in enumerate(StageKind)}
STAGE_KEYWORDS = frozenset(k.value for k in StageKind)

C, RV, P, RL, T = (
    StageKind.CREATE,
    StageKind.RECEIVE,
    StageKind.PROCESS,
    StageKind.RELEASE,
    StageKind.TRANSFER,
)

# Flows inside one machine (the owners are equal or nested).
_SAME_MACHINE = frozenset(
    {
        (C, P), (C, RL),
        (RV, P), (RV, RL),
        (P, C), (P, RL),
        (RL, T),
        (T, RV),
    }
)
# Flows between different machines: output port to input port, or straight
# into the receive stage when the receiving transfer is elided.
_CROSS_MACHINE = frozenset({(T, T), (T, RV)})


def stage_adjacency_legal(from_kind: StageKind, to_kind: StageKind, same_thimac: bool) -> bool:
    """Return True if a flow from ``from_kind`` to ``to_kind`` is allowed."""
    table = _SAME_MACHINE if same_thimac else _CROSS_MACHINE
    return (from_kind, to_kind) in table


def valid_path(path: str) -> bool:
    return bool(path) and all(SEGMENT_RE.match(seg) for seg in path.split("."))


def stage_id(owner: str, kind: StageKind) -> str:
    return f"{owner}.{kind.value}"


@dataclass(frozen=True)
class Thimac:
    id: str
    name: str
    parent: str | None = None
    children: tuple[str, ...] = ()
    stages: tuple[str, ...] = ()


@dataclass(frozen=True)
class Stage:
    id: str
    kind: StageKind
    owner: str
    label: str | None = None
    anchor: int | None = None


@dataclass(frozen=True, order=True)
class FlowEdge:
    src: str
    dst: str

    def __str__(self) -> str:
        return f"flow {self.src} -> {self.dst}"


@dataclass(frozen=True, order=True)
class TriggerEdge:
    src: str
    dst: str
    join: str | None = None

    def __str__(self) -> str:
        suffix = f" join {self.join}" if self.join else ""
        return f"trigger {self.src} --> {self.dst}{suffix}"

    def sort_key(self) -> tuple[str, str, str]:
        return (self.src, self.dst, self.join or "")


@dataclass(frozen=True)
class StaticModel:
    name: str = ""
    thimacs: Mapping[str, Thimac] = field(default_factory=dict)
    stages: Mapping[str, Stage] = field(default_factory=dict)
    flows: tuple[FlowEdge, ...] = ()
    triggers: tuple[TriggerEdge, ...] = ()

    def roots(self) -> list[str]:
        return [t.id for t in self.thimacs.values() if t.parent is None]

    def walk(self) -> Iterator[Thimac]:
        """Thimacs in depth-first declaration order."""
        stack = list(reversed(self.roots()))
        seen: set[str] = set()
        while stack:
            tid = stack.pop()
            if tid in seen or tid not in self.thimacs:
                continue
            seen.add(tid)
            thimac = self.thimacs[tid]
            yield thimac
            stack.extend(reversed(thimac.children))

    def ancestors(self, tid: str) -> list[str]:
        out: list[str] = []
        seen = {tid}
        cur = self.thimacs.get(tid)
        while cur is not None and cur.parent is not None and cur.parent not in seen:
            out.append(cur.parent)
            seen.add(cur.parent)
            cur = self.thimacs.get(cur.parent)
        return out

    def same_machine(self, a: str, b: str) -> bool:
        """True when stage owners ``a`` and ``b`` are equal or one contains the other."""
        return a == b or a in self.ancestors(b) or b in self.ancestors(a)

    def flow_is_legal(self, edge: FlowEdge) -> bool:
        src, dst = self.stages[edge.src], self.stages[edge.dst]
        return stage_adjacency_legal(src.kind, dst.kind, self.same_machine(src.owner, dst.owner))

    def flow_adjacency(self, reverse: bool = False) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = defaultdict(list)
        for e in self.flows:
            if reverse:
                adj[e.dst].append(e.src)
            else:
                adj[e.src].append(e.dst)
        return adj

    def flow_path_exists(self, src: str, dst: str) -> bool:
        adj = self.flow_adjacency()
        queue = deque([src])
        seen = {src}
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v == dst:
                    return True
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return False


# --- declarations -----------------------------------------------------------


@dataclass(frozen=True)
class ThimacDecl:
    id: str
    name: str | None = None
    span: object = field(default=None, compare=False)


@dataclass(frozen=True)
class StageDecl:
    owner: str
    kind: StageKind
    label: str | None = None
    anchor: int | None = None
    span: object = field(default=None, compare=False)


@dataclass(frozen=True)
class FlowDecl:
    src: str
    dst: str
    span: object = field(default=None, compare=False)


@dataclass(frozen=True)
class TriggerDecl:
    src: str
    dst: str
    join: str | None = None
    span: object = field(default=None, compare=False)


Decl = ThimacDecl | StageDecl | FlowDecl | TriggerDecl


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    code: str
    location: str
    message: str
    span: object = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"{self.severity}: {self.code} at {self.location}: {self.message}"


def _error(code, location, message, span=None) -> Diagnostic:
    return Diagnostic("error", code, location, message, span)


def build_model(decls: Iterable[Decl], name: str = "") -> StaticModel:
    """Link declarations into a ``StaticModel``.

    Every problem is collected before anything is raised. On any error a
    ``BuildError`` carrying the full diagnostic list is raised; warnings alone
    do not stop the build.
    """
    diags: list[Diagnostic] = []
    thimac_decls: dict[str, ThimacDecl] = {}
    stage_decls: dict[str, StageDecl] = {}
    flows: list[FlowEdge] = []
    triggers: list[TriggerEdge] = []
    edge_spans: dict[object, object] = {}

    for d in decls:
        if isinstance(d, ThimacDecl):
            if not valid_path(d.id) or d.id.split(".")[-1] in STAGE_KEYWORDS:
                diags.append(_error("InvalidId", d.id, f"invalid thimac id {d.id!r}", d.span))
            elif d.id in thimac_decls:
                diags.append(_error("DuplicateId", d.id, f"thimac {d.id} declared twice", d.span))
            else:
                thimac_decls[d.id] = d
        elif isinstance(d, StageDecl):
            sid = stage_id(d.owner, d.kind)
            if sid in stage_decls:
                diags.append(
                    _error("DuplicateId", sid, f"thimac {d.owner} already has a {d.kind.value} stage", d.span)
                )
            else:
                stage_decls[sid] = d
        elif isinstance(d, FlowDecl):
            edge = FlowEdge(d.src, d.dst)
            flows.append(edge)
            edge_spans.setdefault(edge, d.span)
        elif isinstance(d, TriggerDecl):
            edge = TriggerEdge(d.src, d.dst, d.join)
            triggers.append(edge)
            edge_spans.setdefault(edge, d.span)
        else:
            raise TypeError(f"not a declaration: {d!r}")

    children: dict[str, list[str]] = defaultdict(list)
    for tid, d in thimac_decls.items():
        parent = tid.rpartition(".")[0] or None
        if parent is not None:
            if parent not in thimac_decls:
                diags.append(
                    _error("UnknownReference", tid, f"parent thimac {parent} is not declared", d.span)
                )
            children[parent].append(tid)

    owned: dict[str, list[str]] = defaultdict(list)
    stages: dict[str, Stage] = {}
    for sid, d in stage_decls.items():
        if d.owner not in thimac_decls:
            diags.append(
                _error("UnknownReference", sid, f"stage owner {d.owner} is not declared", d.span)
            )
            continue
        stages[sid] = Stage(sid, d.kind, d.owner, d.label, d.anchor)
        owned[d.owner].append(sid)

    thimacs = {
        tid: Thimac(
            id=tid,
            name=d.name or tid.split(".")[-1],
            parent=tid.rpartition(".")[0] or None,
            children=tuple(children.get(tid, ())),
            stages=tuple(sorted(owned.get(tid, ()), key=lambda s: stages[s].kind.order)),
        )
        for tid, d in thimac_decls.items()
    }
    model = StaticModel(
        name=name,
        thimacs=thimacs,
        stages=stages,
        flows=tuple(sorted(set(flows))),
        triggers=tuple(sorted(set(triggers), key=TriggerEdge.sort_key)),
    )

    for edge in flows + triggers:
        for end in (edge.src, edge.dst):
            if end not in stages and end not in stage_decls:
                diags.append(
                    _error("UnknownReference", str(edge), f"stage {end} is not declared", edge_spans.get(edge))
                )
    seen_edges: set[object] = set()
    for edge in flows + triggers:
        if edge in seen_edges:
            diags.append(
                Diagnostic("warning", "DuplicateEdge", str(edge), "edge declared more than once", edge_spans.get(edge))
            )
        seen_edges.add(edge)

    if not any(d.severity == "error" for d in diags):
        for d in validate(model):
            diags.append(
                Diagnostic(d.severity, d.code, d.location, d.message, edge_spans.get(_edge_of(d, model)))
            )
    if any(d.severity == "error" for d in diags):
        raise BuildError(diags)
    return model


def _edge_of(diag: Diagnostic, model: StaticModel):
    for edge in model.flows + model.triggers:
        if str(edge) == diag.location:
            return edge
    return None


def validate(model: StaticModel) -> list[Diagnostic]:
    """Check every structural invariant of ``model``.

    Returns an empty list iff the model is well formed. A model whose flow and
    trigger edges fall apart into more than one weakly connected component
    gets a ``MULTI_COMPONENT`` warning rather than an error.
    """
    diags: list[Diagnostic] = []
    diags += _check_forest(model)
    diags += _check_stages(model)
    diags += _check_flows(model)
    diags += _check_triggers(model)
    comps = edge_components(model)
    if len(comps) > 1:
        diags.append(
            Diagnostic(
                "warning",
                "MULTI_COMPONENT",
                model.name or "<model>",
                f"flow/trigger graph has {len(comps)} weakly connected components",
            )
        )
    return diags


def _check_forest(model: StaticModel) -> list[Diagnostic]:
    out = []
    for tid, t in model.thimacs.items():
        if tid != t.id or not valid_path(tid):
            out.append(_error("InvalidId", tid, f"invalid thimac id {tid!r}"))
        if t.parent is not None:
            parent = model.thimacs.get(t.parent)
            if parent is None:
                out.append(_error("UnknownReference", tid, f"parent {t.parent} does not exist"))
            elif tid not in parent.children:
                out.append(_error("ForestViolation", tid, f"{t.parent} does not list {tid} as a child"))
        for child in t.children:
            c = model.thimacs.get(child)
            if c is None:
                out.append(_error("UnknownReference", tid, f"child {child} does not exist"))
            elif c.parent != tid:
                out.append(_error("ForestViolation", tid, f"child {child} has parent {c.parent}"))
        if len(set(t.children)) != len(t.children):
            out.append(_error("ForestViolation", tid, "child listed twice"))
    # parent links must not loop
    for tid in model.thimacs:
        seen = {tid}
        cur = model.thimacs[tid].parent
        while cur is not None and cur in model.thimacs:
            if cur in seen:
                out.append(_error("ForestViolation", tid, "thimac hierarchy contains a cycle"))
                break
            seen.add(cur)
            cur = model.thimacs[cur].parent
    return out


def _check_stages(model: StaticModel) -> list[Diagnostic]:
    out = []
    holders: dict[str, list[str]] = defaultdict(list)
    for t in model.thimacs.values():
        for sid in t.stages:
            holders[sid].append(t.id)
    for sid, stage in model.stages.items():
        if sid != stage.id:
            out.append(_error("InvalidId", sid, f"stage keyed as {sid} but has id {stage.id}"))
        if stage.owner not in model.thimacs:
            out.append(_error("UnknownReference", sid, f"owner {stage.owner} does not exist"))
        elif holders.get(sid) != [stage.owner]:
            out.append(
                _error("StageOwnership", sid, f"stage must belong to {stage.owner} only, held by {holders.get(sid, [])}")
            )
    for sid, owners in holders.items():
        if sid not in model.stages:
            out.append(_error("UnknownReference", owners[0], f"listed stage {sid} does not exist"))
    return out


def _check_flows(model: StaticModel) -> list[Diagnostic]:
    out = []
    for edge in model.flows:
        where = str(edge)
        missing = [end for end in (edge.src, edge.dst) if end not in model.stages]
        if missing:
            out.extend(_error("UnknownReference", where, f"stage {m} does not exist") for m in missing)
            continue
        if edge.src == edge.dst:
            out.append(_error("IllegalFlow", where, "flow from a stage to itself"))
            continue
        src, dst = model.stages[edge.src], model.stages[edge.dst]
        same = model.same_machine(src.owner, dst.owner)
        if not stage_adjacency_legal(src.kind, dst.kind, same):
            scope = "within one thimac" if same else "between thimacs"
            out.append(
                _error("IllegalFlow", where, f"{src.kind.value} -> {dst.kind.value} is not a legal flow {scope}")
            )
    return out


def _check_triggers(model: StaticModel) -> list[Diagnostic]:
    out = []
    join_targets: dict[str, set[str]] = defaultdict(set)
    for edge in model.triggers:
        where = str(edge)
        missing = [end for end in (edge.src, edge.dst) if end not in model.stages]
        if missing:
            out.extend(_error("UnknownReference", where, f"stage {m} does not exist") for m in missing)
            continue
        if edge.src == edge.dst:
            out.append(_error("TriggerOverlapsFlow", where, "trigger from a stage to itself"))
            continue
        if model.flow_path_exists(edge.src, edge.dst) or model.flow_path_exists(edge.dst, edge.src):
            out.append(
                _error("TriggerOverlapsFlow", where, "trigger endpoints are already connected by a flow path")
            )
        if edge.join:
            join_targets[edge.join].add(edge.dst)
    for group, targets in sorted(join_targets.items()):
        if len(targets) > 1:
            out.append(
                _error("JoinMismatch", f"join {group}", f"join group converges on several stages: {sorted(targets)}")
            )
    return out


def edge_components(model: StaticModel) -> list[set[str]]:
    """Weakly connected components over stages that take part in some edge."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for edge in model.flows + model.triggers:
        for end in (edge.src, edge.dst):
            parent.setdefault(end, end)
        ra, rb = find(edge.src), find(edge.dst)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[str, set[str]] = defaultdict(set)
    for node in parent:
        groups[find(node)].add(node)
    return sorted(groups.values(), key=min)
