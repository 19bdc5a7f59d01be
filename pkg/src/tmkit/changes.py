"""Changes as regions of a static model, and the order they impose.

A change is a connected subdiagram of the static model. Flows and triggers
that cross from one region into another make the first appear before the
second. That relation, a DAG over region ids, is all the chronology there is
before time gets involved.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

from .errors import CycleError, MultiComponentError, PartitionError, TooLarge, UnknownRegion
from .model import Diagnostic, StaticModel

MAX_EXACT_NODES = 20


@dataclass(frozen=True)
class Region:
    id: str
    stages: frozenset[str]
    span: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "stages", frozenset(self.stages))


@dataclass(frozen=True)
class ChangePartition:
    model: StaticModel
    regions: tuple[Region, ...] = ()

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.regions]

    def region(self, rid: str) -> Region:
        for r in self.regions:
            if r.id == rid:
                return r
        raise UnknownRegion(rid)

    def owner_of(self) -> dict[str, str]:
        return {sid: r.id for r in self.regions for sid in r.stages}

    def unassigned(self) -> list[str]:
        owned = self.owner_of()
        return [sid for sid in self.model.stages if sid not in owned]


def check_regions(model: StaticModel, regions: Sequence[Region]) -> list[Diagnostic]:
    diags = []

    def err(code, r, msg):
        diags.append(Diagnostic("error", code, f"region {r.id}", msg, r.span))

    seen_ids: set[str] = set()
    claimed: dict[str, str] = {}
    flows_by_stage = defaultdict(set)
    for e in model.flows:
        flows_by_stage[e.src].add(e.dst)
        flows_by_stage[e.dst].add(e.src)
    for r in regions:
        if r.id in seen_ids:
            err("DuplicateId", r, "region declared twice")
        seen_ids.add(r.id)
        if not r.stages:
            err("EmptyRegion", r, "region has no stages")
            continue
        unknown = sorted(s for s in r.stages if s not in model.stages)
        for s in unknown:
            err("UnknownReference", r, f"stage {s} does not exist")
        for s in sorted(r.stages):
            if s in claimed:
                err("RegionOverlap", r, f"stage {s} already belongs to region {claimed[s]}")
            else:
                claimed[s] = r.id
        if unknown:
            continue
        # induced subgraph over flow edges must be weakly connected
        start = min(r.stages)
        stack, reached = [start], {start}
        while stack:
            u = stack.pop()
            for v in flows_by_stage[u]:
                if v in r.stages and v not in reached:
                    reached.add(v)
                    stack.append(v)
        if reached != r.stages:
            err("RegionDisconnected", r, f"stages not flow-connected to {start}: {sorted(r.stages - reached)}")
    return diags


def build_partition(model: StaticModel, regions: Iterable[Region]) -> ChangePartition:
    regions = tuple(regions)
    diags = check_regions(model, regions)
    if diags:
        raise PartitionError(diags)
    return ChangePartition(model, regions)


class Cause(enum.Enum):
    FLOW = "flow"
    TRIGGER = "trigger"


class OrderClass(enum.Enum):
    BEFORE = "before"
    AFTER = "after"
    UNORDERED = "unordered"


@dataclass(frozen=True)
class PrecedenceEdge:
    before: str
    after: str
    cause: Cause

    def __lt__(self, other):
        return (self.before, self.after, self.cause.value) < (other.before, other.after, other.cause.value)


@dataclass(frozen=True)
class PrecedenceDag:
    nodes: tuple[str, ...]
    edges: frozenset[PrecedenceEdge] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(sorted(set(self.nodes))))
        object.__setattr__(self, "edges", frozenset(self.edges))

    @classmethod
    def from_pairs(cls, nodes: Iterable[str], pairs: Iterable[tuple[str, str]], cause: Cause = Cause.FLOW):
        pairs = list(pairs)
        nodes = set(nodes) | {x for pair in pairs for x in pair}
        return cls(tuple(nodes), frozenset(PrecedenceEdge(a, b, cause) for a, b in pairs))

    @cached_property
    def pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset((e.before, e.after) for e in self.edges)

    @cached_property
    def successors(self) -> dict[str, set[str]]:
        succ: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.pairs:
            succ[a].add(b)
        return succ

    @cached_property
    def predecessors(self) -> dict[str, set[str]]:
        pred: dict[str, set[str]] = {n: set() for n in self.nodes}
        for a, b in self.pairs:
            pred[b].add(a)
        return pred

    @cached_property
    def reach(self) -> dict[str, frozenset[str]]:
        """Strict descendants of every node."""
        out: dict[str, frozenset[str]] = {}
        for n in self.nodes:
            seen: set[str] = set()
            stack = list(self.successors[n])
            while stack:
                v = stack.pop()
                if v not in seen:
                    seen.add(v)
                    stack.extend(self.successors[v])
            out[n] = frozenset(seen)
        return out

    def reaches(self, a: str, b: str) -> bool:
        return b in self.reach[a]

    def causes(self, a: str, b: str) -> list[Cause]:
        return sorted((e.cause for e in self.edges if (e.before, e.after) == (a, b)), key=lambda c: c.value)


def find_cycle(nodes: Iterable[str], pairs: Iterable[tuple[str, str]]) -> list[str] | None:
    """Return one directed cycle as a node list (first node repeated last), or None."""
    succ: dict[str, list[str]] = defaultdict(list)
    for a, b in sorted(set(pairs)):
        succ[a].append(b)
    white, grey, black = 0, 1, 2
    color = defaultdict(int)
    for root in sorted(set(nodes)):
        if color[root] != white:
            continue
        path = [root]
        iters = [iter(succ[root])]
        color[root] = grey
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                color[path.pop()] = black
                iters.pop()
            elif color[nxt] == grey:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == white:
                color[nxt] = grey
                path.append(nxt)
                iters.append(iter(succ[nxt]))
    return None


def weak_components(nodes: Iterable[str], pairs: Iterable[tuple[str, str]]) -> list[set[str]]:
    adj: dict[str, set[str]] = {n: set() for n in nodes}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    comps, seen = [], set()
    for n in sorted(adj):
        if n in seen:
            continue
        comp, stack = set(), [n]
        while stack:
            u = stack.pop()
            if u not in comp:
                comp.add(u)
                stack.extend(adj[u] - comp)
        seen |= comp
        comps.append(comp)
    return comps


def derive_precedence(
    model: StaticModel, partition: ChangePartition, allow_multi: bool = False
) -> PrecedenceDag:
    """Order the partition's regions by the flows and triggers crossing them.

    There is an edge (Ci, Cj) for every flow or trigger running from a stage
    in Ci to a stage in Cj. Raises ``CycleError`` if that relation has a
    cycle and, unless ``allow_multi`` is set, ``MultiComponentError`` if it
    splits into several weakly connected components.
    """
    owner = partition.owner_of()
    edges = set()
    for cause, seq in ((Cause.FLOW, model.flows), (Cause.TRIGGER, model.triggers)):
        for e in seq:
            a, b = owner.get(e.src), owner.get(e.dst)
            if a is not None and b is not None and a != b:
                edges.add(PrecedenceEdge(a, b, cause))
    nodes = partition.ids
    pairs = {(e.before, e.after) for e in edges}
    cycle = find_cycle(nodes, pairs)
    if cycle:
        raise CycleError(cycle)
    comps = weak_components(nodes, pairs)
    if len(comps) > 1 and not allow_multi:
        raise MultiComponentError(comps)
    return PrecedenceDag(tuple(nodes), frozenset(edges))


def classify_pair(dag: PrecedenceDag, a: str, b: str) -> OrderClass:
    for n in (a, b):
        if n not in dag.reach:
            raise UnknownRegion(n)
    if a == b:
        return OrderClass.UNORDERED
    if dag.reaches(a, b):
        return OrderClass.BEFORE
    if dag.reaches(b, a):
        return OrderClass.AFTER
    return OrderClass.UNORDERED


def count_linear_extensions(dag: PrecedenceDag) -> int:
    """Exact number of linear extensions, memoised over down-sets."""
    n = len(dag.nodes)
    if n > MAX_EXACT_NODES:
        raise TooLarge(f"{n} nodes exceeds the exact-count limit of {MAX_EXACT_NODES}")
    index = {v: i for i, v in enumerate(dag.nodes)}
    pred_mask = [0] * n
    for a, b in dag.pairs:
        pred_mask[index[b]] |= 1 << index[a]
    full = (1 << n) - 1
    memo: dict[int, int] = {full: 1}

    # iterative post-order DFS over down-sets to stay clear of recursion limits
    stack = [0]
    while stack:
        mask = stack[-1]
        if mask in memo:
            stack.pop()
            continue
        nexts = [mask | (1 << i) for i in range(n) if not mask >> i & 1 and pred_mask[i] & ~mask == 0]
        pending = [m for m in nexts if m not in memo]
        if pending:
            stack.extend(pending)
        else:
            memo[mask] = sum(memo[m] for m in nexts)
            stack.pop()
    return memo[0]


def iter_linear_extensions(dag: PrecedenceDag):
    """Yield linear extensions in lexicographic order of their id sequences."""
    indeg = {v: len(dag.predecessors[v]) for v in dag.nodes}
    succ = {v: sorted(dag.successors[v]) for v in dag.nodes}
    seq: list[str] = []
    n = len(dag.nodes)

    def rec():
        if len(seq) == n:
            yield tuple(seq)
            return
        for v in dag.nodes:  # nodes are sorted
            if indeg[v] == 0:
                indeg[v] = -1
                for w in succ[v]:
                    indeg[w] -= 1
                seq.append(v)
                yield from rec()
                seq.pop()
                for w in succ[v]:
                    indeg[w] += 1
                indeg[v] = 0

    yield from rec()


def enumerate_chronologies(
    dag: PrecedenceDag, limit: int = 1000, exact: bool = True
) -> tuple[list[tuple[str, ...]], int | None]:
    """First ``limit`` chronologies in lexicographic order, plus the total count.

    The count is exact even when the list is truncated. With ``exact=False``
    graphs above the size limit return ``None`` instead of raising.
    """
    if limit < 1:
        raise ValueError("limit must be positive")
    if find_cycle(dag.nodes, dag.pairs):
        raise CycleError(find_cycle(dag.nodes, dag.pairs))
    if len(dag.nodes) > MAX_EXACT_NODES and exact:
        raise TooLarge(f"{len(dag.nodes)} nodes exceeds the exact-count limit of {MAX_EXACT_NODES}")
    out = []
    for ext in iter_linear_extensions(dag):
        out.append(ext)
        if len(out) >= limit:
            break
    total = count_linear_extensions(dag) if len(dag.nodes) <= MAX_EXACT_NODES else None
    return out, total


def normalize_consecutive(seq: Sequence[str]) -> list[str]:
    """Collapse runs of the same change into one occurrence."""
    out: list[str] = []
    for item in seq:
        if not out or out[-1] != item:
            out.append(item)
    return out


def transitive_reduction(nodes: Iterable[str], pairs: Iterable[tuple[str, str]]) -> set[tuple[str, str]]:
    """Hasse diagram of an acyclic relation: drop every edge implied by a longer path."""
    dag = PrecedenceDag.from_pairs(nodes, pairs)
    keep = set()
    for a, b in dag.pairs:
        if not any(b in dag.reach[c] for c in dag.successors[a] if c != b):
            keep.add((a, b))
    return keep
