"""Events: change regions placed in time, and the behavior they form.

An event is a region plus a time specification. Lifting a partition's regions
to events gives the dynamic model; ordering those events by the change
precedence (kept as its Hasse diagram) gives the behavior model, which also
carries repetition markers, guarded branches and acceptable-period (wap)
constraints.
"""

from __future__ import annotations

import enum
import operator
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

from .changes import ChangePartition, PrecedenceDag, find_cycle, transitive_reduction
from .errors import CycleError, DuplicateEventForRegion, UnknownEvent, UnknownRegion

UNIT_US = {"us": 1, "ms": 1_000, "s": 1_000_000}


@dataclass(frozen=True)
class TimeValue:
    """A non-negative integer duration in one of us/ms/s.

    The unit is kept for display and round-trips; arithmetic goes through
    ``us``.
    """

    magnitude: int
    unit: str = "us"

    def __post_init__(self):
        if self.unit not in UNIT_US:
            raise ValueError(f"unknown time unit {self.unit!r}")
        if isinstance(self.magnitude, bool) or not isinstance(self.magnitude, int):
            raise TypeError("time magnitude must be an integer")
        if self.magnitude < 0:
            raise ValueError("time magnitude must be non-negative")

    @property
    def us(self) -> int:
        return self.magnitude * UNIT_US[self.unit]

    def to(self, unit: str) -> "TimeValue":
        scale = UNIT_US[unit]
        if self.us % scale:
            raise ValueError(f"{self} is not a whole number of {unit}")
        return TimeValue(self.us // scale, unit)

    @classmethod
    def from_us(cls, us: int) -> "TimeValue":
        """Largest unit that represents ``us`` exactly."""
        for unit in ("s", "ms"):
            if us and us % UNIT_US[unit] == 0:
                return cls(us // UNIT_US[unit], unit)
        return cls(us, "us")

    def __str__(self) -> str:
        return f"{self.magnitude} {self.unit}"


@dataclass(frozen=True)
class EventSpec:
    id: str
    region: str
    duration: TimeValue | None = None
    span: object = field(default=None, compare=False)


@dataclass(frozen=True)
class DynamicModel:
    partition: ChangePartition
    events: tuple[EventSpec, ...] = ()

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.events]

    def event(self, eid: str) -> EventSpec:
        for e in self.events:
            if e.id == eid:
                return e
        raise UnknownEvent(eid)

    def region_to_event(self) -> dict[str, str]:
        return {e.region: e.id for e in self.events}


def lift_to_events(partition: ChangePartition, specs: Iterable[EventSpec]) -> DynamicModel:
    """Bind events to regions; regions without a spec stay plain changes."""
    known = set(partition.ids)
    by_region: dict[str, str] = {}
    ids: set[str] = set()
    specs = tuple(specs)
    for spec in specs:
        if spec.region not in known:
            raise UnknownRegion(spec.region)
        if spec.region in by_region:
            raise DuplicateEventForRegion(
                f"region {spec.region} already lifted to event {by_region[spec.region]}; {spec.id} repeats it"
            )
        if spec.id in ids:
            raise DuplicateEventForRegion(f"event id {spec.id} declared twice")
        by_region[spec.region] = spec.id
        ids.add(spec.id)
    return DynamicModel(partition, specs)


_OPS = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "==": operator.eq,
}


@dataclass(frozen=True)
class Comparison:
    measurement: str
    op: str
    threshold: int | float

    def __post_init__(self):
        if not self.measurement:
            raise ValueError("measurement name must be non-empty")
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison operator {self.op!r}")

    def evaluate(self, measurements: Mapping[str, float]) -> bool:
        return _OPS[self.op](measurements[self.measurement], self.threshold)

    def __str__(self) -> str:
        return f"{self.measurement} {self.op} {self.threshold!r}"


@dataclass(frozen=True)
class GuardExpr:
    terms: tuple[Comparison, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("a guard needs at least one comparison")

    @property
    def measurements(self) -> set[str]:
        return {t.measurement for t in self.terms}

    def evaluate(self, measurements: Mapping[str, float]) -> bool:
        return all(t.evaluate(measurements) for t in self.terms)

    def __str__(self) -> str:
        return " and ".join(str(t) for t in self.terms)


@dataclass(frozen=True)
class Arm:
    guard: GuardExpr
    to: str


@dataclass(frozen=True)
class Branch:
    at: str
    arms: tuple[Arm, ...]
    else_skip: bool = False
    span: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))


class Anchor(enum.Enum):
    START = "start"
    FINISH = "finish"


@dataclass(frozen=True)
class InstantRef:
    event: str
    anchor: Anchor

    def __str__(self) -> str:
        return f"{self.event}.{self.anchor.value}"


@dataclass(frozen=True)
class WapConstraint:
    """``later - earlier <= max_separation``; exceeding it raises ``warning_id``."""

    earlier: InstantRef
    later: InstantRef
    max_separation: TimeValue
    warning_id: str
    span: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.max_separation.us <= 0:
            raise ValueError("wap bound must be positive")


@dataclass(frozen=True)
class BehaviorSpec:
    """Behavior declarations as written in a model file."""

    edges: tuple[tuple[str, str], ...] = ()
    repeats: tuple[str, ...] = ()
    branches: tuple[Branch, ...] = ()
    span: object = field(default=None, compare=False)


@dataclass(frozen=True)
class BehaviorModel:
    events: tuple[str, ...] = ()
    edges: frozenset[tuple[str, str]] = frozenset()
    repeats: frozenset[str] = frozenset()
    branches: tuple[Branch, ...] = ()

    def predecessors(self, eid: str) -> list[str]:
        return sorted(a for a, b in self.edges if b == eid)

    def successors(self, eid: str) -> list[str]:
        return sorted(b for a, b in self.edges if a == eid)

    def arm_targets(self) -> set[str]:
        return {arm.to for br in self.branches for arm in br.arms}


def build_behavior(
    dynamic: DynamicModel,
    dag: PrecedenceDag,
    repeats: Iterable[str] = (),
    branches: Sequence[Branch] = (),
    reductions: Iterable[tuple[str, str]] = (),
    extra_edges: Iterable[tuple[str, str]] = (),
) -> BehaviorModel:
    """Carry the change order over to events.

    Edges are the Hasse diagram of the precedence restricted to lifted
    regions (the order between two events survives even when the path runs
    through a region that was never lifted). ``extra_edges`` are added and
    ``reductions`` removed afterwards; the result must stay acyclic.
    """
    r2e = dynamic.region_to_event()
    events = tuple(dynamic.ids)
    known = set(events)
    lifted = [r for r in dag.nodes if r in r2e]
    order = {(r2e[a], r2e[b]) for a in lifted for b in lifted if a != b and dag.reaches(a, b)}
    edges = transitive_reduction(events, order)

    def check(eid):
        if eid not in known:
            raise UnknownEvent(eid)

    for a, b in extra_edges:
        check(a)
        check(b)
        edges.add((a, b))
    for pair in reductions:
        edges.discard(tuple(pair))
    reps = frozenset(repeats)
    for e in reps:
        check(e)
    for br in branches:
        check(br.at)
        for arm in br.arms:
            check(arm.to)
    cycle = find_cycle(events, edges)
    if cycle:
        raise CycleError(cycle)
    return BehaviorModel(events, frozenset(edges), reps, tuple(branches))


class IsomorphismResult(NamedTuple):
    holds: bool
    counterexample: tuple[str, str] | None = None

    def __bool__(self) -> bool:
        return self.holds


def check_isomorphism(
    dag: PrecedenceDag, behavior: BehaviorModel, mapping: Mapping[str, str]
) -> IsomorphismResult:
    """Compare reachability between lifted regions and their events.

    Only ordinary behavior edges count; branch arms are control flow, not
    order. The first disagreeing region pair is returned alongside ``False``.
    """
    bdag = PrecedenceDag.from_pairs(behavior.events, behavior.edges)
    regions = sorted(r for r in mapping if r in dag.reach)
    for a in regions:
        for b in regions:
            if a == b:
                continue
            ea, eb = mapping[a], mapping[b]
            in_b = ea in bdag.reach and eb in bdag.reach[ea]
            if dag.reaches(a, b) != in_b:
                return IsomorphismResult(False, (a, b))
    return IsomorphismResult(True)
