"""Deterministic discrete-event execution of a behavior model.

Time is integer microseconds. A scenario supplies measurement ticks; root
events start on ticks, other events start when every predecessor has handed
them a completion (an AND-join), and branch guards read the measurements of
the tick in force when the branching event started.

Rules the engine follows:

* an event may run more than once only if it is marked ``repeat`` or is the
  target of a branch arm; instances of one event never overlap
* each incoming edge holds at most the latest completion of its source
* a wap violation on an instance appends a warning, starts the warning event
  named by the constraint (if it is an event) and withholds the instance's
  completion from its successors, so control falls back to the roots
* ``else -> skip`` on a branch withholds every successor when no arm holds
"""

from __future__ import annotations

import bisect
import heapq
import itertools
import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import GuardMeasurementMissing, HorizonTooSmall, ScenarioError
from .events import Anchor, BehaviorModel, DynamicModel, TimeValue, WapConstraint

logger = logging.getLogger(__name__)

_FINISH, _TICK, _START = 0, 1, 2


@dataclass(frozen=True)
class Tick:
    time: TimeValue
    measurements: Mapping[str, float] = field(default_factory=dict)
    delays: Mapping[str, TimeValue] = field(default_factory=dict)


@dataclass(frozen=True)
class Scenario:
    name: str
    ticks: tuple[Tick, ...] = ()
    span: object = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ticks", tuple(self.ticks))

    def check(self) -> None:
        if not self.ticks:
            raise ScenarioError(f"scenario {self.name} has no ticks")
        names = set(self.ticks[0].measurements)
        prev = -1
        for tick in self.ticks:
            if tick.time.us <= prev:
                raise ScenarioError(f"scenario {self.name}: tick times must strictly increase")
            prev = tick.time.us
            if set(tick.measurements) != names:
                raise ScenarioError(
                    f"scenario {self.name}: tick at {tick.time} measures {sorted(tick.measurements)}, "
                    f"expected {sorted(names)}"
                )

    @property
    def measurement_names(self) -> set[str]:
        return set(self.ticks[0].measurements) if self.ticks else set()


@dataclass(frozen=True)
class TraceEntry:
    event: str
    instance: int
    start: TimeValue
    finish: TimeValue
    guard_results: Mapping[str, bool] = field(default_factory=dict)

    def at(self, anchor: Anchor) -> int:
        return self.start.us if anchor is Anchor.START else self.finish.us


@dataclass(frozen=True)
class WapWarning:
    warning_id: str
    instances: tuple[tuple[str, int], tuple[str, int]]
    separation: TimeValue
    bound: TimeValue
    at: TimeValue = field(default=TimeValue(0), compare=False)


@dataclass(frozen=True)
class Trace:
    entries: tuple[TraceEntry, ...] = ()
    warnings: tuple[WapWarning, ...] = ()

    def instances(self, event: str) -> list[TraceEntry]:
        return [e for e in self.entries if e.event == event]

    def events(self) -> list[str]:
        """Events in order of first occurrence."""
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.event, None)
        return list(seen)


def _by_event(entries: Iterable[TraceEntry]) -> dict[str, list[TraceEntry]]:
    out: dict[str, list[TraceEntry]] = defaultdict(list)
    for e in entries:
        out[e.event].append(e)
    return out


def _pair(c: WapConstraint, later: TraceEntry, earlier_pool: Sequence[TraceEntry]):
    """Earlier instance matched with ``later``: the same instance for a
    same-event constraint, else the latest one anchored no later than it."""
    t_later = later.at(c.later.anchor)
    if c.earlier.event == c.later.event:
        return later
    best = None
    for e in earlier_pool:
        t = e.at(c.earlier.anchor)
        if t <= t_later and (best is None or (t, e.instance) > (best.at(c.earlier.anchor), best.instance)):
            best = e
    return best


def _violation(c: WapConstraint, later: TraceEntry, earlier_pool) -> WapWarning | None:
    earlier = _pair(c, later, earlier_pool)
    if earlier is None:
        return None
    sep = later.at(c.later.anchor) - earlier.at(c.earlier.anchor)
    if sep <= c.max_separation.us:
        return None
    return WapWarning(
        c.warning_id,
        ((earlier.event, earlier.instance), (later.event, later.instance)),
        TimeValue(sep),
        c.max_separation,
        TimeValue(later.at(c.later.anchor)),
    )


def check_wap(trace: Trace | Iterable[TraceEntry], constraints: Iterable[WapConstraint]) -> list[WapWarning]:
    """One warning per instance pair whose separation exceeds its bound.

    Satisfaction is ``<=``: a separation equal to the bound is fine.
    Constraints naming events absent from the trace are skipped; see
    ``unevaluated``.
    """
    entries = trace.entries if isinstance(trace, Trace) else tuple(trace)
    by_event = _by_event(entries)
    out = []
    for c in constraints:
        for later in by_event.get(c.later.event, ()):
            w = _violation(c, later, by_event.get(c.earlier.event, ()))
            if w is not None:
                out.append(w)
    out.sort(key=lambda w: (w.at.us, w.warning_id, w.instances))
    return out


def unevaluated(trace: Trace, constraints: Iterable[WapConstraint]) -> list[WapConstraint]:
    present = {e.event for e in trace.entries}
    return [c for c in constraints if c.earlier.event not in present or c.later.event not in present]


@dataclass
class _Instance:
    start: int
    finish: int


class _Run:
    def __init__(self, behavior, dynamic, constraints, ticks, horizon_us):
        self.behavior = behavior
        self.events = behavior.events
        self.repeats = behavior.repeats
        self.horizon = horizon_us
        self.ticks = ticks
        self.tick_times = [t.time.us for t in ticks]
        self.durations = {e.id: (e.duration.us if e.duration else 0) for e in dynamic.events}
        self.preds = {e: behavior.predecessors(e) for e in self.events}
        self.succs = {e: behavior.successors(e) for e in self.events}
        self.branch = {}
        for br in behavior.branches:
            self.branch.setdefault(br.at, br)
        self.arm_targets = behavior.arm_targets()
        self.constraints = list(constraints)
        self.warning_events = {c.warning_id for c in self.constraints} & set(self.events)
        self.by_later = defaultdict(list)
        for c in self.constraints:
            self.by_later[c.later.event].append(c)
        self.roots = [e for e in self.events if not self.preds[e] and e not in self.warning_events]
        self.tokens: dict[tuple[str, str], int] = {}
        self.started: dict[str, list[_Instance]] = defaultdict(list)
        self.done: dict[str, list[TraceEntry]] = defaultdict(list)
        self.queue: list = []
        self.seq = itertools.count()

    def push(self, t, phase, payload):
        heapq.heappush(self.queue, (t, phase, next(self.seq), payload))

    def tick_at(self, t: int) -> Tick:
        return self.ticks[bisect.bisect_right(self.tick_times, t) - 1]

    def run(self) -> list[TraceEntry]:
        for tick in self.ticks:
            self.push(tick.time.us, _TICK, tick)
        while self.queue:
            t, phase, _, payload = heapq.heappop(self.queue)
            if t > self.horizon:
                break
            if phase == _TICK:
                for root in self.roots:
                    self.push(t, _START, (root, True))
            elif phase == _START:
                if t < self.horizon:
                    self.start(t, *payload)
            else:
                self.finish(t, *payload)
        entries = [e for evs in self.done.values() for e in evs]
        entries.sort(key=lambda e: (e.start.us, e.event, e.instance))
        return entries

    def start(self, t: int, event: str, from_tick: bool) -> None:
        insts = self.started[event]
        if insts and event not in self.repeats and event not in self.arm_targets:
            return
        if insts and insts[-1].finish > t:
            if not from_tick:
                self.push(insts[-1].finish, _START, (event, False))
            return
        tick = self.tick_at(t)
        delay = tick.delays.get(event)
        duration = delay.us if delay is not None else self.durations.get(event, 0)
        insts.append(_Instance(t, t + duration))
        self.push(t + duration, _FINISH, (event, len(insts) - 1))

    def finish(self, t: int, event: str, index: int) -> None:
        inst = self.started[event][index]
        entry = TraceEntry(event, index, TimeValue(inst.start), TimeValue(inst.finish))
        violated = [
            c
            for c in self.by_later[event]
            if _violation(c, entry, self.done.get(c.earlier.event, ())) is not None
        ]
        branch = self.branch.get(event)
        chosen = None
        if branch is not None and not violated:
            measurements = self.tick_at(inst.start).measurements
            results = {}
            for arm in branch.arms:
                try:
                    ok = arm.guard.evaluate(measurements)
                except KeyError as exc:
                    raise GuardMeasurementMissing(f"guard on {event} needs measurement {exc.args[0]}") from None
                results[str(arm.guard)] = ok
                if ok and chosen is None:
                    chosen = arm
            entry = TraceEntry(event, index, entry.start, entry.finish, results)
        self.done[event].append(entry)

        for c in violated:
            logger.debug("wap %s violated by %s#%d", c.warning_id, event, index)
            if c.warning_id in self.warning_events:
                self.push(t, _START, (c.warning_id, False))
        if violated:
            return
        gated = {arm.to for arm in branch.arms} if branch else set()
        skip_all = branch is not None and branch.else_skip and chosen is None
        for succ in self.succs[event]:
            if skip_all or succ in self.warning_events:
                continue
            if succ in gated and (chosen is None or chosen.to != succ):
                continue
            self.tokens[(event, succ)] = t
            self.try_fire(succ, t)
        if chosen is not None and chosen.to not in self.succs[event]:
            self.push(t, _START, (chosen.to, False))

    def try_fire(self, event: str, t: int) -> None:
        inputs = [(p, event) for p in self.preds[event]]
        if all(k in self.tokens for k in inputs):
            ready = max(self.tokens.pop(k) for k in inputs)
            self.push(max(ready, t), _START, (event, False))


def simulate(
    behavior: BehaviorModel,
    dynamic: DynamicModel,
    constraints: Sequence[WapConstraint],
    scenario: Scenario,
    horizon: TimeValue,
) -> Trace:
    """Run ``behavior`` against ``scenario`` until ``horizon``.

    Events that have not finished by the horizon do not appear in the trace.
    Warnings are the post-hoc ``check_wap`` of the produced entries.
    """
    scenario.check()
    if horizon.us <= 0:
        raise HorizonTooSmall("horizon must be positive")
    ticks = [t for t in scenario.ticks if t.time.us < horizon.us]
    if not ticks:
        raise HorizonTooSmall(f"no tick of scenario {scenario.name} falls before {horizon}")
    names = scenario.measurement_names
    for br in behavior.branches:
        for arm in br.arms:
            missing = arm.guard.measurements - names
            if missing:
                raise GuardMeasurementMissing(
                    f"branch at {br.at} reads {sorted(missing)} which scenario {scenario.name} does not measure"
                )
    if not behavior.events:
        return Trace()
    entries = _Run(behavior, dynamic, constraints, ticks, horizon.us).run()
    return Trace(tuple(entries), tuple(check_wap(entries, constraints)))


def format_trace(trace: Trace) -> str:
    lines = []
    for idx, e in enumerate(trace.entries):
        lines.append((e.start.us, idx, 0, f"t={e.start.us} {e.event}#{e.instance} start"))
        lines.append((e.finish.us, idx, 1, f"t={e.finish.us} {e.event}#{e.instance} finish"))
    lines.sort()
    out = [line[-1] for line in lines]
    out += [f"WARN {w.warning_id} sep={w.separation.us} bound={w.bound.us}" for w in trace.warnings]
    return "\n".join(out) + ("\n" if out else "")


def trace_to_json(trace: Trace) -> str:
    payload = {
        "entries": [
            {
                "event": e.event,
                "instance": e.instance,
                "start_us": e.start.us,
                "finish_us": e.finish.us,
                "guards": dict(sorted(e.guard_results.items())),
            }
            for e in trace.entries
        ],
        "warnings": [
            {
                "warning_id": w.warning_id,
                "earlier": list(w.instances[0]),
                "later": list(w.instances[1]),
                "separation_us": w.separation.us,
                "bound_us": w.bound.us,
            }
            for w in trace.warnings
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
