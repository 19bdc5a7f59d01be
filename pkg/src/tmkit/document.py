"""A model file's full contents: S, its partition, D, B, wap constraints, scenarios."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .changes import ChangePartition, PrecedenceDag, derive_precedence
from .errors import ScenarioError
from .events import BehaviorModel, BehaviorSpec, DynamicModel, TimeValue, WapConstraint, build_behavior
from .model import StaticModel
from .simulator import Scenario, Trace, simulate


@dataclass(frozen=True)
class Document:
    model: StaticModel = field(default_factory=StaticModel)
    partition: ChangePartition | None = None
    dynamic: DynamicModel | None = None
    behavior: BehaviorSpec | None = None
    constraints: tuple[WapConstraint, ...] = ()
    scenarios: Mapping[str, Scenario] = field(default_factory=dict)

    def regions_or_empty(self) -> ChangePartition:
        return self.partition if self.partition is not None else ChangePartition(self.model, ())

    def precedence(self, allow_multi: bool = False) -> PrecedenceDag:
        return derive_precedence(self.model, self.regions_or_empty(), allow_multi=allow_multi)

    def dynamic_or_empty(self) -> DynamicModel:
        return self.dynamic if self.dynamic is not None else DynamicModel(self.regions_or_empty(), ())

    def behavior_model(self, allow_multi: bool = False, manual_edges: bool = True) -> BehaviorModel:
        spec = self.behavior or BehaviorSpec()
        dynamic = self.dynamic_or_empty()
        if not dynamic.events:
            return BehaviorModel()
        return build_behavior(
            dynamic,
            self.precedence(allow_multi),
            repeats=spec.repeats,
            branches=spec.branches,
            extra_edges=spec.edges if manual_edges else (),
        )

    def event_mapping(self) -> dict[str, str]:
        return self.dynamic_or_empty().region_to_event()

    def simulate(self, scenario: str | Scenario, horizon: TimeValue, allow_multi: bool = False) -> Trace:
        if isinstance(scenario, str):
            if scenario not in self.scenarios:
                raise ScenarioError(f"no scenario named {scenario!r}")
            scenario = self.scenarios[scenario]
        return simulate(self.behavior_model(allow_multi), self.dynamic_or_empty(), self.constraints, scenario, horizon)
