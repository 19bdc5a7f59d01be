"""Thinging-machine models: static structure, change order, timed behavior."""

from .changes import (
    ChangePartition,
    OrderClass,
    PrecedenceDag,
    Region,
    build_partition,
    classify_pair,
    derive_precedence,
    enumerate_chronologies,
    normalize_consecutive,
)
from .document import Document
from .dsl import parse, parse_scenarios, serialize
from .events import (
    BehaviorModel,
    DynamicModel,
    EventSpec,
    TimeValue,
    WapConstraint,
    build_behavior,
    check_isomorphism,
    lift_to_events,
)
from .exporters import ExportOptions, Target, from_json, to_dot, to_json
from .model import StageKind, StaticModel, build_model, stage_adjacency_legal, validate
from .simulator import Scenario, Trace, check_wap, simulate

__version__ = "0.1.0"
