"""Exception hierarchy shared by every tmkit module."""

from __future__ import annotations


class TMError(Exception):
    """Base class for all tmkit errors."""


class BuildError(TMError):
    """A static model could not be built; carries every diagnostic found."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        errors = [d for d in self.diagnostics if d.severity == "error"]
        super().__init__(f"{len(errors)} error(s) while building model")


class PartitionError(TMError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))


class CycleError(TMError):
    """Raised when an ordering graph that must be acyclic contains a cycle."""

    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("cycle: " + " -> ".join(self.cycle))


class MultiComponentError(TMError):
    def __init__(self, components):
        self.components = [tuple(sorted(c)) for c in components]
        super().__init__(
            f"precedence graph has {len(self.components)} weakly connected components"
        )


class UnknownRegion(TMError, KeyError):
    def __str__(self):
        return f"unknown region {self.args[0]!r}"


class UnknownEvent(TMError, KeyError):
    def __str__(self):
        return f"unknown event {self.args[0]!r}"


class DuplicateEventForRegion(TMError):
    pass


class TooLarge(TMError):
    pass


class ScenarioError(TMError):
    pass


class GuardMeasurementMissing(TMError):
    pass


class HorizonTooSmall(TMError):
    pass


class SchemaVersionMismatch(TMError):
    pass


class MalformedJson(TMError):
    pass
