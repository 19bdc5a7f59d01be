import itertools
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tmkit.errors import BuildError
from tmkit.model import (
    FlowDecl,
    FlowEdge,
    StageDecl,
    StageKind,
    ThimacDecl,
    TriggerDecl,
    TriggerEdge,
    build_model,
    stage_adjacency_legal,
    validate,
)

C, RV, P, RL, T = (StageKind.CREATE, StageKind.RECEIVE, StageKind.PROCESS, StageKind.RELEASE, StageKind.TRANSFER)


def two_machines(*extra, kinds=StageKind):
    decls = [ThimacDecl("A"), ThimacDecl("B"), ThimacDecl("A.Sub")]
    for owner in ("A", "B", "A.Sub"):
        decls += [StageDecl(owner, k) for k in kinds]
    return build_model(decls + list(extra), "m")


def codes(diags, severity="error"):
    return sorted(d.code for d in diags if d.severity == severity)


@pytest.mark.parametrize("same", [True, False])
def test_legality_table_exhaustive(same):
    table = oracles.LEGAL_WITHIN if same else oracles.LEGAL_ACROSS
    for a, b in itertools.product(StageKind, StageKind):
        assert stage_adjacency_legal(a, b, same) == ((a.value, b.value) in table), (a, b, same)


def test_stage_kind_order_and_parse():
    assert [k.value for k in sorted(StageKind, key=lambda k: k.order)] == list(oracles.KINDS)
    assert StageKind.parse("Transfer") is T
    with pytest.raises(ValueError):
        StageKind.parse("arrive")


def test_transfer_to_create_is_illegal():
    m = two_machines()
    bad = replace(m, flows=(FlowEdge("A.transfer", "B.create"),))
    assert codes(validate(bad)) == ["IllegalFlow"]


def test_build_rejects_illegal_flow_with_all_diagnostics():
    with pytest.raises(BuildError) as exc:
        two_machines(FlowDecl("A.transfer", "B.create"), FlowDecl("B.receive", "B.create"))
    assert codes(exc.value.diagnostics) == ["IllegalFlow", "IllegalFlow"]


def test_self_loop_is_illegal():
    m = two_machines()
    assert codes(validate(replace(m, flows=(FlowEdge("A.process", "A.process"),)))) == ["IllegalFlow"]


def test_nested_thimac_counts_as_same_machine():
    m = two_machines(FlowDecl("A.create", "A.Sub.process"), FlowDecl("A.Sub.process", "A.release"))
    assert validate(m) == []
    # cross-machine rules would have rejected both
    assert not stage_adjacency_legal(C, P, False)


def test_valid_cross_machine_flow():
    m = two_machines(FlowDecl("A.release", "A.transfer"), FlowDecl("A.transfer", "B.transfer"),
                     FlowDecl("B.transfer", "B.receive"))
    assert validate(m) == []


def test_trigger_overlapping_flow_path_is_an_error():
    with pytest.raises(BuildError) as exc:
        two_machines(
            FlowDecl("A.release", "A.transfer"),
            FlowDecl("A.transfer", "B.receive"),
            TriggerDecl("B.receive", "A.release"),  # reverse direction also counts
        )
    assert codes(exc.value.diagnostics) == ["TriggerOverlapsFlow"]


def test_trigger_without_flow_path_is_fine():
    m = two_machines(FlowDecl("A.transfer", "B.receive"), TriggerDecl("B.process", "A.create"))
    assert codes(validate(m)) == []


def test_join_group_must_converge_on_one_stage():
    with pytest.raises(BuildError) as exc:
        two_machines(TriggerDecl("A.process", "B.create", "g"), TriggerDecl("B.process", "A.create", "g"))
    assert "JoinMismatch" in codes(exc.value.diagnostics)


def test_duplicate_and_unknown_references_accumulate():
    decls = [
        ThimacDecl("A"),
        ThimacDecl("A"),
        ThimacDecl("X.Y"),
        StageDecl("A", C),
        StageDecl("A", C),
        StageDecl("Nope", P),
        FlowDecl("A.create", "A.ghost"),
    ]
    with pytest.raises(BuildError) as exc:
        build_model(decls)
    assert codes(exc.value.diagnostics) == [
        "DuplicateId",
        "DuplicateId",
        "UnknownReference",
        "UnknownReference",
        "UnknownReference",
    ]


def test_invalid_ids():
    with pytest.raises(BuildError) as exc:
        build_model([ThimacDecl("9lives"), ThimacDecl("ok.create")])
    assert codes(exc.value.diagnostics) == ["InvalidId", "InvalidId"]


def test_duplicate_edge_is_a_warning_and_deduped():
    m = two_machines(FlowDecl("A.create", "A.release"), FlowDecl("A.create", "A.release"))
    assert m.flows == (FlowEdge("A.create", "A.release"),)


def test_forest_violation_detected_on_handmade_cycle():
    m = two_machines()
    a = replace(m.thimacs["A"], parent="A.Sub")
    broken = replace(m, thimacs={**m.thimacs, "A": a})
    assert "ForestViolation" in codes(validate(broken))


def test_stage_ownership_checked():
    m = two_machines()
    st_ = replace(m.stages["A.create"], owner="B")
    assert "StageOwnership" in codes(validate(replace(m, stages={**m.stages, "A.create": st_})))


def test_multi_component_is_a_warning_only():
    m = two_machines(FlowDecl("A.create", "A.release"), FlowDecl("B.create", "B.release"))
    diags = validate(m)
    assert codes(diags) == []
    assert codes(diags, "warning") == ["MULTI_COMPONENT"]


def test_empty_model_is_valid():
    assert validate(build_model([])) == []


def test_walk_roots_ancestors():
    m = two_machines()
    assert m.roots() == ["A", "B"]
    assert [t.id for t in m.walk()] == ["A", "A.Sub", "B"]
    assert m.ancestors("A.Sub") == ["A"]
    assert m.same_machine("A", "A.Sub") and not m.same_machine("A.Sub", "B")


def test_thimac_graph_is_a_forest():
    m = two_machines()
    edges = [(t.parent, t.id) for t in m.thimacs.values() if t.parent]
    assert len(edges) == sum(1 for t in m.thimacs.values() if t.parent is not None)
    for t in m.thimacs.values():
        for child in t.children:
            assert m.thimacs[child].parent == t.id


def test_edge_rendering():
    assert str(FlowEdge("a.create", "a.release")) == "flow a.create -> a.release"
    assert str(TriggerEdge("a.process", "b.create", "bar")) == "trigger a.process --> b.create join bar"


stage_names = st.sampled_from([f"{o}.{k.value}" for o in ("A", "B", "A.Sub") for k in StageKind])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(stage_names, stage_names), max_size=6))
def test_validate_agrees_with_oracle_and_is_idempotent(pairs):
    m = two_machines()
    flows = tuple(sorted({FlowEdge(a, b) for a, b in pairs}))
    cand = replace(m, flows=flows)
    first = validate(cand)
    assert first == validate(cand)
    flagged = {d.location for d in first if d.code == "IllegalFlow"}
    expected = {str(e) for e in flows if not oracles.flow_is_legal(e.src, e.dst)}
    assert flagged == expected
