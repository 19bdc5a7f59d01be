import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tmkit import corpus
from tmkit.dsl import MAX_ERRORS, TMParseError, parse, parse_scenarios, serialize, tokenize
from tmkit.events import Anchor, TimeValue
from tmkit.model import StageKind


def errors_of(text):
    with pytest.raises(TMParseError) as exc:
        parse(text, "t.tm")
    return exc.value.errors


def test_minimal_model():
    doc = parse('model "m"\nthimac A { create @1 }\n')
    assert doc.model.name == "m"
    assert doc.model.stages["A.create"].anchor == 1
    assert doc.partition is None and doc.dynamic is None and doc.behavior is None


def test_empty_input_needs_model_header():
    [err] = errors_of("")
    assert err.expected == "'model'" and err.found == "end of input"


def test_labels_escapes_and_comments():
    doc = parse('model "a \\"b\\"" # trailing\nthimac A "x\\ty" { create "c\\nd" }\n')
    assert doc.model.name == 'a "b"'
    assert doc.model.thimacs["A"].name == "x\ty"
    assert doc.model.stages["A.create"].label == "c\nd"


def test_syntax_error_spans_point_at_the_token():
    [err] = errors_of('model "m"\nthimac A {\n  create\n  explode\n}\n')
    assert (err.span.file, err.span.line, err.span.column) == ("t.tm", 4, 3)
    assert err.found == "'explode'"


def test_recovery_reports_several_errors():
    errs = errors_of('model "m"\nthimac A { create }\nflow A.create ->\nthimac { }\nregion R A.create }\n')
    assert [(e.span.line, e.span.column) for e in errs] == [(4, 1), (4, 8), (5, 10)]


def test_error_cap():
    text = 'model "m"\n' + "flow ->\n" * 50
    assert len(errors_of(text)) == MAX_ERRORS


def test_unterminated_string():
    err = errors_of('model "m\n')[0]
    assert (err.span.line, err.span.column, err.expected) == (1, 7, "closing quote")


def test_deep_nesting_is_reported_not_crashed():
    text = 'model "m"\n' + "thimac A { " * 150 + "}" * 150
    errs = errors_of(text)
    assert any("nest" in e.expected for e in errs)


def test_build_errors_carry_codes_and_spans():
    errs = errors_of('model "m"\nthimac A { transfer }\nthimac B { create }\nflow A.transfer -> B.create\n')
    assert [e.code for e in errs] == ["IllegalFlow"]
    assert errs[0].span.line == 4


def test_reference_errors():
    text = """model "m"
thimac A { create release }
flow A.create -> A.release
region R { A.create, A.release }
event E region Q
behavior { E -> F }
wap E.finish - G.start <= 5 ms
"""
    codes = [e.code for e in errors_of(text)]
    assert codes.count("UnknownRegion") == 1
    assert codes.count("UnknownEvent") == 2


def test_events_behavior_wap_and_scenarios():
    doc = corpus.load("airbag")
    assert doc.dynamic.event("E1").duration == TimeValue(2, "ms")
    assert doc.behavior.repeats == ("E1", "E2", "E3")
    br = doc.behavior.branches[0]
    assert (br.at, br.arms[0].to, str(br.arms[0].guard), br.else_skip) == ("E1", "E4", "speed_drop >= 20", True)
    c = doc.constraints[0]
    assert (c.earlier.event, c.earlier.anchor, c.later.anchor) == ("E1", Anchor.START, Anchor.FINISH)
    assert (c.max_separation.us, c.warning_id) == (5000, "E6")
    tick = doc.scenarios["slow_sensor"].ticks[0]
    assert tick.measurements == {"speed_drop": 25, "angle": 20, "frontal": 1}
    assert tick.delays["E1"] == TimeValue(6, "ms")


def test_wap_default_warning_id():
    doc = parse('model "m"\nthimac A { create release }\nflow A.create -> A.release\n'
                "region R { A.create, A.release }\nevent E region R\nwap E.finish - E.start <= 3 us\n")
    assert doc.constraints[0].warning_id == "wap_E"


def test_compound_guard_and_float_threshold():
    doc = parse('model "m"\nthimac A { create release }\nthimac B { create }\nflow A.create -> A.release\n'
                "region R { A.create, A.release }\nregion S { B.create }\nevent E region R\nevent F region S\n"
                "behavior { branch E { when x >= 1.5 and y == 2 -> F, else -> skip } }\n")
    guard = doc.behavior.branches[0].arms[0].guard
    assert str(guard) == "x >= 1.5 and y == 2"
    assert guard.evaluate({"x": 1.5, "y": 2}) and not guard.evaluate({"x": 1.4, "y": 2})


def test_scenario_validation():
    errs = errors_of('model "m"\nscenario s { tick 5 ms { a = 1 } tick 5 ms { a = 2 } }\n')
    assert [e.code for e in errs] == ["ScenarioError"]
    errs = errors_of('model "m"\nscenario s { tick 0 ms { a = 1 } tick 1 ms { b = 2 } }\n')
    assert [e.code for e in errs] == ["ScenarioError"]


def test_parse_scenarios_file():
    text = (corpus.CORPUS_DIR / "scenarios" / "airbag_boundary.tm").read_text()
    scs = parse_scenarios(text)
    assert list(scs) == ["at_bound", "past_bound"]
    assert scs["past_bound"].ticks[0].delays["E1"].us == 5001
    with pytest.raises(TMParseError):
        parse_scenarios('thimac A { }\n')


def test_tokenizer_kinds():
    toks, errs = tokenize('a.b --> 1.5e3 "s" @ <= -')
    assert errs == []
    assert [t.kind for t in toks] == ["ident", "sym", "ident", "sym", "float", "string", "sym", "sym", "sym", "eof"]


@pytest.mark.parametrize("name", ["heart", "car", "airbag"])
def test_serialize_is_a_fixed_point(name):
    doc = corpus.load(name)
    text = serialize(doc)
    again = parse(text)
    assert again == doc
    assert serialize(again) == text


def test_serialize_bare_model():
    doc = corpus.load("heart")
    text = serialize(doc.model)
    assert "region" not in text
    assert parse(text).model == doc.model


def test_stage_order_is_canonical():
    doc = parse('model "m"\nthimac A { transfer release create }\n')
    assert [doc.model.stages[s].kind for s in doc.model.thimacs["A"].stages] == [
        StageKind.CREATE,
        StageKind.RELEASE,
        StageKind.TRANSFER,
    ]


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_models_round_trip(seed):
    doc = parse(oracles.random_model_text(random.Random(seed)))
    assert parse(serialize(doc)) == doc


ALPHABET = st.sampled_from(
    ['model "m"', "thimac", "A", "B", "{", "}", "create", "process", "flow", "->", "-->", "region",
     "event", "E", "behavior", "branch", "when", "x", ">=", "1", "ms", ",", ".", "@", '"', "\n", "#", "wap", "-"]
)


@settings(max_examples=300, deadline=None)
@given(st.lists(ALPHABET, max_size=40))
def test_parser_is_total(tokens):
    text = " ".join(tokens)
    try:
        parse(text)
    except TMParseError as exc:
        assert 1 <= len(exc.errors) <= MAX_ERRORS


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=80))
def test_parser_is_total_on_arbitrary_text(text):
    try:
        parse(text)
    except TMParseError:
        pass
