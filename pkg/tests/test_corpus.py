import pytest

from tmkit import corpus
from tmkit.model import validate


def test_corpus_check_passes():
    results = corpus.corpus_check()
    assert [r.name for r in results] == ["heart", "car", "airbag"]
    for r in results:
        assert r.ok, str(r)


def test_goldens_regenerate_byte_identically(tmp_path):
    written = corpus.regenerate_goldens(tmp_path)
    assert len(written) == 20
    for path in written:
        assert path.read_bytes() == (corpus.GOLDEN_DIR / path.name).read_bytes(), path.name
    assert sorted(p.name for p in corpus.GOLDEN_DIR.iterdir()) == sorted(p.name for p in written)


def test_check_reports_a_tampered_golden(tmp_path):
    corpus.regenerate_goldens(tmp_path)
    (tmp_path / "heart.json").write_text("{}\n")
    (tmp_path / "car.trip.trace").unlink()
    results = {r.name: r for r in corpus.corpus_check(tmp_path)}
    assert results["heart"].mismatches == ["golden heart.json differs from re-export"]
    assert results["car"].mismatches == ["golden car.trip.trace missing"]
    assert results["airbag"].ok
    assert str(results["car"]).startswith("FAIL car")


@pytest.mark.parametrize("name", ["heart", "car", "airbag"])
def test_models_validate_clean(name):
    assert validate(corpus.load(name).model) == []


def test_car_behavior_is_one_chain():
    b = corpus.load("car").behavior_model()
    events = [f"E{i:02}" for i in range(1, 11)]
    assert b.edges == set(zip(events, events[1:]))


def test_airbag_entry():
    doc = corpus.load("airbag")
    assert doc.dynamic.ids == [f"E{i}" for i in range(1, 9)]
    assert doc.behavior.repeats == ("E1", "E2", "E3")
    guards = {br.at: str(br.arms[0].guard) for br in doc.behavior.branches}
    assert guards == {"E1": "speed_drop >= 20", "E2": "angle < 30", "E3": "frontal == 1"}
    assert all(br.arms[0].to == "E4" and br.else_skip for br in doc.behavior.branches)
    assert [(c.warning_id, c.max_separation.us) for c in doc.constraints] == [
        ("E6", 5000),
        ("E7", 5000),
        ("E8", 5000),
    ]
    # the three sensor paths meet at one join group
    joins = {t.join for t in doc.model.triggers if t.dst == "Control.Activation.create"}
    assert joins == {"bar"}


def test_corpus_module_main(capsys):
    assert corpus.main([]) == 0
    assert capsys.readouterr().out.splitlines() == ["PASS heart", "PASS car", "PASS airbag"]


def test_unknown_entry():
    with pytest.raises(KeyError):
        corpus.load("dragon")
