import io
import json
import subprocess
import sys

import pytest

from tmkit import corpus
from tmkit.cli import main, parse_time
from tmkit.events import TimeValue

HEART = str(corpus.CORPUS_DIR / "heart.tm")
CAR = str(corpus.CORPUS_DIR / "car.tm")
AIRBAG = str(corpus.CORPUS_DIR / "airbag.tm")
BOUNDARY = str(corpus.CORPUS_DIR / "scenarios" / "airbag_boundary.tm")


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_validate_heart():
    code, out, _ = run("validate", HEART)
    assert code == 0 and "0 errors" in out


def test_validate_reports_parse_errors(tmp_path):
    bad = tmp_path / "bad.tm"
    bad.write_text('model "m"\nthimac A { transfer }\nthimac B { create }\nflow A.transfer -> B.create\n')
    code, out, _ = run("validate", str(bad))
    assert code == 1
    assert out.splitlines()[-1] == "1 errors"
    assert "IllegalFlow" in out and "bad.tm:4:6" in out


def test_warnings_fail_only_under_strict(tmp_path):
    f = tmp_path / "two.tm"
    f.write_text('model "m"\nthimac A { create release }\nthimac B { create release }\n'
                 "flow A.create -> A.release\nflow B.create -> B.release\n")
    code, out, _ = run("validate", str(f))
    assert code == 0 and "MULTI_COMPONENT" in out and "0 errors, 1 warnings" in out
    assert run("--strict", "validate", str(f))[0] == 1
    assert run("validate", "--strict", str(f))[0] == 1


def test_changes():
    code, out, _ = run("changes", HEART)
    assert code == 0
    assert "C4       4  yes" in out and "unassigned stages: 0" in out


def test_order():
    code, out, _ = run("order", HEART)
    assert code == 0
    assert out.splitlines()[:4] == [
        "C1 -> C3 (flow)",
        "C1 -> C4 (flow)",
        "C2 -> C4 (flow)",
        "C3 -> C4 (trigger)",
    ]
    assert "C2   |  =  |  <" in out


def test_chronologies_heart():
    code, out, _ = run("chronologies", HEART)
    assert code == 0
    assert out.splitlines() == ["C1 C2 C3 C4", "C1 C3 C2 C4", "C2 C1 C3 C4", "total: 3"]


def test_chronologies_limit_and_multi(tmp_path):
    code, out, _ = run("chronologies", AIRBAG, "--limit", "2")
    assert code == 0 and out.splitlines()[-2:] == ["... 628 more", "total: 630"]
    f = tmp_path / "two.tm"
    f.write_text('model "m"\nthimac A { create }\nthimac B { create }\nregion X { A.create }\nregion Y { B.create }\n')
    code, _, err = run("chronologies", str(f))
    assert code == 1 and "MultiComponentError" in err
    code, out, _ = run("chronologies", str(f), "--allow-multi")
    assert code == 0 and out.splitlines()[-1] == "total: 2"
    assert run("chronologies", HEART, "--limit", "0")[0] == 2


def test_simulate_slow_sensor():
    code, out, _ = run("simulate", AIRBAG, "--scenario", "slow_sensor")
    assert code == 0
    assert "WARN E6 sep=6000 bound=5000" in out
    assert run("--strict", "simulate", AIRBAG, "--scenario", "slow_sensor")[0] == 1


def test_simulate_with_scenario_file_and_horizon():
    code, out, _ = run("simulate", AIRBAG, "--scenario", "past_bound", "--scenario-file", BOUNDARY)
    assert code == 0 and out.splitlines()[-1] == "WARN E6 sep=5001 bound=5000"
    code, out, _ = run("simulate", AIRBAG, "--scenario", "at_bound", "--scenario-file", BOUNDARY)
    assert "WARN" not in out and "E5#0 finish" in out
    code, out, _ = run("simulate", AIRBAG, "--scenario", "nominal", "--horizon", "1ms")
    assert code == 0 and out == ""


def test_simulate_errors():
    assert run("simulate", AIRBAG, "--scenario", "nope")[0] == 2
    assert run("simulate", AIRBAG)[0] == 2
    assert run("simulate", AIRBAG, "--scenario", "nominal", "--horizon", "soon")[0] == 2
    code, _, err = run("simulate", AIRBAG, "--scenario", "nominal", "--horizon", "0")
    assert code == 1 and "HorizonTooSmall" in err


def test_export(tmp_path):
    code, out, _ = run("export", HEART, "--format", "json")
    assert code == 0 and json.loads(out)["tm_schema"] == 1
    target = tmp_path / "car.dot"
    code, out, _ = run("export", CAR, "--format", "dot", "--target", "behavior", "-o", str(target))
    assert code == 0 and out == ""
    assert target.read_text() == (corpus.GOLDEN_DIR / "car.behavior.dot").read_text()
    assert run("export", HEART, "--format", "svg")[0] == 2
    assert run("export", HEART, "--format", "dot", "-o", str(tmp_path / "no" / "such" / "dir.dot"))[0] == 2


def test_usage_errors():
    assert run()[0] == 2
    assert run("bogus")[0] == 2
    assert run("validate")[0] == 2
    assert run("validate", "/no/such/file.tm")[0] == 2
    assert run("--help")[0] == 0


def test_color_is_opt_in(monkeypatch, tmp_path):
    f = tmp_path / "two.tm"
    f.write_text('model "m"\nthimac A { create release }\nthimac B { create release }\n'
                 "flow A.create -> A.release\nflow B.create -> B.release\n")
    assert "\x1b[" not in run("validate", str(f))[1]
    monkeypatch.setenv("TMKIT_COLOR", "1")
    assert "\x1b[33mwarning\x1b[0m" in run("validate", str(f))[1]


def test_parse_time():
    assert parse_time("5ms") == TimeValue(5, "ms")
    assert parse_time("250") == TimeValue(250, "us")
    assert parse_time(" 2 s ") == TimeValue(2, "s")


def test_output_is_deterministic():
    assert run("order", AIRBAG) == run("order", AIRBAG)


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "tmkit", "chronologies", HEART], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and proc.stdout.endswith("total: 3\n")
