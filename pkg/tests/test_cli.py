import json

import pytest

from plaplab.cli import bundled_scenarios, main, parse_domain, parse_weight
from plaplab.errors import ConfigurationError

SCENARIO = """
name = "cli"
checks = ["thm11"]
p = [2.0]
resolutions = [33, 65, 129]
{extra}
[domain]
kind = "interval"
bounds = [0.0, 1.0]
"""


def write(tmp_path, extra="", name="s.toml"):
    f = tmp_path / name
    f.write_text(SCENARIO.format(extra=extra))
    return str(f)


def test_check_pass_exit_zero(tmp_path, capsys):
    assert main(["check", write(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdicts"][0]["outcome"] == "pass"


def test_check_unexpected_exit_one(tmp_path, capsys):
    assert main(["check", write(tmp_path, 'expect = "fail"')]) == 1


def test_config_error_exit_two(tmp_path, capsys):
    assert main(["check", str(tmp_path / "nope.toml")]) == 2
    f = tmp_path / "bad.toml"
    f.write_text('name = "x"\nresolutions = [64]\n[domain]\nkind = "interval"\nbounds = [0, 1]\n')
    assert main(["check", str(f)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unwritable_output_exit_two(tmp_path, capsys):
    assert main(["check", write(tmp_path), "--out", str(tmp_path / "no" / "r.json")]) == 2
    assert str(tmp_path / "no") in capsys.readouterr().err


def test_csv_output_to_file(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["check", write(tmp_path), "--format", "csv", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    assert out.read_text().startswith("claim,p,alpha,")


def test_solve(capsys):
    assert main(["solve", "--n", "65", "--problem", "plate"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["problem"] == "plate" and doc["converged"]
    assert main(["solve", "--n", "65", "--format", "csv", "--weight", "linear:a=2"]) == 0
    assert capsys.readouterr().out.startswith("problem,p,resolution,lambda")


def test_solve_bad_parameters(capsys):
    assert main(["solve", "--p", "1.0"]) == 2
    assert main(["solve", "--domain", "disk"]) == 2


def test_seed_and_tol_overrides(tmp_path, capsys):
    assert main(["check", write(tmp_path), "--seed", "3", "--tol", "1e-6"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["scenario"]["seed"] == 3 and doc["scenario"]["solver"]["tol"] == 1e-6


def test_sweep(tmp_path, capsys):
    f = write(tmp_path, "[sweep]\np = [2.0, 3.0]\n")
    assert main(["sweep", f, "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 3
    assert "cell[p=2]" in lines[1] and "cell[p=3]" in lines[2]


def test_convergence(tmp_path, capsys):
    assert main(["convergence", write(tmp_path), "--problem", "plate", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "problem,p,resolution,h,value,richardson"
    assert len(lines) == 4


def test_scenarios_listing(capsys):
    assert main(["scenarios"]) == 0
    out = capsys.readouterr().out
    for name in bundled_scenarios():
        assert name in out


def test_bundled_by_name(capsys):
    assert main(["check", "interval-thm12-case1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert {v["outcome"] for v in doc["verdicts"]} == {"inconclusive"}


def test_parsers():
    d = parse_domain("rectangle:0,2,0,1", 9)
    assert d.kind == "rectangle"
    assert parse_weight("quadratic:c=1,x0=0.5;0.5").params["x0"] == [0.5, 0.5]
    with pytest.raises(ConfigurationError):
        parse_domain("interval:0", 9)
    with pytest.raises(ConfigurationError):
        parse_weight("linear:a=x")
