"""Command-line interface: every command and every exit code."""
from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from crsing.cli import main
from crsing.samples import cubic_coupling_example


def write(tmp_path, name, data):
    path = tmp_path / name
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


BISHOP = {"p": 1, "truncation": 4, "components": [{"type": "elliptic", "gamma": "2/5"}]}
HYPER = {"p": 1, "truncation": 4, "components": [{"type": "hyperbolic", "gamma": 1}]}
HC = {"p": 3, "truncation": 4, "components": [{"type": "hyperbolic", "gamma": "5/6", "rotation": "irrational"},
                                              {"type": "complex", "gamma": "1/4"}]}
DESTROYED = {"p": 2, "truncation": 4, "E": [
    {"target": 1, "z_exp": [1, 0], "zbar_exp": [1, 0], "coeff": 1},
    {"target": 1, "z_exp": [0, 0], "zbar_exp": [2, 0], "coeff": "1/4"},
    {"target": 1, "z_exp": [0, 0], "zbar_exp": [0, 3], "coeff": 1},
    {"target": 2, "z_exp": [0, 1], "zbar_exp": [0, 1], "coeff": 1},
    {"target": 2, "z_exp": [0, 0], "zbar_exp": [0, 2], "coeff": "1/4"},
    {"target": 2, "z_exp": [0, 0], "zbar_exp": [3, 0], "coeff": 1},
]}
CUBIC = cubic_coupling_example(4).to_json()


def run(*args):
    res = CliRunner().invoke(main, list(args))
    payload = json.loads(res.output) if res.output.strip().startswith("{") else None
    return res.exit_code, payload


@pytest.mark.parametrize("command", ["classify", "deck", "normal-form", "rigidity", "hull"])
def test_elliptic_commands_succeed(tmp_path, command):
    code, out = run(command, write(tmp_path, "b.json", BISHOP))
    assert code == 0, out
    assert out["command"] == command and out["exit_code"] == 0


def test_classify_values(tmp_path):
    _, out = run("classify", write(tmp_path, "b.json", BISHOP))
    comp = out["report"]["components"][0]
    assert comp["lambda"] == {"re": "2", "im": "0"}
    assert comp["mu"] == {"re": "4", "im": "0"}


def test_attach_quadric(tmp_path):
    code, out = run("attach", write(tmp_path, "h.json", HYPER), "--eps-class", "+")
    assert code == 0
    r = out["attach"]["results"][0]
    assert r["diagnostics"]["involution_residual"] == [0.0, 0.0]
    assert out["attach"]["invariance"][0]["tangent_ok"]


def test_attach_all_classes(tmp_path):
    code, out = run("attach", write(tmp_path, "hc.json", HC), "--order", "3")
    assert code == 0 and out["attach"]["count"] == out["attach"]["expected"] == 2


@pytest.mark.parametrize("data, command", [
    (BISHOP, "attach"),
    (CUBIC, "attach"),
    (DESTROYED, "deck"),
    (DESTROYED, "normal-form"),
    (DESTROYED, "rigidity"),
    (HYPER, "hull"),
])
def test_obstructions_exit_one(tmp_path, data, command):
    code, out = run(command, write(tmp_path, "m.json", data))
    assert code == 1, out
    assert out["exit_code"] == 1


@pytest.mark.parametrize("content", [
    "{not json",
    {"truncation": 3},
    {"p": 1, "components": [{"type": "elliptic", "gamma": "3/4"}]},
    {"p": 1, "components": [{"type": "elliptic", "gamma": "1/4"}],
     "perturbation": [{"target": 5, "z_exp": [2], "zbar_exp": [0]}]},
])
def test_input_errors_exit_two(tmp_path, content):
    code, out = run("classify", write(tmp_path, "bad.json", content))
    assert code == 2 and out["error"] == "input"


def test_missing_file_exit_two(tmp_path):
    code, out = run("deck", str(tmp_path / "missing.json"))
    assert code == 2


def test_bad_eps_class_exit_two(tmp_path):
    code, _ = run("attach", write(tmp_path, "h.json", HYPER), "--eps-class", "+0")
    assert code == 2


def test_small_divisors_nu(tmp_path):
    code, out = run("small-divisors", write(tmp_path, "nu.json", {"nu": [2]}), "--kmax", "3")
    assert code == 0 and out["omega_nu"]["omega"] == [2.0, 2.0, 2.0]


def test_small_divisors_spec(tmp_path):
    code, out = run("small-divisors", write(tmp_path, "hc.json", HC), "--kmax", "2", "--eps-class", "++")
    assert code == 0
    assert "omega_ideal" in out and "omega_nu" in out


def test_small_divisors_scan_for_elliptic(tmp_path):
    code, out = run("small-divisors", write(tmp_path, "b.json", BISHOP), "--kmax", "3")
    assert code == 0 and out["poincare_scan"]["checked"] > 0


def test_budget_exceeded_exit_three(tmp_path):
    code, out = run("small-divisors", write(tmp_path, "nu.json", {"nu": [2, 3, 5]}), "--kmax", "40")
    assert code == 3 and out["error"] == "budget exceeded"


def test_text_output_and_file(tmp_path):
    dest = tmp_path / "out.txt"
    code, _ = run("classify", write(tmp_path, "b.json", BISHOP), "--output", "text", "-o", str(dest))
    assert code == 0
    text = dest.read_text()
    assert "command: classify" in text and "conditionB" in text


def test_float_backend(tmp_path):
    code, out = run("deck", write(tmp_path, "b.json", BISHOP), "--backend", "float")
    assert code == 0 and out["verification"]["passes"]


def test_hull_grid(tmp_path):
    code, out = run("hull", write(tmp_path, "b.json", BISHOP), "--kmax", "4")
    assert code == 0 and len(out["table"]) == 5
    assert out["table"][0]["degenerate"] == [True]
