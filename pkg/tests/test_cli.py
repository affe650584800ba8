import json

import pytest

from hamforge.cli import EXIT_CAP, EXIT_FAIL, EXIT_PASS, EXIT_USAGE, main

COPY_SPEC = {"circuit": {"width": 2, "gates": [["CNOT", 0, 1]], "output": 1}, "queries": [{"random": "yes"}]}
SIM_SPEC = {"source": {"qubits": 1, "terms": [{"sites": [0], "pauli": "Z"}, {"sites": [0], "pauli": "X", "weight": 0.2}]}}


def _kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line and not line.startswith(" "))


def _build(tmp_path, kind, spec, name="inst.txt", seed=0):
    sp = tmp_path / f"{kind}.json"
    sp.write_text(json.dumps(spec, indent=1))
    out = tmp_path / name
    rc = main(["build", kind, str(sp), "-o", str(out), "--seed", str(seed)])
    assert rc == EXIT_PASS
    return out


def test_build_is_deterministic(tmp_path):
    a = _build(tmp_path, "cooklevin", COPY_SPEC, "a.txt", seed=5)
    b = _build(tmp_path, "cooklevin", COPY_SPEC, "b.txt", seed=5)
    assert a.read_text() == b.read_text()
    c = _build(tmp_path, "cooklevin", COPY_SPEC, "c.txt", seed=6)
    assert c.read_text() != a.read_text()


def test_report_block(tmp_path, capsys):
    inst = _build(tmp_path, "query", {"queries": [{"random": "yes"}, {"random": "no"}]})
    capsys.readouterr()
    assert main(["solve", str(inst)]) == EXIT_PASS
    kv = _kv(capsys.readouterr().out)
    assert kv["command"] == "solve" and kv["status"] == "pass" and len(kv["digest"]) == 16
    assert "wall_time" not in kv


@pytest.mark.parametrize("status,verdict", [("yes", "YES"), ("no", "NO")])
def test_solve_cooklevin_verdicts(tmp_path, capsys, status, verdict):
    spec = dict(COPY_SPEC, queries=[{"random": status}])
    inst = _build(tmp_path, "cooklevin", spec)
    capsys.readouterr()
    assert main(["solve", str(inst)]) == EXIT_PASS
    assert _kv(capsys.readouterr().out)["verdict"] == verdict


def test_solve_simulation_bundle(tmp_path, capsys):
    inst = _build(tmp_path, "simcode", SIM_SPEC)
    capsys.readouterr()
    assert main(["solve", str(inst)]) == EXIT_PASS
    assert _kv(capsys.readouterr().out)["code"] == "pass"


def test_malformed_spec_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "queries": [\n    {"random": }\n  ]\n}\n')
    assert main(["build", "query", str(bad)]) == EXIT_USAGE
    assert "line 3" in capsys.readouterr().err
    wrong = tmp_path / "wrong.json"
    wrong.write_text(json.dumps({"circuit": {"width": 2, "gates": [["FOO", 0]], "output": 1}, "queries": []}))
    assert main(["build", "cooklevin", str(wrong)]) == EXIT_USAGE
    assert main(["solve", str(tmp_path / "missing.txt")]) == EXIT_USAGE


def test_malformed_instance_is_usage_error(tmp_path):
    f = tmp_path / "broken.txt"
    f.write_text("SITE 0 2\nTERM 1.0 0\n(1.0,0.0)\n")
    assert main(["solve", str(f)]) == EXIT_USAGE


def test_dimension_cap_exit(tmp_path):
    inst = _build(tmp_path, "simcode", SIM_SPEC)
    assert main(["solve", str(inst), "--max-dim", "2"]) == EXIT_CAP


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "hgap", "--trials", "5"],
        ["verify", "lowenergy", "--trials", "50"],
        ["verify", "projection", "--trials", "20"],
        ["verify", "union", "--trials", "50"],
        ["verify", "simulation"],
        ["verify", "onedim", "--legal-subspace"],
    ],
)
def test_verify_commands_pass(argv, capsys):
    assert main(argv) == EXIT_PASS
    assert _kv(capsys.readouterr().out)["status"] == "pass"


def test_verify_output_is_deterministic(capsys):
    main(["verify", "union", "--trials", "20", "--seed", "3"])
    first = capsys.readouterr().out
    main(["verify", "union", "--trials", "20", "--seed", "3"])
    assert capsys.readouterr().out == first


def test_machine_command(tmp_path, capsys):
    sp = tmp_path / "m.json"
    sp.write_text(json.dumps(COPY_SPEC))
    assert main(["machine", str(sp)]) == EXIT_PASS
    assert _kv(capsys.readouterr().out)["output"] == "1"


def test_failed_flag_exits_one(tmp_path, capsys):
    # a simulation bundle whose declared epsilon is tighter than the measured residual
    inst = _build(tmp_path, "simcode", SIM_SPEC)
    text = inst.read_text()
    lines = [ln if not ln.startswith("META epsilon") else "META epsilon 1e-300" for ln in text.splitlines()]
    inst.write_text("\n".join(lines) + "\n")
    assert main(["solve", str(inst)]) == EXIT_FAIL
