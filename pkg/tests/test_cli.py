import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from netmix.cli import main

INST = Path(__file__).parent.parent / "instances"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_atoms(capsys):
    code, out, _ = run(capsys, "atoms", "--instance", INST / "fig2.json")
    assert code == 0
    assert "atoms: {{1,2},{3}}" in out and "L_max=2" in out


def test_validate(capsys, tmp_path):
    assert run(capsys, "validate", "--instance", INST / "fig2.json")[0] == 0
    bad = json.loads((INST / "fig2.json").read_text())
    bad["edges"].append({"tail": 5, "head": 4, "capacity": 1, "cost": {"kind": "linear", "a": 1}})
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    code, out, _ = run(capsys, "validate", "--instance", p)
    assert code == 2 and "cycle" in out


def test_infeasible_level_message(capsys, tmp_path):
    code, out, _ = run(capsys, "solve", "--instance", INST / "fig2.json", "--L", 1, "--out-dir", tmp_path)
    assert code == 1
    assert "infeasible at L=1; try --L 2 (L_max=2)" in out


def test_bad_level(capsys):
    assert run(capsys, "solve", "--instance", INST / "fig2.json", "--L", 7)[0] == 2


def test_usage_error(capsys):
    assert run(capsys, "solve")[0] == 2


@pytest.mark.parametrize("method", ["discrete", "oracle"])
def test_solve_and_realize(capsys, tmp_path, method):
    code, out, _ = run(
        capsys, "solve", "--instance", INST / "fig2.json", "--method", method, "--seed", 3, "--out-dir", tmp_path
    )
    assert code == 0 and "cost=10" in out
    design, flows = tmp_path / "fig2.design.json", tmp_path / "fig2.flows.json"
    assert design.exists() and flows.exists()
    code_out = tmp_path / "code.json"
    code, out, _ = run(
        capsys, "realize", "--instance", INST / "fig2.json", "--design", design, "--flows", flows,
        "--code-out", code_out,
    )
    assert code in (0, 1)
    if code == 0:
        assert "terminal 7: decodable" in out
        assert json.loads(code_out.read_text())["q"] == 101
    else:
        assert "not realizable with these supports" in out


def test_field_too_small(capsys, tmp_path):
    run(capsys, "solve", "--instance", INST / "fig2.json", "--method", "oracle", "--out-dir", tmp_path)
    code, _, err = run(
        capsys, "realize", "--instance", INST / "fig2.json", "--design", tmp_path / "fig2.design.json",
        "--flows", tmp_path / "fig2.flows.json", "--q", 2,
    )
    assert code == 2 and "must exceed" in err


def test_baselines(capsys):
    code, out, _ = run(capsys, "baseline", "--instance", INST / "fig2.json", "--kind", "two-step")
    assert code == 0 and "cost=10" in out
    code, out, _ = run(capsys, "baseline", "--instance", INST / "fig2.json", "--kind", "intra")
    assert code == 1


def test_oracle_csv(capsys):
    code, out, _ = run(capsys, "oracle", "--instance", INST / "fig2.json")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert rows == [{"L": "1", "cost": "inf", "designs": "0"}, {"L": "2", "cost": "10", "designs": "312"}]


def test_generate_and_bench(capsys, tmp_path):
    p = tmp_path / "g.json"
    assert run(capsys, "generate", "--seed", 5, "--out", p)[0] == 0
    assert run(capsys, "validate", "--instance", p)[0] == 0
    code, out, _ = run(
        capsys, "bench", p, INST / "butterfly.json", "--methods", "oracle", "two-step", "--attempts", 5
    )
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert list(rows[0]) == ["instance", "method", "L", "cost", "feasible", "iterations", "seconds"]
    bf = [r for r in rows if r["instance"] == "butterfly"]
    assert {r["method"] for r in bf} == {"oracle", "two-step"}
    assert all(float(r["cost"]) == pytest.approx(7) for r in bf)


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "netmix", "atoms", "--instance", str(INST / "butterfly.json")],
        capture_output=True, text=True,
    )
    assert res.returncode == 0 and "L_max=1" in res.stdout


def test_explicit_paths_and_trace(capsys, tmp_path):
    d, f, tr = tmp_path / "d.json", tmp_path / "f.json", tmp_path / "trace.csv"
    code, _, _ = run(
        capsys, "solve", "--instance", INST / "fig2.json", "--attempts", 3, "--seed", 3,
        "--design-out", d, "--flow-out", f, "--cfl-trace", tr,
    )
    assert code == 0 and d.exists() and f.exists()
    rows = list(csv.DictReader(tr.open()))
    assert rows and set(rows[0]) == {"attempt", "round", "unsatisfied"}
    assert {r["attempt"] for r in rows} <= {"1", "2", "3"}
    code, out, _ = run(capsys, "realize", "--instance", INST / "fig2.json", "--design-in", d, "--flow-in", f)
    assert code in (0, 1)
