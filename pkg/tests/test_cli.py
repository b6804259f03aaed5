import json
import subprocess
import sys
from pathlib import Path

import pytest

from nashbc.cli import main

INSTANCES = Path(__file__).resolve().parent.parent / "instances"


def run(capsys, *argv: str) -> tuple[int, dict | None]:
    code = main(list(argv))
    out = capsys.readouterr().out
    try:
        return code, json.loads(out)
    except json.JSONDecodeError:
        return code, None


def inst(name: str) -> str:
    return str(INSTANCES / name)


def test_solve_t1(capsys):
    code, doc = run(capsys, "solve", "--instance", inst("t1.json"), "--alpha", "1", "--beta", "0")
    assert code == 0
    assert doc["status"] == "NeFound" and doc["witness"] == [0.0]
    assert doc["instance"] == "t1.json"
    assert list(doc)[:7] == ["instance", "status", "witness", "alpha", "beta", "stats",
                             "wall_time_s"]


def test_solve_without_equilibrium(capsys):
    code, doc = run(capsys, "solve", "--instance", inst("gmp2.json"))
    assert code == 1 and doc["status"] == "NoNeExists"


def test_node_limit_exit(capsys):
    code, doc = run(capsys, "solve", "--instance", inst("gmp2.json"), "--node-limit", "0")
    assert code == 2 and doc["status"] == "NodeLimit"


def test_missing_file(capsys, tmp_path):
    assert main(["solve", "--instance", str(tmp_path / "nope.json")]) == 3


def test_malformed_document(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"mode": "NEP"}')
    assert main(["solve", "--instance", str(bad)]) == 3


def test_usage_errors(capsys):
    assert main(["solve", "--instance", inst("t1.json"), "--alpha", "0.5"]) == 4
    for argv in (["best-alpha", "--instance", inst("t1.json"), "--variant", "bogus"],
                 ["nonsense"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 4


def test_best_alpha_gmp2(capsys, tmp_path):
    trace = tmp_path / "trace.csv"
    code, doc = run(capsys, "best-alpha", "--instance", inst("gmp2.json"), "--variant",
                    "multitree", "--trace", str(trace))
    assert code == 0
    assert doc["alpha_lo"] <= 2.0 <= doc["alpha_hi"]
    assert trace.read_text().startswith("iteration,alpha_probe,status")


def test_best_alpha_unbounded(capsys):
    code, doc = run(capsys, "best-alpha", "--instance", inst("matching-pennies.json"))
    assert code == 1 and doc["status"] == "AlphaUnbounded"


def test_flow_solve_and_verify(capsys):
    code, doc = run(capsys, "solve", "--instance", inst("fg1.json"))
    assert code == 0 and "flow" in doc
    code, doc = run(capsys, "verify", "--instance", inst("fg1.json"), "--profile", "0,1,1,7,0")
    assert code == 0 and doc["is_ne"]
    assert all(doc["implementation"].values())


def test_verify_against_oracle(capsys):
    code, doc = run(capsys, "verify", "--instance", inst("gnep-toy.json"))
    assert code == 0 and doc["agree"]
    assert sorted(doc["oracle"]["ne_set"]) == [[0, 2], [1, 1], [2, 0]]
    assert main(["verify", "--instance", inst("fg1.json")]) == 4


def test_generate_then_report(capsys, tmp_path):
    gen = tmp_path / "gen"
    assert main(["gen", "--count", "3", "--nodes", "3", "--edges", "4", "--players", "1",
                 "--out", str(gen)]) == 0
    files = sorted(gen.glob("*.json"))
    assert [f.name for f in files] == ["flow-000.json", "flow-001.json", "flow-002.json"]
    res = tmp_path / "res"
    res.mkdir()
    for k, f in enumerate(files):
        main(["best-alpha", "--instance", str(f), "--variant", "multitree",
              "--out", str(res / f"r{k}.json")])
    capsys.readouterr()
    assert main(["report", "--results", str(res), "--measure", "nodes"]) == 0
    lines = (res / "ecdf_nodes.csv").read_text().splitlines()
    assert lines[0] == "nodes,multitree"
    assert (res / "alpha_histogram.csv").exists()


def test_report_missing_directory(tmp_path):
    assert main(["report", "--results", str(tmp_path / "none")]) == 3


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "nashbc", "solve", "--instance",
                           inst("t1.json"), "--no-timing"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["wall_time_s"] is None
