import json

import pytest

from weakasym.cli import main


def test_partitions_n4_chains(tmp_path, capsys):
    assert main(["partitions", "--n", "4", "--chains", "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["chain_count"] == 18 and out["formula"] == 18 and out["formula_check"]
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["inputs"] == {"n": 4, "chains": True}
    assert set(man["artifacts"]) == {"partitions.json"}
    assert len(man["inputs_sha256"]) == 64


def test_lemma2_const_d3_machine_precision(tmp_path, capsys):
    assert main(["lemma2", "--d", "3", "--g", "const", "--out", str(tmp_path)]) == 0
    lines = [ln for ln in capsys.readouterr().out.splitlines() if not ln.startswith("#")]
    assert lines[0].split(",")[-1] == "rel_err"
    rel = [float(ln.split(",")[-1]) for ln in lines[1:]]
    assert len(rel) == 9 and max(rel) < 1e-12
    assert "# d: 3\n" in (tmp_path / "lemma2.csv").read_text()


def test_artifacts_are_reproducible(tmp_path, capsys):
    args = ["twobody", "--model", "gaussian:v0=-1,b=1", "--energy", "0.5"]
    for sub in ("a", "b"):
        assert main(args + ["--out", str(tmp_path / sub)]) == 0
    for name in ("twobody.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_jacobi_and_harmonics_diagnostics(capsys):
    assert main(["jacobi", "--masses", "1,2,3", "--chain", "(12)(3)"]) == 0
    assert json.loads(capsys.readouterr().out)["diagnostics"]["kinetic_invariance"] < 1e-10
    assert main(["harmonics", "--d", "6", "--kmax", "3", "--check"]) == 0


def test_accept_combinatorics(capsys):
    assert main(["accept", "combinatorics"]) == 0
    assert "[PASS] criterion 1" in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["accept", "nope"],
        ["partitions"],
        ["partitions", "--n", "1"],
        ["lemma2", "--d", "3", "--xgrid", "5:1"],
        ["twobody", "--model", "square", "--energy", "1"],
        ["twobody", "--model", "gaussian", "--energy", "-1"],
        ["jacobi", "--masses", "1,-1,2"],
        ["solve", "--potential", "{\"kind\": \"cubic\"}", "--energy", "1"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2
