import json
import subprocess
import sys

from hacss.cli import main
from hacss.scenario import bundled

DEMO = str(bundled("flood-demo"))


def test_run_bundled(tmp_path, capsys):
    assert main(["run", DEMO, "--out", str(tmp_path)]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["comparison.csv", "report.csv", "report.json"]
    rows = (tmp_path / "comparison.csv").read_text().splitlines()
    metrics = {line.split(",")[0] for line in rows[1:]}
    assert {"capacity_n", "block_duration_sum", "attacker_expected_units", "stamp_savings"} <= metrics


def test_seed_override_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", DEMO, "--out", str(a), "--seed", "7"]) == 0
    assert main(["run", DEMO, "--out", str(b), "--seed", "7"]) == 0
    for name in ("report.json", "report.csv", "comparison.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_malformed_json_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert not (tmp_path / "report.json").exists()


def test_validate(tmp_path, capsys):
    assert main(["validate", DEMO]) == 0
    f = tmp_path / "s.json"
    f.write_text(json.dumps({"I": 0, "s": 10, "duration": 5}))
    assert main(["validate", str(f)]) == 2
    assert ": I:" in capsys.readouterr().err
    f.write_text(json.dumps({"I": 1, "s": 10, "duration": 5, "engine": {"p": 1},
                             "attackers": [{"model": "REPLAYER", "rate": -2}]}))
    assert main(["validate", str(f)]) == 2
    assert "attackers[0].rate" in capsys.readouterr().err


def test_missing_file_and_bad_args(tmp_path):
    assert main(["validate", str(tmp_path / "nope.json")]) == 2
    assert main(["frobnicate"]) == 2


def test_invariant_violation_exit_3(tmp_path, monkeypatch):
    from hacss import sim

    monkeypatch.setattr(sim.Simulation, "_invariants", lambda self: {"budget_per_tick": False})
    assert main(["run", DEMO, "--out", str(tmp_path)]) == 3
    assert not (tmp_path / "report.json").exists()


def test_input_untouched(tmp_path):
    before = open(DEMO, "rb").read()
    main(["run", DEMO, "--out", str(tmp_path)])
    assert open(DEMO, "rb").read() == before


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "hacss", "validate", DEMO], capture_output=True, text=True)
    assert out.returncode == 0 and "ok" in out.stdout
