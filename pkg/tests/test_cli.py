import csv
import json
from pathlib import Path

import pytest

from psvf.cli import run
from psvf.portrait import family_portrait

DATA = Path(__file__).parent / "data"


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_describe_k3(capsys):
    code, out, _ = call(capsys, "fields", "describe", "--kind", "k3")
    doc = json.loads(out)
    assert code == 0
    assert [f["x"] for f in doc["folds"]] == [-0.5, 0.5]
    assert all(f["class"]["two_fold"] == "visible-visible" for f in doc["folds"])
    assert [c["index"] for c in doc["compartments"]] == [0, 1, 2, 3]


def test_describe_bean_and_user_field(capsys):
    doc = json.loads(call(capsys, "fields", "describe", "--kind", "bean")[1])
    assert {r["region"] for r in doc["regions"]} >= {"Sliding", "Escaping"}
    doc = json.loads(call(capsys, "fields", "describe", "--field", str(DATA / "z2_scaled.json"))[1])
    assert any(abs(t["x"]) < 1e-9 for t in doc["tangencies"])


def test_export_round_trips_through_describe(tmp_path, capsys):
    out = tmp_path / "k2.json"
    assert call(capsys, "fields", "export", "--kind", "k2", "--out", str(out))[0] == 0
    doc = json.loads(call(capsys, "fields", "describe", "--field", str(out))[1])
    assert any(abs(t["x"]) < 1e-9 and t["class"]["two_fold"] == "visible-visible" for t in doc["tangencies"])


def test_portrait_is_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    call(capsys, "portrait", "--kind", "k3", "--out", str(a))
    call(capsys, "fields", "portrait", "--kind", "k3", "--out", str(b))
    text = a.read_text()
    assert text == b.read_text() == family_portrait("k3")
    assert text.startswith("<?xml") and "<!-- generator: psvf" in text and text.count("<path") == 4


def test_synth_then_itinerary(tmp_path, capsys):
    path = tmp_path / "t.csv"
    code, _, _ = call(capsys, "traj", "synth", "--kind", "k3", "--word", "0132", "--offset", "-1",
                      "--per-arc", "16", "--out", str(path))
    assert code == 0
    rows = list(csv.DictReader(path.open()))
    assert rows[0].keys() == {"t", "x", "y", "governing"}
    times = {float(r["t"]) for r in rows}
    assert {-1.0, -0.5, 0.0, 0.5, 1.0, 2.5, 3.0} <= times
    code, out, _ = call(capsys, "traj", "itinerary", "--in", str(path))
    doc = json.loads(out)
    assert code == 0 and doc["kind"] == "k3"
    assert doc["offset"] == -1 and doc["symbols"] == [0, 1, 3, 2]


def test_synth_inadmissible_word(capsys):
    code, _, err = call(capsys, "traj", "synth", "--kind", "k3", "--word", "10")
    assert code == 1 and "InadmissibleWord" in err and "index 0" in err


def test_bean_synth(tmp_path, capsys):
    path = tmp_path / "bean.csv"
    assert call(capsys, "traj", "synth", "--kind", "bean", "--beats", "0.9,0.3,0.6", "--out", str(path))[0] == 0
    rows = list(csv.DictReader(path.open()))
    assert {r["governing"] for r in rows} >= {"upper", "lower", "sliding"}


def test_simulate_tree_and_budget(capsys):
    code, out, _ = call(capsys, "traj", "simulate", "--kind", "k2", "--from", "p1", "--horizon", "3")
    doc = json.loads(out)
    assert code == 0 and len(doc["leaves"]) == 8 and not doc["truncated"]
    code, out, err = call(capsys, "traj", "simulate", "--kind", "k2", "--horizon", "6", "--max-branches", "4")
    assert json.loads(out)["truncated"] and "BranchBudgetExceeded" in err
    code, out, _ = call(capsys, "--seed", "4", "traj", "simulate", "--kind", "bean", "--from", "0,0.5",
                        "--horizon", "5", "--branches", "random", "--exits=-0.5,-0.3")
    assert code == 0 and json.loads(out)["arcs"]


def test_shift_commands(capsys):
    assert json.loads(call(capsys, "shift", "mixing", "--k", "3")[1]) == {"mixing": True, "n0": 2}
    assert json.loads(call(capsys, "shift", "matrix", "--k", "2")[1]) == [[1, 1], [1, 1]]
    doc = json.loads(call(capsys, "shift", "periodic", "--k", "2", "--n", "5")[1])
    assert doc["counts"] == {str(n): 2**n for n in range(1, 6)}
    doc = json.loads(call(capsys, "shift", "metric", "--alphabet", "2", "--w1", "000", "--w2", "111",
                          "--offset", "-1")[1])
    assert doc["value"] == 2.0 and doc["tail"] == 1.0
    doc = json.loads(call(capsys, "shift", "metric", "--alphabet", "inf", "--w1", "0,2,4", "--w2", "1,-1,-2")[1])
    assert doc["value"] == 1 + 3 / 2 + 6 / 4


def test_verify_commands(tmp_path, capsys):
    report = tmp_path / "r.json"
    code, _, _ = call(capsys, "verify", "conjugacy", "--kind", "k2", "--samples", "10", "--depth", "6",
                      "--report", str(report))
    assert code == 0 and json.loads(report.read_text())["passed"]
    code, out, _ = call(capsys, "verify", "equivalence", "--a", "k2", "--b", str(DATA / "z2_scaled.json"))
    assert code == 0 and json.loads(out)["passed"]
    code, out, err = call(capsys, "verify", "equivalence", "--a", "k2", "--b", "k3")
    assert code == 1 and "SkeletonMismatch" in err


def test_usage_errors(capsys, tmp_path):
    assert call(capsys, "shift", "mixing", "--k", "1")[0] == 2
    assert call(capsys, "fields", "describe")[0] == 2
    assert call(capsys, "fields", "describe", "--kind", "k0")[0] == 2
    assert call(capsys, "traj", "synth", "--kind", "k2", "--word", "0x")[0] == 2
    with pytest.raises(SystemExit) as exc:
        run(["shift", "mixing"])
    assert exc.value.code == 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("horizon = 2\n")
    doc = json.loads(call(capsys, "traj", "simulate", "--kind", "k2", "--config", str(cfg))[1])
    assert doc["horizon"] == 2.0 and len(doc["leaves"]) == 4
    doc = json.loads(call(capsys, "traj", "simulate", "--kind", "k2", "--config", str(cfg), "--horizon", "1")[1])
    assert len(doc["leaves"]) == 2
