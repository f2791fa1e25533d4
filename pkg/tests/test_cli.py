import csv
import json
import math

import pytest

from reeblab.cli import PresetError, execute, main, preset_schedule, replay

PROG = '{"kind": "progression", "a": 0.25, "cutoff": 50}'

CASES = {
    "dioph": ["dioph", "--mode", "mu", "--x", "sqrt(2)", "--depth", "20"],
    "dioph_nu": ["dioph", "--mode", "nu", "--a", "1,(1+sqrt(5))/2", "--t-max", "200"],
    "recur": ["recur", "--flow", "lens-phi", "--T", "8,16", "--eps", "0.05", "--samples", "2000"],
    "entropy": ["entropy", "--flow", "cat", "--T", "1,2", "--eps", "0.1", "--M", "60",
                "--levels", "4"],
    "taub": ["taub", "--stream", PROG, "--T", "10", "--lam=-1,0,0.5,2"],
    "eta": ["eta", "--progression", "0.25", "--cutoff", "100", "--method", "split",
            "--small-t", "progression"],
    "geom": ["geom", "--flow", "lens-phi", "--samples", "5000", "--vol-X", "1.0"],
    "preset": ["preset", "--name", "cor14", "--nu", "2", "--h", "1e-2,1e-3,1e-4"],
}


@pytest.mark.parametrize("name", sorted(CASES))
def test_subcommand_runs_and_replays(name, tmp_path, capsys):
    argv = CASES[name]
    assert main(argv + ["--out", str(tmp_path), "--plot-data"]) == 0
    sub = argv[0]
    rec = json.loads((tmp_path / f"{sub}.json").read_text())
    for key in ("config", "seed", "config_hash", "payload", "payload_hash", "wall_time",
                "version", "backend"):
        assert key in rec
    with open(tmp_path / f"{sub}.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(r["config_hash"] == rec["config_hash"] for r in rows)
    assert main(["replay", str(tmp_path / f"{sub}.json")]) == 0
    assert "identical" in capsys.readouterr().out


def test_replay_detects_tamper(tmp_path):
    main(CASES["preset"] + ["--out", str(tmp_path)])
    p = tmp_path / "preset.json"
    rec = json.loads(p.read_text())
    rec["payload_hash"] = "0" * len(rec["payload_hash"])
    p.write_text(json.dumps(rec))
    assert main(["replay", str(p)]) == 2


def test_schema_error_lists_fields(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"T": [-1], "eps": "x", "samples": 5}))
    code = main(["recur", "--config", str(cfg), "--out", str(tmp_path)])
    err = capsys.readouterr().err
    assert code == 1
    assert "T" in err and "eps" in err and "samples" in err


def test_usage_error_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["recur", "--eps", "notanumber"])
    assert exc.value.code == 1


def test_failed_check_exit_2(tmp_path):
    stream = '{"kind": "uniform", "support": [0, 1], "N": 1000}'
    argv = ["taub", "--stream", stream, "--T", "10", "--lam", "0.5",
            "--weyl", '{"m": 1, "u0": 1e-6}', "--out", str(tmp_path)]
    assert main(argv) == 2


def test_config_file_overridden_by_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "thm11", "h": [0.1], "T": 3.0}))
    assert main(["preset", "--config", str(cfg), "--T", "7", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "preset.json").read_text())
    assert rec["payload"]["rows"][0]["T"] == 7.0


def test_record_replay_function():
    rec = execute("eta", {"stream": json.loads(PROG), "method": "erfc"}, seed=3)
    same, _ = replay(rec)
    assert same


def test_preset_cor14():
    rows = preset_schedule({"name": "cor14", "nu": 2, "h": [1e-4]})
    assert rows[0]["T"] == pytest.approx(10 ** (4 / 3), rel=1e-12)
    assert rows[0]["eps"] == pytest.approx(1e-4 ** 0.49)


def test_preset_cor13():
    h = 1e-3
    rows = preset_schedule({"name": "cor13", "n": 3, "c": 0.7, "htop": 1.0, "h": [h]})
    lam = 1.1 * (2 / 3)
    assert rows[0]["T"] == pytest.approx(0.7 * abs(math.log(h)) / lam)
    with pytest.raises(PresetError):
        preset_schedule({"name": "cor13", "n": 3, "c": 0.75, "htop": 1.0, "h": [h]})
    with pytest.raises(PresetError):
        preset_schedule({"name": "cor13", "n": 3, "c": 0.5, "htop": 1.0, "lam": 0.5, "h": [h]})


def test_preset_thm11_delta_zero():
    rows = preset_schedule({"name": "thm11", "delta": 0.0, "h": [0.1, 0.01, 0.001]})
    assert all(r["eps"] == 1.0 for r in rows)


def test_cor13_bad_c_exits_1(tmp_path):
    argv = ["preset", "--name", "cor13", "--c", "0.8", "--htop", "1", "--h", "0.01",
            "--out", str(tmp_path)]
    assert main(argv) == 1
