import json
import subprocess
import sys

import pytest

from onejump.cli import main

PARETO = '{"kind": "pareto", "alpha": 1.0, "scale": 1.0}'
BJL = '{"kind": "bigjumplight"}'
CLASSICAL = json.dumps(
    {"claim": {"kind": "exponential", "rate": 1.0}, "interarrival": {"kind": "exponential", "rate": 1.0}, "premium_rate": 2.0}
)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_cf(tmp_path, capsys):
    code, out, _ = run(["cf", "--dist", BJL, "--x-max", "60", "--out", str(tmp_path)], capsys)
    assert code == 0
    s = json.loads(out)
    assert s["c_F"] == pytest.approx(5.055, rel=0.05)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["exit_status"] == 0 and "numpy" in manifest["versions"]
    assert (tmp_path / "os_ratio.csv").exists()


def test_classify(tmp_path, capsys):
    code, out, _ = run(["classify", "--dist", PARETO, "--out", str(tmp_path)], capsys)
    assert code == 0
    assert json.loads(out)["J"] == "member-consistent"
    assert (tmp_path / "verdicts.json").exists()


def test_convolve_and_compound(tmp_path, capsys):
    code, out, _ = run(["convolve", "--dist", PARETO, "--n", "2", "--x-max", "100", "--out", str(tmp_path / "c")], capsys)
    assert code == 0
    # closed form 2/x + 2 log(x - 1)/x^2 at x = 10
    assert json.loads(out)["tail"]["10.0"] == pytest.approx(0.2 + 0.02 * 2.1972245773, rel=1e-4)
    counter = '{"kind": "geometric", "p": 0.5}'
    exp = '{"kind": "exponential", "rate": 1.0}'
    code, _, _ = run(["compound", "--dist", exp, "--counter", counter, "--x-max", "50", "--out", str(tmp_path / "g")], capsys)
    assert code == 0
    assert (tmp_path / "g" / "tail.csv").exists()


def test_compound_truncation_exit(tmp_path, capsys):
    counter = '{"kind": "geometric", "p": 0.99}'
    code, _, err = run(
        ["compound", "--dist", PARETO, "--counter", counter, "--x-max", "100", "--cap", "8", "--out", str(tmp_path)], capsys
    )
    assert code == 1
    assert json.loads(err)["error"] == "TruncationError"
    assert (tmp_path / "tail_partial.csv").exists()


def test_ruin(tmp_path, capsys):
    argv = ["ruin", "--model", CLASSICAL, "--u", "2", "--paths", "20000", "--seed", "4", "--out", str(tmp_path)]
    code, out, _ = run(argv, capsys)
    assert code == 0
    s = json.loads(out)
    assert abs(s["psi_direct"][0] - 0.18394) <= 4 * s["se_direct"][0]
    assert json.loads((tmp_path / "manifest.json").read_text())["master_seed"] == 4


def test_ruin_certain_exit(tmp_path, capsys):
    model = json.loads(CLASSICAL) | {"premium_rate": 0.5}
    code, _, err = run(["ruin", "--model", json.dumps(model), "--out", str(tmp_path)], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "RuinCertainError"


def test_levy(tmp_path, capsys):
    spec = '{"nu1": {"kind": "pareto", "alpha": 2.0, "scale": 2.0}, "lambda1": 1.0}'
    code, out, _ = run(["levy", "--spec", spec, "--x-max", "1000", "--out", str(tmp_path)], capsys)
    assert code in (0, 2)
    assert json.loads(out)["weak_equivalent"]


def test_missing_field_and_bad_descriptor(tmp_path, capsys):
    code, _, err = run(["classify", "--out", str(tmp_path)], capsys)
    assert code == 1 and "dist" in json.loads(err)["message"]
    code, _, err = run(["classify", "--dist", "no-such-file.json", "--out", str(tmp_path)], capsys)
    assert code == 1


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dist": json.loads(BJL), "x_max": 30.0}))
    code, _, _ = run(["cf", "--config", str(cfg), "--out", str(tmp_path / "a")], capsys)
    assert code == 0
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["config"]["x_max"] == 30.0
    code, _, _ = run(["cf", "--config", str(cfg), "--x-max", "60", "--out", str(tmp_path / "b")], capsys)
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["config"]["x_max"] == 60.0


def test_config_for_other_command(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "ruin", "dist": json.loads(BJL)}))
    code, _, err = run(["cf", "--config", str(cfg), "--out", str(tmp_path)], capsys)
    assert code == 1 and json.loads(err)["error"] == "ConfigError"


def test_output_env_variable(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ONEJUMP_OUT", str(tmp_path))
    code, _, _ = run(["cf", "--dist", BJL, "--x-max", "30"], capsys)
    assert code == 0
    assert (tmp_path / "cf" / "cf.json").exists()


def test_suite_subset(tmp_path, capsys):
    code, out, _ = run(["paper-suite", "--only", "1,7", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert (tmp_path / "summary.json").exists() and (tmp_path / "summary.csv").exists()
    # a rescaled grid is off protocol, so a pass is only reported as inconclusive
    code, _, _ = run(["paper-suite", "--only", "3", "--x-max-scale", "0.5", "--out", str(tmp_path / "q")], capsys)
    assert code == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "onejump.cli", "cf", "--dist", BJL, "--x-max", "30", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "c_F" in json.loads(proc.stdout)
