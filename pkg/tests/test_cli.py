import json
from pathlib import Path

import pytest
import yaml

from degsemi.cli import list_experiments, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, cfg, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(cfg))
    return p


def counterexample_cfg(**extra):
    params = {"n_list": [8, 16, 32], "lambda": {"re": 1.0, "im": 0.0}}
    params.update(extra)
    return {"experiment": "counterexample", "parameters": params}


def test_counterexample_run(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(write(tmp_path, counterexample_cfg())), "--out", str(out)]) == 0
    lines = (out / "counterexample.csv").read_text().splitlines()
    assert len(lines) == 4
    man = json.loads((out / "manifest.json").read_text())
    assert man["passed"] and man["first_failure"] is None and len(man["config_hash"]) == 64


def test_missing_lambda_exit_2(tmp_path, capsys):
    cfg = counterexample_cfg()
    del cfg["parameters"]["lambda"]
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path)]) == 2
    assert "lambda" in capsys.readouterr().err


@pytest.mark.parametrize("bad", [
    "experiment: [unclosed\n",
    "experiment: nope\nparameters: {}\n",
    "experiment: counterexample\nparameters: {n_list: [8], lambda: 1.0}\n",
    "experiment: counterexample\nparameters: {n_list: [], lambda: {re: 1, im: 0}}\n",
    "experiment: counterexample\nparameters: {n_list: [8], lambda: {re: 1, im: 0}, bogus: 1}\n",
])
def test_invalid_configs_exit_2(tmp_path, bad):
    p = tmp_path / "bad.yaml"
    p.write_text(bad)
    assert main(["run", str(p), "--out", str(tmp_path)]) == 2


def test_missing_file_exit_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)]) == 2


def test_failing_assertion_exit_1(tmp_path, capsys):
    cfg = {"experiment": "homogenize", "parameters": {
        "epsilons": [0.25, 0.125], "lambda": {"re": 1, "im": 0}, "cell_m": 256, "h": 1 / 256,
        "c_hat_expected": [[2.5]]}}
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    failed = [c["name"] for c in man["checks"] if not c["passed"]]
    assert f"first failing assertion: {failed[0]}" in err
    assert any("c_hat" in name for name in failed)


def test_constant_equivalence_all_zero(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(CONFIGS / "equivalence_constant.yaml"), "--out", str(out)]) == 0
    rows = (out / "equivalence.csv").read_text().splitlines()[1:]
    assert rows and all(r.split(",")[2] == "0" for r in rows)


def test_output_precedence_and_plot(tmp_path, monkeypatch):
    cfg = counterexample_cfg()
    cfg["output"] = str(tmp_path / "from_config")
    p = write(tmp_path, cfg)
    monkeypatch.setenv("DEGSEMI_OUT", str(tmp_path / "from_env"))
    assert main(["run", str(p), "--plot"]) == 0
    assert (tmp_path / "from_env" / "counterexample_trace.svg").exists()
    assert main(["run", str(p), "--out", str(tmp_path / "from_flag")]) == 0
    assert (tmp_path / "from_flag" / "manifest.json").exists()
    monkeypatch.delenv("DEGSEMI_OUT")
    assert main(["run", str(p)]) == 0
    assert (tmp_path / "from_config" / "counterexample.csv").exists()


def test_seed_and_threads_do_not_change_bytes(tmp_path):
    p = write(tmp_path, {"experiment": "equivalence", "parameters": {
        "n_list": [1, 100, 10000], "lambda": {"re": 1, "im": 0}, "dim": 6}})
    assert main(["run", str(p), "--out", str(tmp_path / "a"), "--threads", "1"]) == 0
    assert main(["run", str(p), "--out", str(tmp_path / "b"), "--threads", "3"]) == 0
    assert (tmp_path / "a/equivalence.csv").read_bytes() == (tmp_path / "b/equivalence.csv").read_bytes()
    assert main(["run", str(p), "--out", str(tmp_path / "c"), "--seed", "5"]) == 0
    assert (tmp_path / "a/equivalence.csv").read_bytes() != (tmp_path / "c/equivalence.csv").read_bytes()


def test_list(capsys):
    assert main(["list"]) == 0
    text = capsys.readouterr().out
    kinds = [line for line in text.splitlines() if line and not line.startswith(" ")]
    assert kinds == sorted(["counterexample", "domains", "equivalence", "galerkin", "homogenize"])
    assert "length units" in text and "time units" in text
    assert list_experiments() == list_experiments()


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.stem)
def test_shipped_configs(tmp_path, path):
    expected = 2 if path.stem.startswith("broken") else 0
    assert main(["run", str(path), "--out", str(tmp_path)]) == expected
