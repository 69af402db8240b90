import json
import subprocess
import sys

import pytest

from testwise_fci import cli
from testwise_fci.bench import SoundnessReport, read_rows
from testwise_fci.graph import from_text
from testwise_fci.synth import read_csv
from testwise_fci.system import system_from_text


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "d.csv"
    assert cli.main(["generate", "--p", "8", "--n", "300", "--seed", "3", "--out", str(out), "--emit-truth"]) == 0
    return out


def test_generate(dataset):
    data = read_csv(dataset)
    assert data.n == 300 and not data.mask.all()
    manifest = json.loads(dataset.with_suffix(".json").read_text())
    system = system_from_text(manifest["system"])
    assert len(system.observed) == data.p


def test_discover_and_score(dataset, tmp_path, capsys):
    outs = {}
    for strat in ("Wrapper", "ListWise"):
        g, log = tmp_path / f"{strat}.txt", tmp_path / f"{strat}.log.csv"
        assert cli.main(["discover", str(dataset), "--strategy", strat, "--out", str(g),
                         "--log", str(log), "--summary", str(tmp_path / f"{strat}.json")]) == 0
        outs[strat] = (g, log)
        assert from_text(g.read_text()).n == read_csv(dataset).p
    summary = json.loads((tmp_path / "Wrapper.json").read_text())
    assert summary["mode"] == "FCI"
    capsys.readouterr()
    assert cli.main(["score", str(outs["Wrapper"][0]), str(outs["ListWise"][0]),
                     "--log", str(outs["Wrapper"][1]), "--reference-log", str(outs["ListWise"][1])]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header == "shd,skeleton_shd,pct_sample_gain"
    assert float(row.split(",")[2]) >= 0.0


def test_discover_to_stdout(dataset, capsys):
    assert cli.main(["discover", str(dataset), "--algorithm", "RFCI", "--max-cond-size", "1"]) == 0
    assert capsys.readouterr().out.startswith("p ")


def test_run_with_config_and_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 7, "n_latent_confounders": [0, 1], "sample_sizes": [60],
                               "n_replicates": 1, "alpha": 0.05}))
    out = tmp_path / "res"
    assert cli.main(["run", "--config", str(cfg), "--strategies", "Wrapper", "ListWise",
                     "--algorithms", "RFCI", "--output-dir", str(out), "--no-manifests"]) == 0
    written = json.loads((out / "config.json").read_text())
    assert written["alpha"] == 0.05 and written["strategies"] == ["Wrapper", "ListWise"]
    rows = read_rows(out / "results.csv")
    assert {r["strategy"] for r in rows} == {"Wrapper", "ListWise"}
    assert not (out / "manifests").exists()


def test_verify_exit_codes(tmp_path, monkeypatch):
    report = tmp_path / "v.json"
    assert cli.main(["verify", "--n-replicates", "3", "--report", str(report)]) == 0
    assert json.loads(report.read_text())["checks"] == 12
    bad = SoundnessReport(1, [{"missingness": "MNAR", "algorithm": "FCI", "seed": 0, "replicate": 0}])
    monkeypatch.setattr(cli, "verify_soundness", lambda cfg: bad)
    assert cli.main(["verify", "--n-replicates", "1"]) == 2


def test_errors_exit_one(tmp_path, capsys):
    assert cli.main(["discover", str(tmp_path / "missing.csv")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["run", "--config", str(bad)]) == 1
    assert "error" in capsys.readouterr().err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "testwise_fci", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "verify" in res.stdout
