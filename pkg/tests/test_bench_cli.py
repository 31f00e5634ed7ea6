import json
from dataclasses import fields

import pytest

from mulsedge import bench
from mulsedge.cli import main

TINY = {
    "name": "tiny",
    "task": {"n_classes": 2,
             "modalities": [{"rows": 3, "cols": 2, "informativeness": 0.8, "noise_sigma": 0.5},
                            {"rows": 4, "cols": 3, "informativeness": 1.0, "noise_sigma": 0.5}],
             "n_train": 40, "n_cal": 40, "n_test": 20, "seed": 1},
    "epochs": 3,
    "rates": [1e5, 1e6],
    "snr": {"0": 10.0},
    "reliable_control": False,
    "seeds": [0, 1],
}


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "tiny.json"
    p.write_text(json.dumps(TINY))
    return p


def test_scenario_parsing():
    sc = bench.Scenario.from_dict(TINY)
    assert sc.snr == {0: 10.0} and sc.seeds == (0, 1) and sc.rates == (1e5, 1e6)
    assert sc.task.modalities[1].cols == 3
    assert sc.sim_config(1e6, 3).seed == 3


@pytest.mark.parametrize("bad", [
    {},
    {"task": {"n_classes": 2}},
    dict(TINY, combiner="median"),
    dict(TINY, alpha=1.5),
    dict(TINY, approaches=["A9"]),
    dict(TINY, bogus=1),
])
def test_scenario_rejects_malformed(bad):
    with pytest.raises(bench.ConfigError):
        bench.Scenario.from_dict(bad)


def test_derive_seeds():
    a = bench.derive_seeds(0, 4)
    assert a == bench.derive_seeds(0, 4) and len(set(a)) == 4
    assert a != bench.derive_seeds(1, 4)


def test_sweep_is_byte_identical_and_parallel_safe(cfg_path, tmp_path, capsys):
    out1, out2, out3 = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out1)]) == 0
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out2)]) == 0
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out3), "--jobs", "2"]) == 0
    assert out1.read_bytes() == out2.read_bytes() == out3.read_bytes()
    lines = out1.read_text().splitlines()
    assert lines[0].split(",") == [f.name for f in fields(bench.ReportRow)]
    assert len(lines) == 1 + 5 * 2 * 2      # approaches x rates x seeds
    rows = bench.read_csv(out1)
    assert bench.write_csv(rows) == out1.read_text()


def test_train_calibrate_simulate_report(cfg_path, tmp_path):
    ck, cal, sim = tmp_path / "m.ckpt", tmp_path / "cal.json", tmp_path / "sim.csv"
    assert main(["train", "--config", str(cfg_path), "--seed", "3", "--out", str(ck)]) == 0
    assert main(["calibrate", "--config", str(cfg_path), "--checkpoint", str(ck), "--out", str(cal)]) == 0
    doc = json.loads(cal.read_text())
    assert doc
    assert main(["simulate", "--config", str(cfg_path), "--checkpoint", str(ck), "--calibration", str(cal),
                 "--approach", "a4", "A5", "--rate", "2e5", "--snr", "0:20", "--out", str(sim)]) == 0
    rows = bench.read_csv(sim)
    assert [r.approach for r in rows] == ["A4", "A5"]
    assert all(r.rate_bps == 2e5 and r.snr_map == "0:20" and r.seed == 3 for r in rows)
    rep = tmp_path / "rep.csv"
    assert main(["report", str(sim), "--out", str(rep)]) == 0
    assert rep.read_text().splitlines()[0].startswith("task,approach,combiner")


def test_summarize_mean_and_spread():
    base = dict(task="t", approach="A4", combiner="sssc", beta=1.0, alpha=0.1, alpha2=0.3,
                rate_bps=1e6, snr_map="clean", latency_s=1.0, energy_j=2.0, p_h=float("nan"))
    rows = [bench.ReportRow(accuracy=a, seed=s, **base) for s, a in enumerate((0.5, 0.7, 0.9))]
    (rec,) = bench.summarize(rows)
    assert rec["n_seeds"] == 3
    assert rec["accuracy_mean"] == pytest.approx(0.7)
    assert rec["accuracy_std"] == pytest.approx(0.2)


@pytest.mark.parametrize("argv", [
    ["sweep"],
    ["sweep", "--config", "/nonexistent.json"],
    ["simulate", "--config", "CFG", "--checkpoint", "/nonexistent.ckpt"],
    ["sweep", "--config", "CFG", "--snr", "zero"],
    ["sweep", "--config", "BAD"],
])
def test_cli_errors_exit_nonzero(argv, cfg_path, tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    argv = [str(cfg_path) if a == "CFG" else str(bad) if a == "BAD" else a for a in argv]
    assert main(argv) != 0
    assert "error" in capsys.readouterr().err
