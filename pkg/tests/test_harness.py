import json

import numpy as np
import pytest
import yaml

from oe2d import cli
from oe2d.artifacts import LEDGER_HEADER, checkpoints, directory_digest, read_ledger_csv
from oe2d.config import ExperimentConfig
from oe2d.errors import ConfigurationError

SMALL = {"name": "small", "T": 300, "seeds": [0, 1, 2], "instance": {"n_functions": 6, "n_contexts": 2, "n_actions": 3}}


def write_cfg(tmp_path, raw, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(raw))
    return p


def test_roundtrip_and_hash(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    again = ExperimentConfig.from_dict(cfg.to_dict())
    assert again.to_dict() == cfg.to_dict()
    cfg.dump(tmp_path / "c.yaml")
    assert ExperimentConfig.load(tmp_path / "c.yaml").config_hash() == cfg.config_hash()


def test_hash_ignores_key_order_and_output_dir():
    a = ExperimentConfig.from_dict(SMALL)
    reordered = dict(reversed(list(SMALL.items())))
    reordered["output_dir"] = "elsewhere"
    b = ExperimentConfig.from_dict(reordered)
    assert a.config_hash() == b.config_hash()


def test_invalid_config_reports_every_problem():
    with pytest.raises(ConfigurationError) as e:
        ExperimentConfig.from_dict({"T": 10, "bogus": 1, "instance": {"nope": 2}})
    msg = str(e.value)
    assert "bogus" in msg and "nope" in msg


def test_invalid_config_exit_code(tmp_path, capsys):
    p = write_cfg(tmp_path, {"T": -5})
    assert cli.main(["run", str(p), "--out", str(tmp_path)]) == 2


def test_single_action_config_zero_regret(tmp_path):
    p = write_cfg(tmp_path, {"name": "one", "T": 64, "seeds": [0], "instance": {"kind": "single_action"}})
    assert cli.main(["run", str(p), "--out", str(tmp_path / "out")]) == 0
    (run,) = (tmp_path / "out").iterdir()
    cols = read_ledger_csv(run / "ledger_0.csv")
    assert np.all(cols["regret"] == 0) and cols["cum_regret"][-1] == 0


def test_ledger_schema(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    run = cli.execute_run(cfg, tmp_path)
    lines = (run / "ledger_1.csv").read_text().splitlines()
    assert lines[0] == LEDGER_HEADER
    assert len(lines) == cfg.T + 1
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["config_hash"] == cfg.config_hash()
    assert run.name.endswith(cfg.config_hash())
    assert set(manifest["files"]) == {"ledger_0.csv", "ledger_1.csv", "ledger_2.csv", "summary.csv"}
    assert directory_digest(run, manifest["files"]) == manifest["files"]


def test_twice_identical_bytes(tmp_path):
    cfg = ExperimentConfig.from_dict(SMALL)
    a = cli.execute_run(cfg, tmp_path / "a")
    b = cli.execute_run(cfg, tmp_path / "b", workers=2)
    assert directory_digest(a) == directory_digest(b)


def test_summary_matches_ledgers(tmp_path):
    raw = dict(SMALL, seeds=list(range(20)), T=256, instance={"kind": "discrete", "class_seed": None})
    cfg = ExperimentConfig.from_dict(raw)
    run = cli.execute_run(cfg, tmp_path)
    led = [read_ledger_csv(run / f"ledger_{s}.csv") for s in range(20)]
    summ = np.genfromtxt(run / "summary.csv", delimiter=",", names=True)
    assert summ["t"].tolist() == checkpoints(256)
    for row in summ:
        t = int(row["t"])
        vals = np.array([L["cum_regret"][t - 1] for L in led])
        regs = np.array([L["regret"][: t].sum() for L in led])
        assert row["mean_cum_regret"] == pytest.approx(vals.mean(), rel=1e-10)
        assert row["mean_cum_regret"] == pytest.approx(regs.mean(), rel=1e-9)
        assert row["std_cum_regret"] == pytest.approx(vals.std(), rel=1e-8, abs=1e-12)
        epochs = np.array([L["epoch"][t - 1] for L in led])
        assert row["mean_oracle_calls"] == pytest.approx((epochs - 1).mean())


def test_checkpoints():
    assert checkpoints(8) == [1, 2, 4, 8]
    assert checkpoints(10) == [1, 2, 4, 8, 10]
    assert checkpoints(1) == [1]


def test_seed_override_and_env_root(tmp_path, monkeypatch):
    p = write_cfg(tmp_path, SMALL)
    monkeypatch.setenv("OE2D_OUT", str(tmp_path / "envroot"))
    assert cli.main(["run", str(p), "--seeds", "4-5", "--emit-plot-script"]) == 0
    (run,) = (tmp_path / "envroot").iterdir()
    names = {f.name for f in run.iterdir()}
    assert {"ledger_4.csv", "ledger_5.csv", "plot_regret.py", "summary.csv", "manifest.json"} <= names


def test_parse_seeds():
    assert cli.parse_seeds("0-2,7") == [0, 1, 2, 7]
    with pytest.raises(ConfigurationError):
        cli.parse_seeds("a")


def test_certification_failure_dump(tmp_path):
    raw = dict(SMALL, algorithm={"name": "oe2d", "solver": {"sec_bound": 0.0, "escalate": False}})
    p = write_cfg(tmp_path, raw)
    assert cli.main(["run", str(p), "--out", str(tmp_path / "o")]) == 3
    (dump,) = (tmp_path / "o").glob("*-failure.json")
    info = json.loads(dump.read_text())
    assert info["sec_bound"] == 0.0 and info["last_iterate"] is not None


def test_verify_usage_error(capsys):
    assert cli.main(["verify", ""]) == 2
    assert cli.main(["verify"]) == 2


def test_complexity_single_function_row(capsys):
    assert cli.main(["complexity", "single"]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    for k in ("sec_lower", "sec_upper", "edim", "doec_grid", "certificate", "dec_grid"):
        assert float(rec[k]) == 0.0


def test_complexity_cheating_row(capsys):
    assert cli.main(["complexity", "cheating:3"]) == 0
    header, row = capsys.readouterr().out.strip().splitlines()
    rec = dict(zip(header.split(","), row.split(",")))
    assert float(rec["sec_lower"]) >= 2
    assert float(rec["p_beta"]) <= 0.81
    assert float(rec["doec_grid"]) <= 0.81


def test_complexity_budget_names_limit(capsys):
    assert cli.main(["complexity", "random:1:4:3", "--resolution", "200", "--budget", "500"]) == 4
    assert "lattice" in capsys.readouterr().err


def test_complexity_instance_file(tmp_path, capsys):
    p = tmp_path / "inst.yaml"
    p.write_text(yaml.safe_dump({"values": [[0.0, 0.0], [1.0, 0.0]]}))
    assert cli.main(["complexity", str(p)]) == 0


def test_bad_instance_spec():
    assert cli.main(["complexity", "cheating:x"]) == 2
    assert cli.main(["complexity", "nothing-here"]) == 2
