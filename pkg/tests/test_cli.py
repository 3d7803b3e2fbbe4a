import json

import numpy as np
import pytest

from mzrom.cli import main
from mzrom.exceptions import ConfigError
from mzrom.experiments import ExperimentConfig, run_convergence


def _tiny_config(tmp_path, **overrides):
    cfg = {
        "case": "rda:a",
        "N": 30,
        "T": 1.0,
        "nt_list": [16, 32],
        "N_s_train": 35,
        "N_s_test": 6,
        "seed_train": 11,
        "seed_test": 12,
        "scheme": "implicit_midpoint",
        "mode": "full",
    }
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_config_parsing_and_hash(tmp_path):
    path = _tiny_config(tmp_path)
    cfg = ExperimentConfig.from_file(path)
    assert cfg.nt_list == [16, 32]
    assert len(cfg.config_hash()) == 12
    assert cfg.projection().d == 5


def test_config_rejects_bad_ladder(tmp_path):
    path = _tiny_config(tmp_path, nt_list=[16, 24])
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(path)


def test_config_rejects_unknown_keys(tmp_path):
    path = _tiny_config(tmp_path, bogus=1)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(path)


def test_config_accepts_dt_list(tmp_path):
    path = _tiny_config(tmp_path)
    raw = json.loads(path.read_text())
    del raw["nt_list"]
    raw["dt_list"] = [0.0625, 0.03125]
    path.write_text(json.dumps(raw))
    cfg = ExperimentConfig.from_file(path)
    assert cfg.nt_list == [16, 32]


def test_cli_exit_code_on_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["convergence", "--config", str(bad)]) == 2
    missing_mode = _tiny_config(tmp_path, mode="nonsense")
    assert main(["convergence", "--config", str(missing_mode)]) == 2


def test_cli_convergence_and_determinism(tmp_path):
    path = _tiny_config(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["convergence", "--config", str(path), "--output", str(out1)]) == 0
    assert main(["convergence", "--config", str(path), "--output", str(out2)]) == 0
    a = (out1 / "rda_a_convergence.csv").read_bytes()
    b = (out2 / "rda_a_convergence.csv").read_bytes()
    assert a == b
    text = a.decode()
    assert "config_hash" in text and "implicit_midpoint" in text


def test_cli_generate_reconstruct_predict_pipeline(tmp_path):
    path = _tiny_config(tmp_path, nt_list=[16])
    out = tmp_path / "out"
    assert main(["generate", "--config", str(path), "--output", str(out)]) == 0
    assert (out / "data" / "rda_a_nt16" / "train" / "phi.csv").exists()
    assert main(["reconstruct", "--config", str(path), "--output", str(out)]) == 0
    op_dir = out / "operators" / "rda_a_nt16_full"
    assert (op_dir / "r.csv").exists() and (op_dir / "meta.txt").exists()
    assert main(["predict", "--config", str(path), "--output", str(out)]) == 0
    pred = out / "predictions" / "rda_a_nt16_full" / "phi_pred.csv"
    assert pred.exists()
    assert "source=prediction" in (pred.parent / "meta.txt").read_text()


def test_cli_finite_memory_rejects_forced_case(tmp_path):
    path = _tiny_config(tmp_path, case="rda:g", mode="finite_memory", nt_list=[16])
    assert main(["finite-memory", "--config", str(path)]) == 2


def test_cli_seed_override_changes_data(tmp_path):
    path = _tiny_config(tmp_path, nt_list=[16])
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    main(["generate", "--config", str(path), "--output", str(out1)])
    main(["generate", "--config", str(path), "--output", str(out2), "--seed", "99"])
    a = (out1 / "data" / "rda_a_nt16" / "train" / "phi.csv").read_text()
    b = (out2 / "data" / "rda_a_nt16" / "train" / "phi.csv").read_text()
    assert a != b


def test_run_convergence_self_convergence_reference(tmp_path):
    """Time-varying case: kernel reference is the finest reconstruction."""
    path = _tiny_config(tmp_path, case="rda:f", nt_list=[16, 32])
    cfg = ExperimentConfig.from_file(path)
    out = run_convergence(cfg, tmp_path / "sc")
    rows = (out / "rda_f_convergence.csv").read_text().splitlines()
    assert rows[-1].split(",")[3] == "0.00e+00"  # finest-level kernel error
