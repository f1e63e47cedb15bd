import json

import numpy as np
import pytest

from excichain.cli import main
from excichain.experiments import ExperimentConfig, Phase
from excichain.model import ModelParams


def write_config(path, cfg):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh)


@pytest.fixture
def spread_config(tmp_path):
    cfg = ExperimentConfig(
        kind="spreading",
        params=ModelParams(L=16, beta=1.0, chi_E=1.0, chi_J=1.0, T=0.5),
        ensemble_size=2, seed=1,
        protocol=[Phase("thermalize", 5.0), Phase("evolve", 2.0)])
    path = tmp_path / "spread.json"
    write_config(path, cfg)
    return path


def test_spread_subcommand(tmp_path, spread_config, capsys):
    out = tmp_path / "out"
    rc = main(["spread", "--config", str(spread_config), "--out", str(out)])
    assert rc == 0
    assert (out / "manifest.json").exists()
    assert (out / "spreading_pi.dat").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["kind"] == "spreading"
    assert manifest["seed"] == 1


def test_seed_override(tmp_path, spread_config):
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    main(["spread", "--config", str(spread_config), "--out", str(out1),
          "--seed", "7"])
    main(["spread", "--config", str(spread_config), "--out", str(out2),
          "--seed", "7"])
    assert (out1 / "spreading_pi.dat").read_bytes() == \
        (out2 / "spreading_pi.dat").read_bytes()
    m = json.loads((out1 / "manifest.json").read_text())
    assert m["seed"] == 7


def test_kind_mismatch_rejected(tmp_path, spread_config):
    with pytest.raises(SystemExit):
        main(["efficiency", "--config", str(spread_config),
              "--out", str(tmp_path / "o")])


def test_validate_subcommand(capsys):
    rc = main(["validate"])
    captured = capsys.readouterr()
    assert rc == 0
    assert "validation: PASSED" in captured.out
    assert "gradient_consistency" in captured.out


def test_efficiency_subcommand(tmp_path):
    cfg = ExperimentConfig(
        kind="efficiency",
        params=ModelParams(L=12, beta=1.0, chi_E=1.0, chi_J=1.0, T=1.0,
                           gamma_r=1e-3, Gamma=0.2, sink_index=6),
        ensemble_size=2, seed=2, T_grid=(1.0,),
        protocol=[Phase("thermalize", 5.0)], t_max=3e3)
    path = tmp_path / "eff.json"
    write_config(path, cfg)
    out = tmp_path / "out"
    rc = main(["efficiency", "--config", str(path), "--out", str(out)])
    assert rc == 0
    table = np.loadtxt(out / "efficiency.dat")
    assert 0.0 < table[1] <= 1.0
