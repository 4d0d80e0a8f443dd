import json
import math
import subprocess
import sys

import numpy as np
import pytest

from nlwave import Grid2D, ScalarField2D, gaussian_field
from nlwave import serial, xray
from nlwave.cli import main
from nlwave.presets import PRESET_NAMES, preset


def test_field_roundtrip_real(tmp_path):
    grid = Grid2D(33, 17, -1, 1, -0.5, 0.5)
    rng = np.random.default_rng(7)
    f = ScalarField2D(grid, rng.normal(size=grid.shape()), "real")
    serial.save_field(f, tmp_path / "f")
    g = serial.load_field(tmp_path / "f")
    assert g.kind == "real"
    assert g.grid == grid
    assert np.array_equal(g.values, f.values)


def test_field_roundtrip_complex(tmp_path):
    grid = Grid2D(21, 21, -1, 1, -1, 1)
    rng = np.random.default_rng(8)
    vals = rng.normal(size=grid.shape()) + 1j * rng.normal(size=grid.shape())
    f = ScalarField2D(grid, vals, "complex")
    serial.save_field(f, tmp_path / "c")
    g = serial.load_field(tmp_path / "c")
    assert np.array_equal(g.values, f.values)


def test_sinogram_roundtrip(tmp_path):
    grid = Grid2D(128, 128, -1, 1, -1, 1)
    f = gaussian_field(grid, 1.0, 0.02)
    sino = xray.radon_forward(f, 12, 33, 1.0)
    serial.save_sinogram(sino, tmp_path / "s")
    s2 = serial.load_sinogram(tmp_path / "s")
    assert np.array_equal(s2.values, sino.values)
    assert np.allclose(s2.offsets, sino.offsets)


def test_config_roundtrip(tmp_path):
    cfg = preset("cubic_real", "desk")
    serial.save_config(cfg, tmp_path / "c.json")
    cfg2 = serial.load_config(tmp_path / "c.json")
    assert serial.config_to_dict(cfg) == serial.config_to_dict(cfg2)
    assert serial.config_hash(cfg) == serial.config_hash(cfg2)


@pytest.mark.parametrize("name", PRESET_NAMES)
def test_presets_validate(name):
    desk = preset(name, "desk")
    assert desk.grid.nx == 1024
    assert desk.probe.h == 0.01
    assert desk.probe.T == 1.4


def test_paper_scale_parameters():
    paper = preset("cubic_real", "paper")
    assert paper.probe.h == 0.005
    assert paper.grid.nx == 2000
    assert paper.probe.T == 1.4
    assert preset("poly5_real", "paper").grid.nx == 4000


def _tiny_config(tmp_path):
    doc = {
        "grid": {"nx": 256, "ny": 256, "xmin": -1.7, "xmax": 1.7,
                 "ymin": -1.7, "ymax": 1.7},
        "probe": {"h": 0.035, "omega": [0.0, 1.0],
                  "chi": {"kind": "gaussian", "amplitude": 1.0,
                          "width2": 0.02},
                  "T": 1.3, "field_kind": "real_wave"},
        "nonlinearity": {"variant": "odd_separated",
                         "alpha": {"kind": "gaussian", "amplitude": 1.0,
                                   "width2": 0.02, "center": [0.0, 0.0]},
                         "f0_poly": [0.0, 1.0],
                         "support_radius": 0.40},
        "cfl": 0.5,
        "outputs": {"dir": str(tmp_path)},
    }
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(doc))
    return path


def test_cli_simulate_and_crosscut(tmp_path):
    cfgp = _tiny_config(tmp_path)
    rc = main(["simulate", "--config", str(cfgp),
               "--out-dir", str(tmp_path)])
    assert rc == 0
    field = serial.load_field(tmp_path / "u_T")
    assert field.grid.nx == 256
    manifest = json.loads((tmp_path / "u_manifest.json").read_text())
    assert manifest["n_steps"] > 0
    # wall-contact reflections can superpose up to ~2x outside the clean cone
    assert max(manifest["max_abs_u"]) < 2.0
    rc = main(["crosscut", "--field", str(tmp_path / "u_T"), "--axis", "y",
               "--at", "0.0", "--out", str(tmp_path / "cut.csv")])
    assert rc == 0
    data = np.genfromtxt(tmp_path / "cut.csv", delimiter=",", names=True)
    assert len(data) == 256


def test_cli_simulate_linear_flag(tmp_path):
    cfgp = _tiny_config(tmp_path)
    rc = main(["simulate", "--config", str(cfgp), "--linear",
               "--out-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "u_linear_T.f64").exists()


def test_cli_preset_materializes(tmp_path):
    out = tmp_path / "p.json"
    rc = main(["preset", "--name", "cubic_real", "--scale", "paper",
               "--out", str(out)])
    assert rc == 0
    cfg = serial.load_config(out)
    assert cfg.probe.h == 0.005
    assert cfg.grid.nx == 2000


def test_cli_radon_roundtrip(tmp_path):
    grid = Grid2D(256, 256, -1, 1, -1, 1)
    f = gaussian_field(grid, 1.0, 0.02)
    serial.save_field(f, tmp_path / "g")
    rc = main(["radon", "forward", "--in", str(tmp_path / "g"),
               "--out", str(tmp_path / "sino"), "--angles", "90",
               "--offsets", "257", "--L", "1.0"])
    assert rc == 0
    rc = main(["radon", "invert", "--in", str(tmp_path / "sino"),
               "--out", str(tmp_path / "rec"), "--nx", "256"])
    assert rc == 0
    rec = serial.load_field(tmp_path / "rec")
    err = np.linalg.norm(rec.values - f.values) / np.linalg.norm(f.values)
    assert err < 0.06


def test_cli_extract_synthetic(tmp_path, capsys):
    h = 0.01
    s = 0.45 + np.arange(-1200, 1201) * (h / 10)
    chi = np.exp(-(s - 0.45) ** 2 / 0.02)
    lin = chi * np.cos((s - 0.45) / h)
    tr = lin + h * 0.42 * np.sin((s - 0.45) / h)
    serial.write_csv(tmp_path / "tr.csv", ["s", "value"], [s, tr])
    serial.write_csv(tmp_path / "lin.csv", ["s", "value"], [s, lin])
    rc = main(["extract", "--trace", str(tmp_path / "tr.csv"),
               "--linear", str(tmp_path / "lin.csv"), "--k", "1",
               "--h", str(h), "--band-center", "0.45"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["A_k"] == pytest.approx(0.42, rel=0.02)


def test_cli_oracle(tmp_path):
    cfgp = _tiny_config(tmp_path)
    rc = main(["oracle", "--config", str(cfgp), "--mode", "real_odd",
               "--k-max", "3", "--out-dir", str(tmp_path)])
    assert rc == 0
    csv = np.genfromtxt(tmp_path / "oracle_ladder.csv", delimiter=",",
                        names=True)
    assert csv["k"].tolist() == [1.0, 3.0]


def test_cli_error_is_machine_readable(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    doc = json.loads(_tiny_config(tmp_path).read_text())
    doc["probe"]["T"] = 0.1  # shorter than support + pulse width
    bad.write_text(json.dumps(doc))
    rc = main(["simulate", "--config", str(bad)])
    assert rc == 1
    err = json.loads(capsys.readouterr().err.strip())
    assert err["error"] == "ConfigError"


def test_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "nlwave.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
