import json
import os

import numpy as np
import pytest

from qclab import cli
from qclab.cli import RunConfig, dispatch, main, validate_config


def write_config(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


def test_distance_command_direct(capsys):
    rc = main(["distance", "--space", "heis", "--from", "0,0,0",
               "--to", "1,0,0", "--method", "direct"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["payload"]["direct"]["value"] - 1.0) <= 0.02


def test_unknown_flag_is_usage_error(capsys):
    rc = main(["distance", "--frobnicate", "1"])
    assert rc == 1
    assert "usage error" in capsys.readouterr().err


def test_unknown_command_is_usage_error(capsys):
    rc = main(["teleport"])
    assert rc == 1


def test_missing_command_is_usage_error():
    assert main([]) == 1


def test_validate_config_minimal(tmp_path):
    path = write_config(tmp_path, """
        command = contacto-check
        samples = 500
        seed = 3
    """)
    cfg, errors = validate_config(path)
    assert errors == []
    assert cfg.command == "contacto-check"
    assert cfg.samples == 500 and cfg.seed == 3
    # defaults filled
    assert cfg.Q == 4.0


def test_validate_config_catches_constraints(tmp_path):
    path = write_config(tmp_path, """
        command = obstruction
        Q = 4
        N = 4
    """)
    cfg, errors = validate_config(path)
    assert cfg is None
    assert any("N < Q" in e for e in errors)

    path = write_config(tmp_path, "command = distance\nh = -0.5\n")
    cfg, errors = validate_config(path)
    assert cfg is None and any("h > 0" in e for e in errors)


def test_validate_config_unknown_key(tmp_path):
    path = write_config(tmp_path, "command = distance\nwarp = 9\n")
    cfg, errors = validate_config(path)
    assert cfg is None and any("warp" in e for e in errors)


def test_validate_config_missing_file():
    cfg, errors = validate_config("/nonexistent/qclab.cfg")
    assert cfg is None and errors


def test_contacto_check_payload():
    rec = dispatch(RunConfig(command="contacto-check", samples=2000, seed=0))
    assert rec.payload["max_pullback_error"] <= 1e-10
    assert rec.payload["max_horizontality_defect"] <= 1e-10
    lo, hi = rec.payload["bilip_constants"]
    assert 0 < lo <= hi < np.inf


def test_determinism_byte_identical_payload():
    cfg = dict(command="planar", example="radial_stretch", lam=1.5,
               point=(1.0, 0.0), seed=7)
    a = dispatch(RunConfig(**cfg))
    b = dispatch(RunConfig(**cfg))
    assert a.payload_bytes() == b.payload_bytes()


def test_determinism_distance_graph():
    cfg = dict(command="distance", space="rototranslation", src=(0, 0, 0),
               dst=(0, 0, 1.0), method="both", h=0.08, seed=5)
    a = dispatch(RunConfig(**cfg))
    b = dispatch(RunConfig(**cfg))
    assert a.payload_bytes() == b.payload_bytes()


def test_record_written_atomically(tmp_path):
    cfg = RunConfig(command="planar", example="exp_strip", point=(0.0, 1.0),
                    out_dir=str(tmp_path), fmt="json", seed=1)
    rec = dispatch(cfg)
    path = tmp_path / "planar-seed1.json"
    assert path.exists()
    body = json.loads(path.read_text())
    assert body["schema_version"] == cli.SCHEMA_VERSION
    assert body["seed"] == 1
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


def test_csv_emission(tmp_path):
    cfg = RunConfig(command="growth-fit", space="euclidean3",
                    radii=(0.5, 1.0, 2.0), out_dir=str(tmp_path), fmt="csv", seed=2)
    dispatch(cfg)
    csv_path = tmp_path / "growth-fit-seed2.csv"
    assert csv_path.exists()
    header = csv_path.read_text().splitlines()[0]
    assert "radius" in header and "volume" in header


def test_loewner_command_payload():
    rec = dispatch(RunConfig(command="loewner", space="euclidean3", Q=3.0,
                             t_list=(1.0,), scale=1.0, seed=0))
    s = rec.payload["samples"][0]
    assert s["modulus"]["upper"] > 0


def test_env_var_overrides_out_dir(tmp_path, monkeypatch):
    override = tmp_path / "override"
    monkeypatch.setenv("QCLAB_OUT_DIR", str(override))
    cfg = RunConfig(command="planar", example="exp_strip", point=(0.0, 1.0),
                    out_dir=str(tmp_path / "ignored"), seed=4)
    dispatch(cfg)
    assert (override / "planar-seed4.json").exists()


def test_exit_code_non_convergence(monkeypatch, capsys):
    from qclab.geodesics import NonConvergenceError

    monkeypatch.setattr(cli, "dispatch",
                        lambda cfg: (_ for _ in ()).throw(
                            NonConvergenceError("penalty stalled")))
    rc = main(["contacto-check", "--samples", "100"])
    assert rc == 2
    assert "non-convergence" in capsys.readouterr().err


def test_exit_code_resource_cap(capsys):
    # a graph request far beyond the node cap
    rc = main(["distance", "--space", "heis", "--from", "0,0,0",
               "--to", "1,0,0", "--method", "graph", "--h", "0.002"])
    assert rc == 3
    assert "resource cap" in capsys.readouterr().err
