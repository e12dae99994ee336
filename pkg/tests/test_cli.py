import json
from pathlib import Path

import numpy as np
import pytest

from nlsgi.cli import build_parser, main, resolve_threads
from nlsgi.core.config import RunConfig
from nlsgi.core.errors import ConfigError
from nlsgi.services.archive import read_scattering_archive, write_scattering_archive
from nlsgi.services.grid import SpectralGrid
from nlsgi.services.scattering import ScatteringData, winding_number


def test_dry_run_prints_normalized_config(config_file, capsys):
    path = config_file(N=256)
    assert main(["scatter", "--config", path, "--dry-run"]) == 0
    out = capsys.readouterr().out
    assert "N = 256" in out
    assert "rh_tol = 1e-10" in out


def test_bad_config_exits_1(config_file, capsys):
    path = config_file(rh_tol=-1)
    assert main(["scatter", "--config", path]) == 1
    assert "rh_tol" in capsys.readouterr().err


def test_missing_input_file_exits_1(config_file, tmp_path):
    path = config_file(input_path=str(tmp_path / "absent.csv"))
    assert main(["scatter", "--config", path]) == 1


def test_scatter_then_invert_zero_potential(config_file, tmp_path):
    path = config_file(preset="zero")
    out = tmp_path / "out"
    assert main(["scatter", "--config", path]) == 0
    data = read_scattering_archive(out / "scattering.json")
    assert np.allclose(data.a, 1.0, atol=1e-12)
    assert np.all(data.r_plus == 0)
    assert (out / "scattering.csv").exists()

    assert main(["invert", "--config", path]) == 0
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["roundtrip_error"] == 0.0
    assert summary["seam_gap"] == 0.0
    assert (out / "reconstruction.csv").exists()


def test_invert_refuses_archive_failing_the_gate(config_file, tmp_path, capsys):
    zgrid = SpectralGrid(8.0, 512)
    z = zgrid.nodes
    a = (z - 1j) / (z + 1j)
    zeros = np.zeros_like(a)
    data = ScatteringData(
        zgrid=zgrid, a=a, b=zeros, r=zeros, r_plus=zeros, r_minus=zeros,
        min_abs_a=float(np.min(np.abs(a))), unitarity_max_err=0.0, zero_count=winding_number(a),
    )
    archive, _ = write_scattering_archive(data, tmp_path / "gate")
    assert main(["invert", "--config", config_file(), "--archive", str(archive)]) == 2
    assert "soliton-free gate" in capsys.readouterr().err


def test_invert_corrupted_archive_exits_1(config_file, tmp_path):
    archive = tmp_path / "broken.json"
    archive.write_text("{}", encoding="utf-8")
    assert main(["invert", "--config", config_file(), "--archive", str(archive)]) == 1


def test_evolve_with_unstable_step_exits_3(config_file):
    path = config_file(preset="zero", dt=1.0, t_final=1.0)
    assert main(["evolve", "--config", path]) == 3


def test_evolve_applies_configured_phase_step(config_file, capsys):
    path = config_file(preset="sech:A=0.1", boundary_tol=1e-6, max_phase_step=0.1, t_final=0.01, snapshots="0.01")
    assert main(["evolve", "--config", path]) == 3
    assert "exceeds 0.1" in capsys.readouterr().err


def test_reference_writes_snapshots(config_file, tmp_path):
    path = config_file(N=128, t_final=0.02, snapshots="0.01")
    assert main(["reference", "--config", path]) == 0
    out = tmp_path / "out"
    report = json.loads((out / "reference.json").read_text(encoding="utf-8"))
    assert report["mass_drift_ref"] <= 1e-8
    assert (out / "snapshot_ref_t0.010000.csv").exists()
    assert (out / "snapshot_ref_t0.020000.csv").exists()


def test_verify_projectors_and_unknown_suite(config_file, tmp_path):
    path = config_file()
    assert main(["verify", "--config", path, "--suite", "projectors"]) == 0
    report = json.loads((tmp_path / "out" / "verify_projectors.json").read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert main(["verify", "--config", path, "--suite", "everything"]) == 1


def test_out_flag_overrides_config(config_file, tmp_path):
    path = config_file(preset="zero")
    target = tmp_path / "elsewhere"
    assert main(["scatter", "--config", path, "--out", str(target)]) == 0
    assert (target / "scattering.json").exists()


def test_parser_requires_a_command():
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args([])
    assert excinfo.value.code == 1


@pytest.mark.parametrize("argv", [[], ["bogus"], ["scatter", "--threads", "x"], ["verify", "--unknown"]])
def test_usage_errors_exit_1(argv, capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(argv)
    assert excinfo.value.code == 1
    assert "usage: nlsgi" in capsys.readouterr().err


def test_thread_resolution(monkeypatch):
    assert resolve_threads(4, RunConfig()) == 4
    assert resolve_threads(None, RunConfig(threads=2)) == 2
    monkeypatch.setenv("NLSGI_THREADS", "3")
    assert resolve_threads(None, RunConfig()) == 3
    with pytest.raises(ConfigError):
        resolve_threads(0, RunConfig())
    monkeypatch.setenv("NLSGI_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_threads(None, RunConfig())


def test_ledger_records_the_run(config_file, log_dir):
    main(["scatter", "--config", config_file(preset="zero")])
    text = Path(log_dir, "ledger.log").read_text(encoding="utf-8")
    assert "RUN_START - Command: scatter" in text
    assert "RUN_END - Command: scatter, Exit: 0" in text


def test_invert_compares_against_the_archived_potential(config_file, tmp_path):
    scatter_cfg = config_file("scatter.cfg", preset="sech:A=0.1", boundary_tol=1e-6)
    assert main(["scatter", "--config", scatter_cfg]) == 0
    archive = tmp_path / "out" / "scattering.json"
    assert read_scattering_archive(archive).metadata["source"] == "sech:A=0.1"

    invert_cfg = config_file("invert.cfg", preset="zero", out_dir=str(tmp_path / "inverted"))
    assert main(["invert", "--config", invert_cfg, "--archive", str(archive)]) == 0
    summary = json.loads((tmp_path / "inverted" / "summary.json").read_text(encoding="utf-8"))
    assert summary["reference_source"] == "sech:A=0.1"
    assert summary["roundtrip_error"] <= 5e-3


def test_invert_without_a_resamplable_source_has_no_reference(config_file, tmp_path, sech_scattering):
    data = sech_scattering(0.1)
    data = data.replace(metadata={**data.metadata, "source": str(tmp_path / "gone.csv")})
    archive, _ = write_scattering_archive(data, tmp_path / "archived")
    assert main(["invert", "--config", config_file(), "--archive", str(archive)]) == 0
    summary = json.loads((tmp_path / "out" / "summary.json").read_text(encoding="utf-8"))
    assert summary["reference_source"] is None
    assert summary["roundtrip_error"] is None
