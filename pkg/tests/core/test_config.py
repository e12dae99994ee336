import pytest

from nlsgi.core.config import RunConfig, parse_config
from nlsgi.core.errors import ConfigError
from tests.conftest import write_config


def test_no_path_gives_defaults():
    cfg = parse_config(None)
    assert (cfg.L, cfg.N, cfg.Z, cfg.M) == (20.0, 2048, 40.0, 4096)
    assert cfg.rh_tol == 1e-10
    assert cfg.phase_coefficient == 4
    assert cfg.snapshot_times == [0.1]


def test_parses_values_comments_and_none(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(
        "# grids\n"
        "N = 512   # spatial nodes\n"
        "\n"
        "stepper = trapezoid\n"
        "dt = none\n"
        "snapshots = 0.05, 0.0\n"
        "debug = true\n",
        encoding="utf-8",
    )
    cfg = parse_config(str(path))
    assert cfg.N == 512
    assert cfg.stepper == "trapezoid"
    assert cfg.dt is None
    assert cfg.debug is True
    assert cfg.snapshot_times == [0.0, 0.05, 0.1]


def test_bad_value_reports_its_line(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# header\nrh_tol = -1\n", encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        parse_config(str(path))
    assert excinfo.value.line == 2
    assert "line 2" in str(excinfo.value)
    assert excinfo.value.exit_code == 1


@pytest.mark.parametrize(
    "text, line",
    [
        ("N = 512\nbogus = 1\n", 2),
        ("N 512\n", 1),
        ("N = 512\nN = 256\n", 2),
        ("N = 7\n", 1),
        ("phase_coefficient = 3\n", 1),
        ("pad_factor = 1\n", 1),
        ("taper_fraction = 0.6\n", 1),
        ("stepper = euler\n", 1),
    ],
)
def test_rejects_malformed_configs(tmp_path, text, line):
    path = tmp_path / "run.cfg"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError) as excinfo:
        parse_config(str(path))
    assert excinfo.value.line == line


def test_snapshot_outside_window_is_rejected(tmp_path):
    path = write_config(tmp_path / "run.cfg", t_final=0.1, snapshots="0.2")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(str(tmp_path / "absent.cfg"))


def test_normalized_config_parses_back_to_the_same_run(tmp_path):
    cfg = RunConfig(N=512, M=1024, snapshots=[0.05], dt=1e-4, input_path="u.csv", debug=True)
    path = tmp_path / "normalized.cfg"
    path.write_text(cfg.normalized(), encoding="utf-8")
    again = parse_config(str(path))
    assert again == cfg
    assert again.config_hash() == cfg.config_hash()


def test_hash_tracks_values():
    assert RunConfig().config_hash() != RunConfig(rh_tol=1e-9).config_hash()
    assert len(RunConfig().config_hash()) == 16
