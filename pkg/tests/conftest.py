"""
Shared fixtures: small grids that keep every solve under a few seconds
"""

import numpy as np
import pytest

from nlsgi.core.config import RunConfig, settings
from nlsgi.services.grid import make_grids, sample_potential
from nlsgi.services.projector import make_plan
from nlsgi.services.scattering import direct_scattering

SMALL = {"L": 16.0, "N": 512, "Z": 8.0, "M": 512}


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    monkeypatch.setattr(settings, "LOG_DIR", str(tmp_path / "logs"))
    return tmp_path / "logs"


@pytest.fixture
def small_grids():
    return make_grids(SMALL["L"], SMALL["N"], SMALL["Z"], SMALL["M"])


@pytest.fixture
def small_plan(small_grids):
    return make_plan(small_grids[1])


@pytest.fixture
def small_config(tmp_path):
    return RunConfig(**SMALL, out_dir=str(tmp_path / "out"))


@pytest.fixture
def sech_potential(small_grids):
    """Build a sech potential of a given amplitude on the small grid"""

    def build(amplitude: float = 0.3):
        return sample_potential(f"sech:A={amplitude}", small_grids[0], boundary_tol=1e-6)

    return build


@pytest.fixture
def sech_scattering(small_grids, sech_potential):
    cache = {}

    def build(amplitude: float = 0.3):
        if amplitude not in cache:
            cache[amplitude] = direct_scattering(sech_potential(amplitude), small_grids[1])
        return cache[amplitude]

    return build


def write_config(path, **values) -> str:
    """Write a flat key = value config file"""
    lines = [f"{key} = {value}" for key, value in values.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def config_file(tmp_path):
    def build(name: str = "run.cfg", **values) -> str:
        merged = {**SMALL, "out_dir": str(tmp_path / "out"), **values}
        return write_config(tmp_path / name, **merged)

    return build


def rel_max(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(b)))
    return float(np.max(np.abs(a - b))) / (scale if scale > 0 else 1.0)
