import math

import numpy as np
import pytest
from scipy.integrate import quad

from nlsgi.core.errors import InputError
from nlsgi.services.grid import (
    SpatialGrid,
    compute_w,
    make_grids,
    norms,
    parse_preset,
    potential_from_samples,
    preset_samples,
    sample_potential,
    spectral_derivative,
    spectral_shift,
    write_potential_csv,
)


def test_default_grid_spacings():
    grid, zgrid = make_grids(20.0, 2048, 40.0, 4096)
    assert grid.spacing == pytest.approx(40.0 / 2048)
    assert zgrid.spacing == pytest.approx(80.0 / 4096)
    assert grid.nodes[0] == -20.0
    assert grid.nodes[grid.origin_index] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("L, N, Z, M", [(0.0, 64, 1.0, 64), (1.0, 7, 1.0, 64), (1.0, 64, 1.0, 6), (1.0, 64, -2.0, 64)])
def test_invalid_grids_are_rejected(L, N, Z, M):
    with pytest.raises(InputError):
        make_grids(L, N, Z, M)


def test_smallest_legal_grid():
    grid, zgrid = make_grids(1.0, 8, 1.0, 8)
    assert grid.nodes.size == 8
    assert zgrid.nodes.size == 8


def test_spectral_nodes_are_symmetric_and_avoid_zero():
    _, zgrid = make_grids(20.0, 64, 40.0, 4096)
    z = zgrid.nodes
    assert np.allclose(z, -z[::-1], atol=1e-12)
    assert np.min(np.abs(z)) == pytest.approx(zgrid.spacing / 2)
    assert np.allclose(zgrid.k ** 2, z, rtol=1e-13)
    assert np.all(zgrid.k[z > 0].real > 0)
    assert np.all(zgrid.k[z < 0].imag > 0)
    assert np.allclose(zgrid.lam, z + 1.0)


def test_zero_preset():
    grid = SpatialGrid(10.0, 64)
    potential = sample_potential("zero", grid)
    assert np.all(potential.u == 0)
    assert np.all(potential.w == 0)
    assert potential.metadata["decay_ok"] is True


def test_sech_decay_is_checked_against_boundary_tol():
    grid = SpatialGrid(20.0, 512)
    # 0.3 sech(20) is about 1.2e-9
    loose = sample_potential("sech:A=0.3", grid, boundary_tol=1e-8)
    strict = sample_potential("sech:A=0.3", grid, boundary_tol=1e-10)
    assert loose.metadata["decay_ok"] is True
    assert strict.metadata["decay_ok"] is False
    assert strict.metadata["boundary_value"] == pytest.approx(0.3 / math.cosh(20.0), rel=1e-6)


def test_preset_parsing():
    assert parse_preset("gaussian:A=2,sigma=0.5,v=1") == ("gaussian", {"A": 2.0, "sigma": 0.5, "v": 1.0})
    for bad in ("square:A=1", "sech:B=1", "sech:A", "sech:A=x", "gaussian:sigma=0"):
        with pytest.raises(InputError):
            parse_preset(bad)


def test_compute_w_matches_closed_form():
    grid = SpatialGrid(20.0, 512)
    x = grid.nodes
    u = np.exp(-x ** 2 / 2)
    expected = 1j * x * u + 2 * u - 0.5 * u ** 3
    assert np.allclose(compute_w(u, grid), expected, atol=1e-10)


def test_compute_w_of_modulated_gaussian_against_finite_differences():
    grid = SpatialGrid(20.0, 512)
    x = grid.nodes

    def u_of(s):
        return np.exp(2j * s) * np.exp(-s ** 2 / 2)

    h = 1e-3
    u = u_of(x)
    u_x = (-u_of(x + 2 * h) + 8 * u_of(x + h) - 8 * u_of(x - h) + u_of(x - 2 * h)) / (12 * h)
    oracle = -1j * u_x + 2 * u - 0.5 * np.abs(u) ** 2 * u
    w = compute_w(u, grid)
    assert np.max(np.abs(w - oracle)) <= 1e-8

    phi = np.exp(-x ** 2 / 2)
    closed = (4.0 - 0.5 * phi ** 2) * u - 1j * np.exp(2j * x) * (-x * phi)
    assert np.max(np.abs(w - closed)) <= 1e-10


def test_w_l1_norm_of_sech_against_quadrature():
    grid = SpatialGrid(20.0, 512)
    potential = sample_potential("sech:A=0.3", grid, boundary_tol=np.inf)
    l1_grid = grid.spacing * float(np.sum(np.abs(potential.w)))

    def abs_w(s):
        sech = 1.0 / math.cosh(s)
        u, u_x = 0.3 * sech, -0.3 * sech * math.tanh(s)
        return abs(-1j * u_x + 2 * u - 0.5 * u ** 3)

    l1_quad, _ = quad(abs_w, -20.0, 20.0, limit=200, epsabs=1e-12, epsrel=1e-12)
    assert l1_grid == pytest.approx(l1_quad, abs=1e-6)


def test_spectral_shift_and_derivative():
    grid = SpatialGrid(20.0, 512)
    x = grid.nodes
    f = np.exp(-x ** 2 / 2) * np.exp(0.5j * x)
    shifted = spectral_shift(f, grid, 0.3)
    assert np.allclose(shifted, np.exp(-(x + 0.3) ** 2 / 2) * np.exp(0.5j * (x + 0.3)), atol=1e-10)
    second = spectral_derivative(np.exp(-x ** 2 / 2), grid, order=2)
    assert np.allclose(second, (x ** 2 - 1) * np.exp(-x ** 2 / 2), atol=1e-9)


def test_norms_of_known_profiles():
    grid = SpatialGrid(20.0, 512)
    gaussian = potential_from_samples(np.exp(-grid.nodes ** 2 / 2), grid)
    report = norms(gaussian)
    assert report.L2 == pytest.approx(math.pi ** 0.25, abs=1e-10)
    assert report.L2 <= report.H1 <= report.H2
    assert report.L2 <= report.L21 <= report.H11
    assert report.H2_H11 == pytest.approx(report.H2 + report.H11)
    assert report.H2_H11 > math.hypot(report.H2, report.H11)

    sech = sample_potential("sech:A=1", grid, boundary_tol=np.inf)
    assert norms(sech).L1 == pytest.approx(math.pi, abs=2e-8)


def test_csv_input_matches_preset(tmp_path):
    grid = SpatialGrid(16.0, 256)
    u = preset_samples("gaussian:A=0.5,v=1", grid)
    path = write_potential_csv(tmp_path / "u.csv", grid.nodes, u)
    potential = sample_potential(str(path), grid)
    assert np.allclose(potential.u, u, atol=1e-15)


def test_csv_row_mismatch_needs_resampling(tmp_path):
    fine = SpatialGrid(16.0, 512)
    coarse = SpatialGrid(16.0, 256)
    u = preset_samples("gaussian:A=0.5", fine)
    path = write_potential_csv(tmp_path / "fine.csv", fine.nodes, u)
    with pytest.raises(InputError):
        sample_potential(str(path), coarse)
    resampled = sample_potential(str(path), coarse, allow_resample=True)
    assert np.allclose(resampled.u, preset_samples("gaussian:A=0.5", coarse), atol=1e-10)


@pytest.mark.parametrize(
    "text",
    [
        "x,u\n0,1\n",
        "x,re_u,im_u\n0,1\n1,2,3\n",
        "x,re_u,im_u\n0,1,0\n0,1,0\n",
        "x,re_u,im_u\n0,1,0\n1,a,0\n",
        "x,re_u,im_u\n0,1,0\n1,1,0\n3,1,0\n",
    ],
)
def test_malformed_csv_is_an_input_error(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text, encoding="utf-8")
    with pytest.raises(InputError):
        sample_potential(str(path), SpatialGrid(1.0, 8))


def test_non_finite_samples_are_rejected():
    grid = SpatialGrid(1.0, 8)
    u = np.zeros(8, dtype=complex)
    u[3] = np.nan
    with pytest.raises(InputError):
        potential_from_samples(u, grid)
