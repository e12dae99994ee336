import numpy as np
import pytest

from nlsgi.core.errors import ConvergenceError
from nlsgi.services.grid import make_grids, sample_potential
from nlsgi.services.projector import delta_solve, make_plan
from nlsgi.services.reconstruction import calibrate_born, reconstruct_field
from nlsgi.services.rh_solver import SolverOptions
from nlsgi.services.scattering import direct_scattering
from tests.conftest import rel_max


def test_zero_data_reconstructs_zero(small_grids, small_plan):
    grid, zgrid = small_grids
    data = direct_scattering(sample_potential("zero", grid), zgrid)
    result = reconstruct_field(data, None, grid, small_plan)
    assert np.all(result.u_rec == 0)
    assert result.seam_gap == 0.0
    assert result.metadata["max_iterations"] == 1


def test_born_calibration_recovers_prefactors(small_grids):
    calibration = calibrate_born(*small_grids)
    assert calibration.u_prefactor == pytest.approx(-2.0 / np.pi, rel=1e-4)
    assert calibration.conj_w_prefactor == pytest.approx(1.0 / np.pi, rel=1e-4)


def test_small_amplitude_roundtrip(small_grids, small_plan, sech_potential, sech_scattering):
    grid = small_grids[0]
    u0 = sech_potential(1e-3).u
    result = reconstruct_field(sech_scattering(1e-3), None, grid, small_plan, reference=u0)
    x = grid.nodes
    right = (x >= 0) & (x <= 10)
    left = (x >= -10) & (x < 0)
    assert rel_max(result.u_rec[right], u0[right]) <= 1e-3
    assert rel_max(result.u_rec[left], u0[left]) <= 1e-3


def test_sech_roundtrip_on_small_grid(small_grids, small_plan, sech_potential, sech_scattering):
    grid = small_grids[0]
    u0 = sech_potential(0.3).u
    data = sech_scattering(0.3)
    deltas = delta_solve(data.r_plus, data.r_minus, small_plan)
    result = reconstruct_field(data, deltas, grid, small_plan, SolverOptions(), reference=u0)

    assert result.roundtrip_error <= 5e-3
    assert result.seam_gap <= 1e-3
    assert np.max(np.abs(result.u_rec.imag)) <= 5e-3 * 0.3
    assert np.max(result.w_residual) / np.max(np.abs(result.conj_w_rec)) <= 1e-2
    assert result.metadata["gmres_points"] + result.metadata["max_iterations"] >= 1
    assert result.norms.L2 == pytest.approx(0.3 * np.sqrt(2.0), rel=1e-2)


def test_threaded_sweep_is_deterministic(small_grids, small_plan, sech_scattering):
    data = sech_scattering(0.1)
    serial = reconstruct_field(data, None, small_grids[0], small_plan, threads=1)
    threaded = reconstruct_field(data, None, small_grids[0], small_plan, threads=3)
    assert np.array_equal(serial.u_rec, threaded.u_rec)


def test_failed_points_are_collected():
    grid, zgrid = make_grids(16.0, 128, 4.0, 128)
    data = direct_scattering(sample_potential("sech:A=0.3", grid, boundary_tol=1e-6), zgrid)
    options = SolverOptions(rh_tol=1e-300, max_iter=2)
    with pytest.raises(ConvergenceError) as excinfo:
        reconstruct_field(data, None, grid, make_plan(zgrid), options)
    assert len(excinfo.value.details["failed_x"]) == grid.point_count
