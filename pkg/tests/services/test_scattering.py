import dataclasses

import numpy as np
import pytest

from nlsgi.core.errors import InputError, SolitonGateError, StepSizeError
from nlsgi.services.grid import SpectralGrid, make_grids, sample_potential
from nlsgi.services.scattering import (
    ScatteringData,
    born_b,
    check_gate,
    direct_scattering,
    jost_asymptotics,
    jost_majorant,
    scattering_ab,
    soliton_free_bound,
    solve_jost,
    winding_number,
)


def _synthetic(zgrid: SpectralGrid, a: np.ndarray) -> ScatteringData:
    zeros = np.zeros(zgrid.point_count, dtype=complex)
    return ScatteringData(
        zgrid=zgrid, a=a, b=zeros, r=zeros, r_plus=zeros, r_minus=zeros,
        min_abs_a=float(np.min(np.abs(a))), unitarity_max_err=0.0, zero_count=winding_number(a),
    )


def test_zero_potential_gives_trivial_data(small_grids):
    grid, zgrid = small_grids
    data = direct_scattering(sample_potential("zero", grid), zgrid)
    assert np.allclose(data.a, 1.0, atol=1e-12)
    assert np.all(data.b == 0)
    assert np.all(data.r_plus == 0) and np.all(data.r_minus == 0)
    assert data.zero_count == 0
    check_gate(data, 1e-6)


def test_sech_identities_on_small_grid(sech_scattering):
    data = sech_scattering(0.3)
    z = data.zgrid.nodes
    assert data.unitarity_pos_err <= 1e-4
    assert data.unitarity_neg_err <= 1e-4
    assert 0.0 < data.parity_max_err <= 1e-5
    assert data.metadata["b_representation_gap"] <= 1e-5
    assert np.allclose(data.r_minus, 4.0 * z * data.r_plus, rtol=1e-12, atol=1e-15)
    rho = (np.conj(data.r_plus) * data.r_minus).real
    assert np.max(np.abs((1.0 + rho) * np.abs(data.a) ** 2 - 1.0)) <= 1e-4
    assert data.metadata["representation_gap"] <= 1e-5
    assert data.zero_count == 0
    assert abs(data.a[0] - 1.0) < 1e-2 and abs(data.a[-1] - 1.0) < 1e-2


def test_parity_check_detects_a_corrupted_column(small_grids):
    grid, zgrid = small_grids
    potential = sample_potential("sech:A=0.3", grid, boundary_tol=1e-6)
    fields = {which: solve_jost(potential, zgrid, which) for which in ("m-", "m+", "n+")}
    clean = scattering_ab(fields["m-"], fields["m+"], fields["n+"], potential)
    assert clean.parity_max_err <= 1e-5

    skewed = dataclasses.replace(fields["m+"], origin=fields["m+"].origin * (1.0 + 1e-3))
    corrupted = scattering_ab(fields["m-"], skewed, fields["n+"], potential)
    assert corrupted.parity_max_err >= 1e-4
    assert corrupted.parity_max_err > 10 * clean.parity_max_err


def test_b_integral_matches_born_term_for_small_amplitude(small_grids):
    grid, zgrid = small_grids
    potential = sample_potential("sech:A=0.001", grid, boundary_tol=1e-6)
    m_minus = solve_jost(potential, zgrid, "m-")
    born = born_b(potential, zgrid)
    assert np.max(np.abs(m_minus.b_integral - born)) <= 1e-4 * np.max(np.abs(born))


def test_rho_is_real(sech_scattering):
    data = sech_scattering(0.3)
    rho = np.conj(data.r_plus) * data.r_minus
    assert np.max(np.abs(rho.imag)) <= 1e-12 * max(1.0, float(np.max(np.abs(rho))))


def test_trapezoid_stepper_is_second_order():
    reference_grid, zgrid = make_grids(16.0, 1024, 4.0, 256)
    reference = direct_scattering(sample_potential("sech:A=0.3", reference_grid, boundary_tol=1e-6), zgrid)
    errors = []
    for n in (256, 512):
        grid, _ = make_grids(16.0, n, 4.0, 256)
        potential = sample_potential("sech:A=0.3", grid, boundary_tol=1e-6)
        data = direct_scattering(potential, zgrid, stepper="trapezoid")
        errors.append(float(np.max(np.abs(data.a - reference.a))))
    assert errors[0] / errors[1] >= 3.0


def test_steppers_agree(small_grids, sech_potential, sech_scattering):
    magnus = sech_scattering(0.3)
    trapezoid = direct_scattering(sech_potential(0.3), small_grids[1], stepper="trapezoid")
    assert np.max(np.abs(magnus.a - trapezoid.a)) <= 1e-2
    assert np.max(np.abs(magnus.b - trapezoid.b)) <= 1e-2


def test_born_limit(small_grids, sech_scattering):
    data = sech_scattering(1e-3)
    born = born_b(sample_potential("sech:A=1e-3", small_grids[0], boundary_tol=1e-6), small_grids[1])
    assert np.max(np.abs(data.b - born)) / np.max(np.abs(born)) <= 1e-4


def test_soliton_free_bound_and_majorant(sech_potential, sech_scattering, small_grids):
    assert soliton_free_bound(sample_potential("zero", small_grids[0])) == 1.0
    potential = sech_potential(0.1)
    data = sech_scattering(0.1)
    bound = soliton_free_bound(potential)
    assert 0.0 < bound <= data.min_abs_a + 1e-6
    assert soliton_free_bound(sech_potential(5.0)) < 0.0
    assert data.metadata["sup_deviation_m_plus"] <= jost_majorant(potential)


def test_jost_deviation_below_majorant_for_every_field(sech_potential, small_grids):
    potential = sech_potential(0.3)
    bound = jost_majorant(potential)
    for which in ("m+", "m-"):
        jost = solve_jost(potential, small_grids[1], which)
        assert np.max(jost.sup_deviation) <= bound


def test_asymptotic_q_functions(sech_potential, small_grids):
    potential = sech_potential(0.3)
    fields = {which: solve_jost(potential, small_grids[1], which) for which in ("m+", "m-", "n+")}
    asym = jost_asymptotics(potential, small_grids[1], fields)
    assert asym.q_minus[0] == 0.0
    assert asym.q_plus[-1] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(asym.q_minus - asym.q_plus, asym.q_minus[-1])
    assert asym.m2_plus.shape == (2, small_grids[1].point_count)


def test_full_field_is_kept_on_request(sech_potential, small_grids):
    potential = sech_potential(0.3)
    jost = solve_jost(potential, small_grids[1], "m+", keep_full=True)
    j0 = potential.grid.origin_index
    assert jost.values.shape == (potential.grid.point_count, 2, small_grids[1].point_count)
    assert np.array_equal(jost.values[j0], jost.origin)
    assert np.allclose(jost.values[-1], np.array([[1.0], [0.0]]))


def test_step_size_limit():
    grid, zgrid = make_grids(16.0, 512, 200.0, 512)
    with pytest.raises(StepSizeError):
        solve_jost(sample_potential("zero", grid), zgrid, "m+")


def test_unknown_jost_kind_and_stepper(small_grids):
    potential = sample_potential("zero", small_grids[0])
    with pytest.raises(InputError):
        solve_jost(potential, small_grids[1], "q+")
    with pytest.raises(InputError):
        solve_jost(potential, small_grids[1], "m+", stepper="euler")


def test_winding_number_counts_upper_half_plane_zeros():
    zgrid = SpectralGrid(40.0, 4096)
    z = zgrid.nodes
    assert winding_number((z - 1j) / (z + 1j)) == 1
    assert winding_number((z + 1j) / (z - 1j)) == -1
    assert winding_number(np.ones_like(z, dtype=complex)) == 0


def test_gate_refuses_zero_and_small_a():
    zgrid = SpectralGrid(40.0, 4096)
    z = zgrid.nodes
    with pytest.raises(SolitonGateError) as excinfo:
        check_gate(_synthetic(zgrid, (z - 1j) / (z + 1j)), 1e-6)
    assert excinfo.value.zero_count == 1
    assert excinfo.value.exit_code == 2

    shallow = np.ones_like(z, dtype=complex)
    shallow[100] = 1e-8
    with pytest.raises(SolitonGateError):
        check_gate(_synthetic(zgrid, shallow), 1e-6)
