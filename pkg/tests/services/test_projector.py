import logging
import math

import numpy as np
import pytest
from scipy.integrate import quad

from nlsgi.core.errors import DataCorruptionError, InputError
from nlsgi.services.grid import SpectralGrid
from nlsgi.services.projector import cauchy_offaxis, delta_solve, hilbert, make_plan, projector, split


@pytest.fixture
def wide_plan():
    return make_plan(SpectralGrid(40.0, 4096))


def _gaussian(plan, center=0.0, width=1.0):
    s = plan.zgrid.nodes
    return np.exp(-((s - center) ** 2) / (2 * width ** 2)).astype(complex)


def test_padded_length_is_next_power_of_two():
    zgrid = SpectralGrid(40.0, 4096)
    assert make_plan(zgrid).padded_length == 16384
    assert make_plan(zgrid, pad_factor=3).padded_length == 16384
    assert make_plan(SpectralGrid(1.0, 100), pad_factor=2).padded_length == 256
    with pytest.raises(InputError):
        make_plan(zgrid, pad_factor=1)


def test_discrete_identities_are_exact(wide_plan):
    f = _gaussian(wide_plan, 1.0, 2.0) * (1 + 0.5j) + _gaussian(wide_plan, -3.0, 1.5)
    plus, minus = split(f, wide_plan)
    assert np.max(np.abs(plus - minus - f)) <= 1e-12
    assert np.max(np.abs(plus + minus + 1j * hilbert(f, wide_plan))) <= 1e-12
    assert np.allclose(projector(f, 1, wide_plan), plus, atol=1e-15)


def test_modulated_gaussian_is_annihilated_and_idempotent(wide_plan):
    s = wide_plan.zgrid.nodes
    g = _gaussian(wide_plan) * np.exp(10j * s)
    g_plus = projector(g, 1, wide_plan)
    assert np.max(np.abs(g_plus - g)) <= 1e-10
    assert np.max(np.abs(projector(g_plus, -1, wide_plan))) <= 1e-10
    assert np.max(np.abs(projector(g_plus, 1, wide_plan) - g_plus)) <= 1e-10
    h = _gaussian(wide_plan) * np.exp(-10j * s)
    assert np.max(np.abs(projector(h, -1, wide_plan) + h)) <= 1e-10


def test_upper_analytic_function_is_fixed_by_plus_projector(wide_plan, caplog):
    s = wide_plan.zgrid.nodes
    f = 1.0 / (s + 1j)
    with caplog.at_level(logging.WARNING):
        plus = projector(f, 1, wide_plan)
        minus = projector(f, -1, wide_plan)
    assert "cosine taper" in caplog.text
    core = np.abs(s) <= 5
    assert np.max(np.abs(plus[core] - f[core])) <= 0.05
    assert np.max(np.abs(minus[core])) <= 0.05


def test_hilbert_of_lorentzian(wide_plan):
    s = wide_plan.zgrid.nodes
    transformed = hilbert(1.0 / (1.0 + s ** 2), wide_plan)
    core = np.abs(s) <= 5
    assert np.max(np.abs(transformed[core] + s[core] / (1.0 + s[core] ** 2))) <= 1e-3


def test_invalid_sign(wide_plan):
    with pytest.raises(InputError):
        projector(_gaussian(wide_plan), 0, wide_plan)


def test_cauchy_integral_off_axis_matches_quadrature(wide_plan):
    f = np.exp(-wide_plan.zgrid.nodes ** 2)
    value = cauchy_offaxis(f, 1j, wide_plan)
    integral, _ = quad(lambda s: math.exp(-s * s) / (1.0 + s * s), -np.inf, np.inf)
    assert value == pytest.approx(integral / (2 * math.pi), abs=1e-8)


def test_cauchy_integral_reproduces_analytic_function(wide_plan):
    f = 1.0 / (wide_plan.zgrid.nodes - 1j)
    # f is analytic below the axis: zero above, -f(z) below
    assert abs(cauchy_offaxis(f, 2j, wide_plan)) <= 0.02
    assert abs(cauchy_offaxis(f, -2j, wide_plan) - (-1j / 3)) <= 0.02
    with pytest.raises(InputError):
        cauchy_offaxis(f, 1.0 + 0j, wide_plan)


def test_delta_of_zero_reflection_is_one(wide_plan):
    zeros = np.zeros(wide_plan.zgrid.point_count, dtype=complex)
    deltas = delta_solve(zeros, zeros, wide_plan)
    assert np.all(deltas.delta_plus == 1.0)
    assert np.all(deltas.delta_minus == 1.0)
    assert deltas.modulus_err == 0.0


def test_delta_identities_for_sech_data(sech_scattering, small_plan):
    data = sech_scattering(0.3)
    deltas = delta_solve(data.r_plus, data.r_minus, small_plan)
    rho = (np.conj(data.r_plus) * data.r_minus).real
    assert deltas.modulus_err <= 1e-8
    assert deltas.jump_residual <= 1e-6
    assert np.max(np.abs(deltas.delta_plus - (1.0 + rho) * deltas.delta_minus)) <= 1e-6


def test_delta_rejects_inconsistent_data(wide_plan):
    z = wide_plan.zgrid.nodes
    r_plus = np.ones_like(z, dtype=complex)
    with pytest.raises(DataCorruptionError):
        delta_solve(r_plus, 4.0 * z * r_plus, wide_plan)
    with pytest.raises(DataCorruptionError):
        delta_solve(r_plus, 1j * r_plus, wide_plan)
