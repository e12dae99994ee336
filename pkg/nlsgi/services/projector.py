"""
Cauchy projector service for the NLS-GI engine
Discrete Cauchy projectors, Hilbert transform and the scalar delta problem
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import fft

from nlsgi.core.errors import DataCorruptionError, InputError
from nlsgi.services.grid import SpectralGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectorPlan:
    """Zero-padded FFT plan for the projectors on a spectral grid

    P+ keeps positive frequencies (boundary values from Im z > 0), P- is minus
    the negative-frequency part. The zero and Nyquist bins are split evenly so
    that P+ - P- = I and P+ + P- = -iH hold exactly on the discrete space.
    """

    zgrid: SpectralGrid
    padded_length: int
    taper_fraction: float = 0.1
    window_tol: float = 1e-6

    @cached_property
    def plus_mask(self) -> np.ndarray:
        freq = fft.fftfreq(self.padded_length)
        mask = (freq > 0).astype(float)
        mask[0] = 0.5
        mask[self.padded_length // 2] = 0.5
        return mask

    @cached_property
    def minus_mask(self) -> np.ndarray:
        return 1.0 - self.plus_mask

    @cached_property
    def taper(self) -> np.ndarray:
        """Cosine roll-off to zero over the outer fraction of the grid"""
        m = self.zgrid.point_count
        width = max(1, int(round(self.taper_fraction * m)))
        ramp = 0.5 * (1.0 - np.cos(np.pi * (np.arange(width) + 0.5) / width))
        window = np.ones(m)
        window[:width] = ramp
        window[m - width:] = ramp[::-1]
        return window

    @cached_property
    def edge(self) -> np.ndarray:
        width = max(1, int(round(self.taper_fraction * self.zgrid.point_count)))
        mask = np.zeros(self.zgrid.point_count, dtype=bool)
        mask[:width] = True
        mask[-width:] = True
        return mask


def make_plan(zgrid: SpectralGrid, pad_factor: int = 4, taper_fraction: float = 0.1, window_tol: float = 1e-6) -> ProjectorPlan:
    """Padded length is the next power of two >= pad_factor * M"""
    if pad_factor < 2:
        raise InputError(f"pad_factor must be at least 2, got {pad_factor}")
    target = pad_factor * zgrid.point_count
    padded = 1 << (target - 1).bit_length()
    return ProjectorPlan(zgrid=zgrid, padded_length=padded, taper_fraction=taper_fraction, window_tol=window_tol)


def _windowed(f: np.ndarray, plan: ProjectorPlan) -> np.ndarray:
    f = np.asarray(f, dtype=complex)
    peak = float(np.max(np.abs(f), initial=0.0))
    if peak == 0.0:
        return f
    edge_peak = float(np.max(np.abs(f[..., plan.edge])))
    if edge_peak > plan.window_tol * peak:
        logger.warning(
            f"Projector input does not decay toward the grid ends (edge/peak = {edge_peak / peak:.2e}); applying cosine taper"
        )
        return f * plan.taper
    return f


def _transform(f: np.ndarray, plan: ProjectorPlan) -> np.ndarray:
    return fft.fft(f, n=plan.padded_length, axis=-1)


def _back(spectrum: np.ndarray, plan: ProjectorPlan) -> np.ndarray:
    return fft.ifft(spectrum, axis=-1)[..., : plan.zgrid.point_count]


def split(f: np.ndarray, plan: ProjectorPlan, check: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """(P+ f, P- f) from one forward transform; f may carry leading batch axes"""
    if check:
        f = _windowed(f, plan)
    spectrum = _transform(f, plan)
    return _back(spectrum * plan.plus_mask, plan), -_back(spectrum * plan.minus_mask, plan)


def apply(f: np.ndarray, sign: int, plan: ProjectorPlan) -> np.ndarray:
    """P+ or P- without the decay check"""
    spectrum = _transform(f, plan)
    if sign > 0:
        return _back(spectrum * plan.plus_mask, plan)
    return -_back(spectrum * plan.minus_mask, plan)


def projector(f: np.ndarray, sign: int, plan: ProjectorPlan) -> np.ndarray:
    """Boundary value P+ f (sign = +1) or P- f (sign = -1) of the Cauchy integral"""
    if sign not in (1, -1):
        raise InputError(f"projector sign must be +1 or -1, got {sign}")
    return apply(_windowed(f, plan), sign, plan)


def hilbert(f: np.ndarray, plan: ProjectorPlan) -> np.ndarray:
    """H = i (P+ + P-), i.e. the i*sgn(xi) Fourier multiplier"""
    spectrum = _transform(_windowed(f, plan), plan)
    return 1j * _back(spectrum * (plan.plus_mask - plan.minus_mask), plan)


def cauchy_offaxis(f: np.ndarray, z: complex, plan: ProjectorPlan) -> complex:
    """(1/2 pi i) int f(s)/(s - z) ds by the trapezoid rule on the grid"""
    if z.imag == 0:
        raise InputError("cauchy_offaxis needs Im z != 0")
    zgrid = plan.zgrid
    if abs(z.imag) < zgrid.spacing:
        logger.warning(f"|Im z| = {abs(z.imag):.2e} is below the grid spacing; Cauchy integral is inaccurate")
    s = zgrid.nodes
    return complex(zgrid.spacing * np.sum(np.asarray(f) / (s - z), axis=-1) / (2j * np.pi))


@dataclass(frozen=True, eq=False)
class DeltaSet:
    delta_plus: np.ndarray
    delta_minus: np.ndarray
    log_integrand: np.ndarray
    modulus_err: float
    jump_residual: float


def delta_solve(r_plus: np.ndarray, r_minus: np.ndarray, plan: ProjectorPlan) -> DeltaSet:
    """delta+- = exp(P+- log(1 + conj(r+) r-))"""
    rho = np.conj(r_plus) * r_minus
    scale = 1.0 + np.abs(rho)
    if np.max(np.abs(rho.imag) / scale) > 1e-8:
        raise DataCorruptionError(
            f"conj(r+) r- is not real (max imaginary part {np.max(np.abs(rho.imag)):.2e}); scattering data inconsistent"
        )
    one_plus = 1.0 + rho.real
    if np.min(one_plus) <= 0:
        worst = int(np.argmin(one_plus))
        raise DataCorruptionError(
            f"1 + conj(r+) r- = {one_plus[worst]:.3e} <= 0 at z = {plan.zgrid.nodes[worst]:.4f}; scattering data inconsistent",
            z=float(plan.zgrid.nodes[worst]),
        )

    log_integrand = np.log(one_plus)
    plus, minus = split(log_integrand, plan, check=True)
    delta_plus = np.exp(plus)
    delta_minus = np.exp(minus)

    modulus_err = float(np.max(np.abs(np.abs(delta_plus * delta_minus) - 1.0)))
    jump_residual = float(np.max(np.abs(delta_plus - delta_minus - rho.real * delta_minus)))
    logger.debug(f"Delta solve: modulus error {modulus_err:.2e}, jump residual {jump_residual:.2e}")
    return DeltaSet(
        delta_plus=delta_plus,
        delta_minus=delta_minus,
        log_integrand=log_integrand,
        modulus_err=modulus_err,
        jump_residual=jump_residual,
    )
