"""
Evolution service for the NLS-GI engine
Time evolution of reflection data, the IST time-stepper and a pseudo-spectral reference solver
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import fft

from nlsgi.core.config import RunConfig
from nlsgi.core.errors import InputError, InstabilityError, StepSizeError
from nlsgi.services.grid import PotentialField, SpatialGrid, SpectralGrid, spectral_derivative
from nlsgi.services.projector import ProjectorPlan, delta_solve
from nlsgi.services.reconstruction import ReconstructionResult, reconstruct_field
from nlsgi.services.rh_solver import SolverOptions
from nlsgi.services.scattering import ScatteringData, check_gate, direct_scattering

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvolutionConfig:
    """r+-(t) = r+- exp(sign * i * c * (z+1)^2 t); c = 4, sign = +1 match the PDE's linear dispersion"""

    t_final: float = 0.1
    phase_coefficient: int = 4
    phase_sign: int = 1
    dt: Optional[float] = None
    c_stab: float = 0.2
    growth_limit: float = 10.0
    snapshot_times: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.phase_coefficient not in (2, 4):
            raise InputError(f"phase_coefficient must be 2 or 4, got {self.phase_coefficient}")
        if self.phase_sign not in (1, -1):
            raise InputError(f"phase_sign must be +1 or -1, got {self.phase_sign}")
        if self.dt is not None and self.dt <= 0:
            raise InputError(f"dt must be positive, got {self.dt}")
        if any(t < 0 or t > self.t_final for t in self.snapshot_times):
            raise InputError(f"snapshot times must lie in [0, {self.t_final}]")

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> "EvolutionConfig":
        return cls(
            t_final=cfg.t_final,
            phase_coefficient=cfg.phase_coefficient,
            phase_sign=cfg.phase_sign,
            dt=cfg.dt,
            c_stab=cfg.c_stab,
            growth_limit=cfg.growth_limit,
            snapshot_times=tuple(cfg.snapshot_times),
        )


@dataclass(frozen=True, eq=False)
class ReferenceState:
    u: np.ndarray
    t: float
    mass0: float
    mass: float
    dt: float
    steps: int
    snapshots: Dict[float, np.ndarray] = field(default_factory=dict)

    @property
    def mass_drift(self) -> float:
        return abs(self.mass - self.mass0)


def mass(u: np.ndarray, grid: SpatialGrid) -> float:
    return float(grid.spacing * np.sum(np.abs(u) ** 2))


def evolve_reflection(scattering: ScatteringData, t: float, cfg: EvolutionConfig = EvolutionConfig()) -> ScatteringData:
    """Advance reflection data by t; a is left untouched"""
    if t == 0:
        return scattering
    lam = scattering.zgrid.lam
    factor = np.exp(cfg.phase_sign * 1j * cfg.phase_coefficient * lam * lam * t)
    return scattering.replace(
        b=scattering.b * factor,
        r=scattering.r * factor,
        r_plus=scattering.r_plus * factor,
        r_minus=scattering.r_minus * factor,
        t=scattering.t + t,
    )


def ist_solve(
    u0: PotentialField,
    t: float,
    cfg: EvolutionConfig,
    zgrid: SpectralGrid,
    plan: ProjectorPlan,
    options: SolverOptions = SolverOptions(),
    stepper: str = "magnus4",
    gate_tol: float = 1e-6,
    threads: int = 1,
    scattering: Optional[ScatteringData] = None,
    max_phase_step: float = 3.0,
) -> ReconstructionResult:
    """Direct scattering, evolve r+-, recompute delta+-, reconstruct u(., t)"""
    if scattering is None:
        scattering = direct_scattering(u0, zgrid, stepper=stepper, max_phase_step=max_phase_step)
    check_gate(scattering, gate_tol)

    deltas0 = delta_solve(scattering.r_plus, scattering.r_minus, plan)
    evolved = evolve_reflection(scattering, t, cfg)
    deltas = delta_solve(evolved.r_plus, evolved.r_minus, plan)

    result = reconstruct_field(evolved, deltas, u0.grid, plan, options, threads=threads)
    result.metadata["t"] = t
    result.metadata["delta_t_invariance"] = float(
        max(np.max(np.abs(deltas.delta_plus - deltas0.delta_plus)), np.max(np.abs(deltas.delta_minus - deltas0.delta_minus)))
    )
    result.metadata["mass_drift"] = abs(mass(result.u_rec, u0.grid) - mass(u0.u, u0.grid))
    return result


def _nonlinear(u: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """-2i|u|^2 u + u^2 conj(u)_x + (i/2)|u|^4 u"""
    abs2 = np.abs(u) ** 2
    return -2j * abs2 * u + u * u * spectral_derivative(np.conj(u), grid) + 0.5j * abs2 * abs2 * u


def reference_solve(u0: PotentialField, t: float, cfg: EvolutionConfig = EvolutionConfig()) -> ReferenceState:
    """Integrating-factor RK4 for u_t = i u_xx - 2i|u|^2 u + u^2 conj(u)_x + (i/2)|u|^4 u"""
    grid = u0.grid
    if t < 0:
        raise InputError(f"t must be non-negative, got {t}")
    dx2 = grid.spacing ** 2
    dt_max = cfg.c_stab * dx2
    if cfg.dt is not None and cfg.dt > dt_max:
        raise StepSizeError(
            f"dt = {cfg.dt:.3e} exceeds the stability limit c_stab * dx^2 = {dt_max:.3e}",
            dt=cfg.dt,
            limit=dt_max,
        )
    dt_target = cfg.dt if cfg.dt is not None else dt_max

    linear = -1j * grid.wavenumbers ** 2

    def n_hat(v_hat: np.ndarray) -> np.ndarray:
        return fft.fft(_nonlinear(fft.ifft(v_hat), grid))

    targets = sorted({s for s in cfg.snapshot_times if s <= t} | {t})
    u_hat = fft.fft(u0.u)
    mass0 = mass(u0.u, grid)
    snapshots: Dict[float, np.ndarray] = {}
    if 0.0 in targets:
        snapshots[0.0] = u0.u.copy()

    now = 0.0
    steps = 0
    last_norm = math.sqrt(mass0)
    dt_used = dt_target
    for target in targets:
        span = target - now
        if span <= 0:
            continue
        n_steps = max(1, math.ceil(span / dt_target - 1e-9))
        h = span / n_steps
        dt_used = h
        e_half = np.exp(0.5 * h * linear)
        e_full = e_half * e_half
        for _ in range(n_steps):
            a = h * n_hat(u_hat)
            b = h * n_hat(e_half * (u_hat + 0.5 * a))
            c = h * n_hat(e_half * u_hat + 0.5 * b)
            d = h * n_hat(e_full * u_hat + e_half * c)
            u_hat = e_full * u_hat + (e_full * a + 2.0 * e_half * (b + c) + d) / 6.0
            steps += 1
        now = target

        u_now = fft.ifft(u_hat)
        norm_now = math.sqrt(mass(u_now, grid))
        if not np.all(np.isfinite(u_now)) or norm_now > cfg.growth_limit * max(last_norm, 1e-300):
            raise InstabilityError(
                f"reference solver unstable near t = {now:.4g}: norm grew from {last_norm:.3e} to {norm_now:.3e}",
                t=now,
            )
        last_norm = norm_now
        snapshots[target] = u_now

    u_final = fft.ifft(u_hat)
    state = ReferenceState(
        u=u_final, t=t, mass0=mass0, mass=mass(u_final, grid), dt=dt_used, steps=steps, snapshots=snapshots,
    )
    logger.info(f"Reference solve to t = {t}: {steps} steps, mass drift {state.mass_drift:.2e}")
    return state


def linear_propagate(u0: np.ndarray, t: float, grid: SpatialGrid) -> np.ndarray:
    """Exact solution of u_t = i u_xx on the periodic grid"""
    return fft.ifft(np.exp(-1j * grid.wavenumbers ** 2 * t) * fft.fft(u0))


def compare(ist: ReconstructionResult, ref: ReferenceState, u0: PotentialField, t: Optional[float] = None) -> Dict[str, Any]:
    """Comparison record between the IST field and the reference field at one time"""
    grid = u0.grid
    t = ref.t if t is None else t
    u_ref = ref.snapshots.get(t, ref.u)
    gap = ist.u_rec - u_ref
    mass0 = mass(u0.u, grid)
    return {
        "t": float(t),
        "linf_gap": float(np.max(np.abs(gap))),
        "l2_gap": float(math.sqrt(mass(gap, grid))),
        "mass_drift_ist": float(abs(mass(ist.u_rec, grid) - mass0)),
        "mass_drift_ref": float(abs(mass(u_ref, grid) - mass0)),
    }
