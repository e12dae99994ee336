"""
Evolution endpoints for the NLS-GI engine
"""

import logging

from fastapi import APIRouter

from nlsgi.api.v1.errors import to_http_exception
from nlsgi.core.config import RunConfig
from nlsgi.core.errors import NLSGIError
from nlsgi.services.evolution import EvolutionConfig, compare, ist_solve, reference_solve
from nlsgi.services.grid import make_grids, sample_potential
from nlsgi.services.projector import make_plan
from nlsgi.services.suites import solver_options

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/evolve")
def evolve(cfg: RunConfig):
    """IST solution at t_final compared with the reference solver"""
    try:
        grid, zgrid = make_grids(cfg.L, cfg.N, cfg.Z, cfg.M)
        potential = sample_potential(cfg.input_path or cfg.preset, grid, boundary_tol=cfg.boundary_tol, allow_resample=cfg.resample_input)
        evolution_cfg = EvolutionConfig.from_run_config(cfg)
        plan = make_plan(zgrid, cfg.pad_factor, cfg.taper_fraction, cfg.window_tol)
        ist = ist_solve(
            potential, cfg.t_final, evolution_cfg, zgrid, plan, solver_options(cfg),
            stepper=cfg.stepper, gate_tol=cfg.gate_tol, threads=cfg.threads or 1, max_phase_step=cfg.max_phase_step,
        )
        ref = reference_solve(potential, cfg.t_final, evolution_cfg)
    except NLSGIError as e:
        logger.error(f"Evolution request failed: {e}")
        raise to_http_exception(e)

    record = compare(ist, ref, potential)
    record["delta_t_invariance"] = ist.metadata["delta_t_invariance"]
    return record


@router.post("/reference")
def reference(cfg: RunConfig):
    """Reference PDE solve only"""
    try:
        grid, _ = make_grids(cfg.L, cfg.N, cfg.Z, cfg.M)
        potential = sample_potential(cfg.input_path or cfg.preset, grid, boundary_tol=cfg.boundary_tol, allow_resample=cfg.resample_input)
        ref = reference_solve(potential, cfg.t_final, EvolutionConfig.from_run_config(cfg))
    except NLSGIError as e:
        logger.error(f"Reference request failed: {e}")
        raise to_http_exception(e)

    return {
        "t": ref.t,
        "x": grid.nodes.tolist(),
        "re_u": ref.u.real.tolist(),
        "im_u": ref.u.imag.tolist(),
        "mass_drift_ref": ref.mass_drift,
        "steps": ref.steps,
        "dt": ref.dt,
    }
