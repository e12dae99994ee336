"""
Inversion endpoints for the NLS-GI engine
"""

import logging

import numpy as np
from fastapi import APIRouter

from nlsgi.api.v1.errors import to_http_exception
from nlsgi.core.config import RunConfig
from nlsgi.core.errors import NLSGIError
from nlsgi.core.logging import get_ledger_logger
from nlsgi.services.grid import make_grids, sample_potential
from nlsgi.services.projector import make_plan
from nlsgi.services.reconstruction import reconstruct_field
from nlsgi.services.scattering import check_gate, direct_scattering
from nlsgi.services.suites import solver_options

logger = logging.getLogger(__name__)
ledger = get_ledger_logger("inversion_endpoints")

router = APIRouter()


@router.post("/invert")
def invert(cfg: RunConfig):
    """Round trip: direct scattering then RH reconstruction on the same grids"""
    ledger.log_run_start("api.invert", cfg.config_hash())
    try:
        grid, zgrid = make_grids(cfg.L, cfg.N, cfg.Z, cfg.M)
        potential = sample_potential(cfg.input_path or cfg.preset, grid, boundary_tol=cfg.boundary_tol, allow_resample=cfg.resample_input)
        data = direct_scattering(potential, zgrid, stepper=cfg.stepper, max_phase_step=cfg.max_phase_step)
        check_gate(data, cfg.gate_tol)
        plan = make_plan(zgrid, cfg.pad_factor, cfg.taper_fraction, cfg.window_tol)
        result = reconstruct_field(data, None, grid, plan, solver_options(cfg), reference=potential.u, threads=cfg.threads or 1)
    except NLSGIError as e:
        logger.error(f"Inversion request failed: {e}")
        ledger.log_run_end("api.invert", e.exit_code)
        raise to_http_exception(e)
    ledger.log_run_end("api.invert", 0)

    return {
        "x": grid.nodes.tolist(),
        "re_u": result.u_rec.real.tolist(),
        "im_u": result.u_rec.imag.tolist(),
        "w_residual": result.w_residual.tolist(),
        "roundtrip_error": result.roundtrip_error,
        "seam_gap": result.seam_gap,
        "w_residual_max": float(np.max(result.w_residual)),
        "norms": result.norms.as_dict(),
    }
