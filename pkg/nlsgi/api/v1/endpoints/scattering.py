"""
Scattering endpoints for the NLS-GI engine
"""

import logging

from fastapi import APIRouter

from nlsgi.api.v1.errors import to_http_exception
from nlsgi.core.config import RunConfig
from nlsgi.core.errors import NLSGIError
from nlsgi.core.logging import get_ledger_logger
from nlsgi.services.archive import scattering_payload
from nlsgi.services.grid import make_grids, sample_potential
from nlsgi.services.scattering import check_gate, direct_scattering, soliton_free_bound

logger = logging.getLogger(__name__)
ledger = get_ledger_logger("scattering_endpoints")

router = APIRouter()


@router.post("/scatter")
def scatter(cfg: RunConfig):
    """Direct scattering of the configured potential; refuses data that fails the gate"""
    ledger.log_run_start("api.scatter", cfg.config_hash())
    try:
        grid, zgrid = make_grids(cfg.L, cfg.N, cfg.Z, cfg.M)
        potential = sample_potential(cfg.input_path or cfg.preset, grid, boundary_tol=cfg.boundary_tol, allow_resample=cfg.resample_input)
        data = direct_scattering(potential, zgrid, stepper=cfg.stepper, max_phase_step=cfg.max_phase_step)
        check_gate(data, cfg.gate_tol)
    except NLSGIError as e:
        logger.error(f"Scattering request failed: {e}")
        ledger.log_run_end("api.scatter", e.exit_code)
        raise to_http_exception(e)
    ledger.log_run_end("api.scatter", 0)

    payload = scattering_payload(data)
    payload["soliton_free_bound"] = soliton_free_bound(potential)
    payload["potential"] = potential.metadata
    return payload
