"""
Verification endpoints for the NLS-GI engine
"""

import logging

from fastapi import APIRouter

from nlsgi.api.v1.errors import to_http_exception
from nlsgi.core.config import RunConfig
from nlsgi.core.errors import NLSGIError
from nlsgi.services.suites import run_suite

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/{suite}")
def verify(suite: str, cfg: RunConfig):
    """Run a verification suite and return its report"""
    try:
        report = run_suite(cfg, suite, threads=cfg.threads or 1)
    except NLSGIError as e:
        logger.error(f"Verification request failed: {e}")
        raise to_http_exception(e)
    return report.to_dict()
