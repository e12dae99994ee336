"""
Health check endpoints for the NLS-GI engine
"""

import logging

import numpy as np
import scipy
from fastapi import APIRouter

from nlsgi.core.config import settings

logger = logging.getLogger(__name__)

router = APIRouter()


@router.get("/")
def health_check():
    """Basic health check"""
    return {
        "status": "healthy",
        "service": "nlsgi",
        "version": settings.VERSION,
        "environment": settings.ENVIRONMENT,
    }


@router.get("/live")
def liveness_check():
    """Liveness with the numerical stack versions"""
    return {
        "status": "healthy",
        "components": {
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
