"""
Main API router for the NLS-GI engine
Scattering, inversion, evolution and verification endpoints
"""

from fastapi import APIRouter

from nlsgi.api.v1.endpoints import evolution, health, inversion, scattering, verify

api_router = APIRouter()

# Include all endpoint routers
api_router.include_router(health.router, prefix="/health", tags=["health"])
api_router.include_router(scattering.router, prefix="/scattering", tags=["scattering"])
api_router.include_router(inversion.router, prefix="/inversion", tags=["inversion"])
api_router.include_router(evolution.router, prefix="/evolution", tags=["evolution"])
api_router.include_router(verify.router, prefix="/verify", tags=["verify"])
