"""
NLS-GI Inverse Scattering Engine - Main Application
FastAPI service over the scattering, inversion and evolution services
"""

import logging
from contextlib import asynccontextmanager

from fastapi import FastAPI

from nlsgi.api.v1.api import api_router
from nlsgi.core.config import settings
from nlsgi.core.logging import setup_logging

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Application lifespan management"""
    setup_logging()
    logger.info("Starting NLS-GI engine service...")
    yield
    logger.info("Shutting down NLS-GI engine service...")


def create_application() -> FastAPI:
    """Create and configure FastAPI application"""

    app = FastAPI(
        title=settings.APP_NAME,
        description="Forward scattering, Riemann-Hilbert inversion and time evolution for the NLS-GI equation",
        version=settings.VERSION,
        lifespan=lifespan,
    )

    # Include API routes
    app.include_router(api_router, prefix="/api/v1")

    @app.get("/")
    def root():
        """Root endpoint with service information"""
        return {
            "message": settings.APP_NAME,
            "version": settings.VERSION,
            "docs": "/docs",
            "health": "/api/v1/health/",
        }

    return app


# Create application instance
app = create_application()

if __name__ == "__main__":
    import uvicorn

    uvicorn.run("nlsgi.main:app", host="0.0.0.0", port=8000, log_level="info")
