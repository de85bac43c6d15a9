import logging
from contextlib import asynccontextmanager

import uvicorn
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from app.core.config import settings
from app.models.database import init_db
from app.routers import health, runs, scenarios
from app.services.run_registry import RunRegistry

logging.basicConfig(
    level=settings.LOG_LEVEL,
    format=settings.LOG_FORMAT,
    datefmt='%H:%M:%S'
)
logging.getLogger('uvicorn').setLevel(logging.INFO)
logging.getLogger('watchfiles').setLevel(logging.WARNING)
logging.getLogger('sqlalchemy').setLevel(logging.WARNING)
logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    logger.info("Starting analogue-digital mode simulator...")
    await init_db()
    app.state.registry = RunRegistry()
    logger.info(f"Scenario directory: {settings.SCENARIO_DIR}")
    yield
    stats = app.state.registry.stats
    logger.info(f"Shutting down after {stats['runs']} runs and {stats['verifications']} verifications")


app = FastAPI(
    title="Analogue-Digital Mode Simulator",
    description="Batch runs, strategy verification and (lambda, epsilon, eta) checks for mode-switching control",
    version="1.0.0",
    lifespan=lifespan
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.ALLOWED_ORIGINS,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(health.router, prefix="/api", tags=["Health"])
app.include_router(scenarios.router, prefix="/api", tags=["Scenarios"])
app.include_router(runs.router, prefix="/api", tags=["Runs"])


@app.get("/")
async def root():
    return {
        "message": "Analogue-Digital Mode Simulator API",
        "version": "1.0.0",
        "docs": "/docs",
        "endpoints": {
            "scenarios": "/api/scenarios",
            "runs": "/api/runs",
            "health": "/api/health"
        }
    }


if __name__ == "__main__":
    uvicorn.run(
        "app.main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG,
        log_level="info",
    )
