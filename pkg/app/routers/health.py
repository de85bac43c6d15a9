"""
Health and metrics endpoints
"""

from datetime import datetime
from typing import Any, Dict

from fastapi import APIRouter, Depends, Request
from sqlalchemy import func
from sqlalchemy.orm import Session

from app.models.database import RunRecord, VerificationRecord, get_db

router = APIRouter()


@router.get("/health")
async def health_check(db: Session = Depends(get_db)) -> Dict[str, Any]:
    """Check system health and return status information"""
    return {
        "status": "ok",
        "timestamp": datetime.utcnow().isoformat(),
        "stored_runs": db.query(RunRecord).count(),
        "stored_verifications": db.query(VerificationRecord).count(),
        "version": "1.0.0",
    }


@router.get("/metrics")
async def get_metrics(request: Request, db: Session = Depends(get_db)) -> Dict[str, Any]:
    """Registry counters since start-up plus totals from the database"""
    registry = request.app.state.registry
    ok_runs = db.query(func.count(RunRecord.id)).filter(RunRecord.ok.is_(True)).scalar() or 0
    total_runs = db.query(func.count(RunRecord.id)).scalar() or 0
    return {
        "adsim_runs": registry.stats["runs"],
        "adsim_failed_runs": registry.stats["failed_runs"],
        "adsim_violations": registry.stats["violations"],
        "adsim_verifications": registry.stats["verifications"],
        "adsim_unverified": registry.stats["unverified"],
        "adsim_stored_runs_total": total_runs,
        "adsim_stored_runs_ok": ok_runs,
    }
