"""
Stored runs, their traces and verification history
"""

from typing import Any, Dict, List, Optional

from fastapi import APIRouter, HTTPException, Query, Request

router = APIRouter()


@router.get("/runs")
async def get_runs(
    request: Request,
    skip: int = Query(0, ge=0),
    limit: int = Query(50, ge=1, le=1000),
    scenario: Optional[str] = Query(None),
) -> List[Dict[str, Any]]:
    """Most recent runs first"""
    return request.app.state.registry.list_runs(skip=skip, limit=limit, scenario=scenario)


@router.get("/runs/{run_id}")
async def get_run(run_id: str, request: Request) -> Dict[str, Any]:
    run = request.app.state.registry.get_run(run_id)
    if run is None:
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    return run


@router.get("/runs/{run_id}/trace")
async def get_trace(run_id: str, request: Request, kind: Optional[str] = Query(None)) -> Dict[str, Any]:
    """Trace header and events, optionally of one kind"""
    found = request.app.state.registry.get_trace(run_id, kind)
    if found is None:
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    header, events = found
    return {
        "header": header.model_dump(mode="json"),
        "events": [e.model_dump(mode="json") for e in events],
    }


@router.get("/verifications")
async def get_verifications(
    request: Request, scenario: Optional[str] = Query(None), limit: int = Query(50, ge=1, le=1000)
) -> List[Dict[str, Any]]:
    return request.app.state.registry.list_verifications(scenario=scenario, limit=limit)
