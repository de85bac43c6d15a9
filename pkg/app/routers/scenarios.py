"""
Scenario endpoints: list, run, verify and (lambda, epsilon, eta) checks
"""

import logging
from typing import Any, Dict, List, Optional

from fastapi import APIRouter, HTTPException, Request

from app.core.exceptions import ADSError, ScenarioConfigError
from app.models.schemas import LeeRequest, RunRequest, ScenarioInfo, VerifyRequest
from app.services.scenarios.engine import lee_for_scenario, run_scenario, verify_scenario
from app.services.scenarios.loader import list_scenarios, load_scenario

logger = logging.getLogger(__name__)

router = APIRouter()


def _load(name: str):
    try:
        return load_scenario(name)
    except ScenarioConfigError as e:
        if any("not found" in p for p in e.problems):
            raise HTTPException(status_code=404, detail=e.to_dict())
        raise HTTPException(status_code=422, detail=e.to_dict())


@router.get("/scenarios", response_model=List[ScenarioInfo])
async def get_scenarios():
    """Scenario files in the configured scenario directory"""
    return list_scenarios()


@router.post("/scenarios/{name}/run")
async def run(name: str, request: Request, body: Optional[RunRequest] = None) -> Dict[str, Any]:
    """Run a scenario, store the run and its trace, and return the summary"""
    spec = _load(name)
    body = body or RunRequest()
    try:
        report = run_scenario(spec, seed=body.seed, horizon=body.horizon, x0=body.x0)
    except ADSError as e:
        raise HTTPException(status_code=422, detail=e.to_dict())
    request.app.state.registry.record_run(report)
    return report.model_dump(mode="json")


@router.post("/scenarios/{name}/verify")
async def verify(name: str, request: Request, body: Optional[VerifyRequest] = None) -> Dict[str, Any]:
    """Build and verify the strategy graph of one agent"""
    spec = _load(name)
    body = body or VerifyRequest()
    try:
        outcome = verify_scenario(spec, agent=body.agent, grid_density=body.grid_density)
    except ADSError as e:
        raise HTTPException(status_code=422, detail=e.to_dict())
    request.app.state.registry.record_verification(outcome.report)
    return outcome.report.model_dump(mode="json")


@router.post("/scenarios/{name}/lee")
async def lee(name: str, body: Optional[LeeRequest] = None) -> Dict[str, Any]:
    """Empirical (lambda, epsilon, eta) check"""
    spec = _load(name)
    body = body or LeeRequest()
    try:
        report = lee_for_scenario(
            spec,
            mode=body.mode,
            lam=body.lam,
            epsilon=body.epsilon,
            eta=body.eta,
            samples=body.samples,
            seed=body.seed,
        )
    except ADSError as e:
        raise HTTPException(status_code=422, detail=e.to_dict())
    return report.as_dict()
