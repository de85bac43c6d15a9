"""
Run registry: stores run reports, their traces and verification outcomes
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

from sqlalchemy.orm import Session

from app.models.database import RunRecord, SessionLocal, TraceEventRecord, VerificationRecord
from app.services.scenarios.engine import RunReport
from app.services.trace import TraceEvent, TraceHeader
from app.services.verifier import VerificationReport

logger = logging.getLogger(__name__)


class RunRegistry:
    """Persists runs and verifications; keeps counters for the metrics endpoint"""

    def __init__(self, session_factory=SessionLocal):
        self.session_factory = session_factory

        # Statistics
        self.stats = {
            "runs": 0,
            "failed_runs": 0,
            "violations": 0,
            "verifications": 0,
            "unverified": 0,
        }

    def _session(self) -> Session:
        return self.session_factory()

    def record_run(self, report: RunReport) -> str:
        db = self._session()
        try:
            record = RunRecord(
                id=report.run_id,
                scenario=report.scenario,
                kind=report.kind,
                seed=report.seed,
                horizon=report.horizon,
                ok=report.ok,
                steps=report.steps,
                sim_time=report.sim_time,
                violation_count=report.violation_count,
                agents={name: a.model_dump(mode="json") for name, a in report.agents.items()},
                errors=report.errors,
                warnings=report.warnings,
                header=report.header.model_dump(mode="json"),
            )
            db.add(record)
            db.add_all(
                TraceEventRecord(
                    run_id=e.run_id,
                    seq=e.seq,
                    sim_time=e.sim_time,
                    agent=e.agent,
                    kind=e.kind,
                    payload=e.model_dump(mode="json")["payload"],
                )
                for e in report.events
            )
            db.commit()
        except Exception as e:
            db.rollback()
            logger.error(f"Error storing run {report.run_id}: {e}")
            raise
        finally:
            db.close()
        self.stats["runs"] += 1
        self.stats["violations"] += report.violation_count
        if not report.ok:
            self.stats["failed_runs"] += 1
        logger.info(f"Stored run {report.run_id} ({len(report.events)} events)")
        return report.run_id

    def record_verification(self, report: VerificationReport) -> int:
        db = self._session()
        try:
            record = VerificationRecord(
                scenario=report.scenario,
                agent=report.agent,
                verified=report.verified,
                kind=report.kind,
                grid_density=report.grid_density,
                report=report.model_dump(mode="json"),
            )
            db.add(record)
            db.commit()
            record_id = record.id
        finally:
            db.close()
        self.stats["verifications"] += 1
        if not report.verified:
            self.stats["unverified"] += 1
        return record_id

    @staticmethod
    def summary(record: RunRecord) -> Dict[str, Any]:
        return {
            "run_id": record.id,
            "scenario": record.scenario,
            "kind": record.kind,
            "seed": record.seed,
            "horizon": record.horizon,
            "ok": record.ok,
            "steps": record.steps,
            "sim_time": record.sim_time,
            "violation_count": record.violation_count,
            "agents": record.agents,
            "errors": record.errors,
            "warnings": record.warnings,
            "created_at": record.created_at.isoformat() if record.created_at else None,
        }

    def list_runs(self, skip: int = 0, limit: int = 50, scenario: Optional[str] = None) -> List[Dict[str, Any]]:
        db = self._session()
        try:
            query = db.query(RunRecord)
            if scenario:
                query = query.filter(RunRecord.scenario == scenario)
            records = query.order_by(RunRecord.created_at.desc()).offset(skip).limit(limit).all()
            return [self.summary(r) for r in records]
        finally:
            db.close()

    def get_run(self, run_id: str) -> Optional[Dict[str, Any]]:
        db = self._session()
        try:
            record = db.query(RunRecord).filter(RunRecord.id == run_id).first()
            return self.summary(record) if record else None
        finally:
            db.close()

    def get_trace(self, run_id: str, kind: Optional[str] = None) -> Optional[Tuple[TraceHeader, List[TraceEvent]]]:
        db = self._session()
        try:
            record = db.query(RunRecord).filter(RunRecord.id == run_id).first()
            if record is None:
                return None
            query = db.query(TraceEventRecord).filter(TraceEventRecord.run_id == run_id)
            if kind:
                query = query.filter(TraceEventRecord.kind == kind)
            events = [
                TraceEvent(
                    run_id=e.run_id, seq=e.seq, sim_time=e.sim_time, agent=e.agent, kind=e.kind, payload=e.payload
                )
                for e in query.order_by(TraceEventRecord.seq).all()
            ]
            return TraceHeader.model_validate(record.header), events
        finally:
            db.close()

    def list_verifications(self, scenario: Optional[str] = None, limit: int = 50) -> List[Dict[str, Any]]:
        db = self._session()
        try:
            query = db.query(VerificationRecord)
            if scenario:
                query = query.filter(VerificationRecord.scenario == scenario)
            records = query.order_by(VerificationRecord.created_at.desc()).limit(limit).all()
            return [
                {
                    "id": r.id,
                    "scenario": r.scenario,
                    "agent": r.agent,
                    "verified": r.verified,
                    "kind": r.kind,
                    "grid_density": r.grid_density,
                    "created_at": r.created_at.isoformat() if r.created_at else None,
                }
                for r in records
            ]
        finally:
            db.close()
