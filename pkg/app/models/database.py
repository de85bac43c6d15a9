"""
Database models and initialization for the run registry
"""

from datetime import datetime

from sqlalchemy import JSON, Boolean, Column, DateTime, Float, ForeignKey, Integer, String, create_engine
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

from app.core.config import settings

# Create database engine
connect_args = {"check_same_thread": False} if settings.DATABASE_URL.startswith("sqlite") else {}
engine = create_engine(settings.DATABASE_URL, echo=settings.DEBUG, connect_args=connect_args)
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)
Base = declarative_base()


class RunRecord(Base):
    """One scenario run"""
    __tablename__ = "runs"

    id = Column(String, primary_key=True, index=True)  # run_id
    scenario = Column(String, nullable=False, index=True)
    kind = Column(String, nullable=False)  # generic, racing, boat, probe
    seed = Column(Integer, nullable=False)
    horizon = Column(Float, nullable=False)

    # Outcome
    ok = Column(Boolean, default=False)
    steps = Column(Integer, default=0)
    sim_time = Column(Float, default=0.0)
    violation_count = Column(Integer, default=0)

    # Per-agent summary, errors, config warnings and the trace header
    agents = Column(JSON, default=dict)
    errors = Column(JSON, default=list)
    warnings = Column(JSON, default=list)
    header = Column(JSON, default=dict)

    created_at = Column(DateTime, default=datetime.utcnow)

    # Relationships
    events = relationship("TraceEventRecord", back_populates="run", order_by="TraceEventRecord.seq")


class TraceEventRecord(Base):
    """Trace event of a stored run"""
    __tablename__ = "trace_events"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(String, ForeignKey("runs.id"), nullable=False, index=True)
    seq = Column(Integer, nullable=False)
    sim_time = Column(Float, nullable=False)
    agent = Column(String, nullable=False)
    kind = Column(String, nullable=False)  # measure, actuate, select, transfer, violation, ...
    payload = Column(JSON, default=dict)

    # Relationships
    run = relationship("RunRecord", back_populates="events")


class VerificationRecord(Base):
    """Strategy verification outcome"""
    __tablename__ = "verifications"

    id = Column(Integer, primary_key=True, index=True)
    scenario = Column(String, nullable=False, index=True)
    agent = Column(String, nullable=False)
    verified = Column(Boolean, default=False)
    kind = Column(String, nullable=True)  # dead-end, cycle
    grid_density = Column(Float, nullable=True)
    report = Column(JSON, default=dict)

    created_at = Column(DateTime, default=datetime.utcnow)


# Database dependency
def get_db():
    """Get database session"""
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()


async def init_db():
    """Initialize database tables"""
    Base.metadata.create_all(bind=engine)
