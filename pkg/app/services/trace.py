"""
Run traces: ordered events, JSON-lines files and CSV export
"""

import csv
import logging
import uuid
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from app.core.config import settings
from app.core.exceptions import ParameterError

logger = logging.getLogger(__name__)

TRACE_FORMAT = "adsim-trace"

EVENT_KINDS = (
    "measure",
    "actuate",
    "select",
    "transfer",
    "violation",
    "post-reached",
    "state",
    "timer",
    "segment",
    "error",
    "release",
)


class TraceHeader(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    format: str = TRACE_FORMAT
    version: int = Field(default_factory=lambda: settings.TRACE_FORMAT_VERSION)
    run_id: str
    scenario: str
    seed: int
    axes: List[str] = Field(default_factory=list)
    x0: List[float] = Field(default_factory=list)
    params0: List[float] = Field(default_factory=list)


class TraceEvent(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    run_id: str
    seq: int
    sim_time: float
    agent: str
    kind: str
    payload: Dict[str, Any] = Field(default_factory=dict)

    @property
    def order_key(self) -> Tuple[float, int]:
        return (self.sim_time, self.seq)


def new_run_id() -> str:
    return uuid.uuid4().hex[:12]


class TraceRecorder:
    """Event sink handed to sessions and runtimes; numbers events in arrival order."""

    def __init__(self, run_id: Optional[str] = None):
        self.run_id = run_id or new_run_id()
        self.events: List[TraceEvent] = []

    def emit(self, time: float, agent: str, kind: str, /, **payload):
        if kind not in EVENT_KINDS:
            raise ParameterError(f"unknown trace event kind '{kind}'")
        event = TraceEvent(
            run_id=self.run_id, seq=len(self.events), sim_time=float(time), agent=agent, kind=kind, payload=payload
        )
        self.events.append(event)

    __call__ = emit

    def of_kind(self, kind: str, agent: Optional[str] = None) -> List[TraceEvent]:
        return [e for e in self.events if e.kind == kind and (agent is None or e.agent == agent)]


def write_trace(path: Union[str, Path], header: TraceHeader, events: Iterable[TraceEvent]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        fh.write(header.model_dump_json() + "\n")
        for event in events:
            fh.write(event.model_dump_json() + "\n")
            count += 1
    logger.info(f"wrote {count} trace events to {path}")
    return path


def read_trace(path: Union[str, Path]) -> Tuple[TraceHeader, List[TraceEvent]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise ParameterError(f"trace file {path} is empty")
    header = TraceHeader.model_validate_json(lines[0])
    if header.format != TRACE_FORMAT:
        raise ParameterError(f"{path} is not an {TRACE_FORMAT} file", format=header.format)
    if header.version > settings.TRACE_FORMAT_VERSION:
        raise ParameterError(f"trace version {header.version} is newer than supported", version=header.version)
    return header, [TraceEvent.model_validate_json(line) for line in lines[1:]]


def state_audit(events: Sequence[TraceEvent]) -> List[TraceEvent]:
    """State changes not preceded by a measure or transfer of the same agent at the same time."""
    last: Dict[str, Tuple[float, str]] = {}
    orphans = []
    for event in events:
        if event.kind in ("measure", "transfer"):
            last[event.agent] = (event.sim_time, event.kind)
        elif event.kind == "state":
            seen = last.get(event.agent)
            if seen is None or seen[0] != event.sim_time or seen[1] != event.payload.get("cause"):
                orphans.append(event)
    return orphans


def export_csv(path: Union[str, Path], header: TraceHeader, events: Sequence[TraceEvent]) -> int:
    """One row per measurement: sim_time, agent, axes..., mode, triple. Returns the row count.

    A measurement row takes its triple from the state update that follows it.
    """
    path = Path(path)
    axes = list(header.axes)
    if not axes:
        first = next((e for e in events if e.kind == "measure"), None)
        width = len(first.payload.get("value", [])) if first else 0
        axes = [f"x{i + 1}" for i in range(width)]
    pending: Dict[str, TraceEvent] = {}
    rows = 0
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sim_time", "agent", *axes, "mode", "triple"])
        for event in events:
            if event.kind == "measure":
                pending[event.agent] = event
            elif event.kind == "state" and event.payload.get("cause") == "measure" and event.agent in pending:
                m = pending.pop(event.agent)
                current = event.payload.get("triple", "")
                writer.writerow([m.sim_time, m.agent, *m.payload.get("value", []), current.rpartition(",")[0], current])
                rows += 1
    logger.info(f"exported {rows} rows to {path}")
    return rows
