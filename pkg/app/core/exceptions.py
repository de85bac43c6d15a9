"""
Structured errors raised by the simulator, predictor and verifier
"""

from typing import Any, Dict, Iterable, List, Optional


class ADSError(Exception):
    """Base error; carries a details payload that routers and reports can serialize."""

    code = "ads_error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, **_jsonable(self.details)}


class ParameterError(ADSError, ValueError):
    code = "invalid_parameter"


class DimensionMismatchError(ADSError, ValueError):
    code = "dimension_mismatch"

    def __init__(self, expected: int, actual: int, what: str = "point"):
        super().__init__(
            f"dimension mismatch: expected {expected}, got {actual} ({what})",
            expected=expected,
            actual=actual,
            what=what,
        )
        self.expected = expected
        self.actual = actual


class LeftChartError(ADSError):
    code = "left_chart"

    def __init__(self, time: float, state: Iterable[float], where: str = "plant"):
        state = [float(v) for v in state]
        super().__init__(f"{where} left the chart at t={time:.6g}", time=float(time), state=state, where=where)
        self.time = float(time)
        self.state = state


class TubeCoverageError(ADSError):
    code = "tube_coverage"

    def __init__(self, time: float, start: float, end: float):
        super().__init__(
            f"time {time:.6g} outside tube coverage [{start:.6g}, {end:.6g}]",
            time=time,
            start=start,
            end=end,
        )


class OracleRangeError(ADSError):
    code = "oracle_range"

    def __init__(self, step_index: int, span: Iterable[float]):
        span = [float(v) for v in span]
        super().__init__(f"measurement step {step_index} outside trajectory span {span}", step_index=step_index, span=span)


class InadmissibleControlError(ADSError):
    code = "inadmissible_control"

    def __init__(self, predicate: str, params: Iterable[float], base: Optional[Iterable[float]] = None):
        super().__init__(
            f"control rejected by predicate '{predicate}'",
            predicate=predicate,
            params=[float(v) for v in params],
            base=None if base is None else [float(v) for v in base],
        )
        self.predicate = predicate


class OutsideDomainError(ADSError):
    code = "outside_domain"

    def __init__(self, source: str, target: str, domain: Dict[str, Any], point: Iterable[float]):
        super().__init__(
            f"point outside the domain of transition {source}->{target}",
            source=source,
            target=target,
            domain=domain,
            point=[float(v) for v in point],
        )


class PreconditionError(ADSError):
    code = "precondition"

    def __init__(self, triple: str, point: Iterable[float]):
        super().__init__(
            f"measured state is outside the precondition of {triple}",
            triple=triple,
            point=[float(v) for v in point],
        )


class MissingTransitionError(ADSError):
    code = "missing_transition"

    def __init__(self, source: str, target: str):
        super().__init__(f"no transition map declared for {source}->{target}", source=source, target=target)


class NoStartVertexError(ADSError):
    code = "no_start_vertex"

    def __init__(self):
        super().__init__("strategy graph has no start vertex")


class ScenarioConfigError(ADSError):
    code = "scenario_config"

    def __init__(self, problems: List[str], source: Optional[str] = None):
        head = f"invalid scenario config{f' {source}' if source else ''}"
        super().__init__(f"{head}: " + "; ".join(problems), problems=list(problems), source=source)
        self.problems = list(problems)


class StepError(ADSError):
    """Wraps a lower-level error with the loop step at which it happened."""

    code = "step_error"

    def __init__(self, step_index: int, cause: ADSError):
        super().__init__(f"step {step_index}: {cause.message}", step_index=step_index, cause=cause.to_dict())
        self.step_index = step_index
        self.cause = cause


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and value != value:
        return None
    return value
