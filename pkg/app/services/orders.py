"""
Orders: the small action language run by a triple, and its step-wise executor
"""

import logging
import math
from dataclasses import dataclass
from typing import Annotated, Callable, Generator, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.core.exceptions import ParameterError
from app.core.geometry import MetricSpec
from app.models.zones import Zone

logger = logging.getLogger(__name__)


class _Action(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")


class SetTargetSpeed(_Action):
    action: Literal["set_target_speed"] = "set_target_speed"
    speed: float = Field(ge=0)
    ramp_s: float = Field(default=0.0, ge=0)


class BrakeToHalt(_Action):
    action: Literal["brake_to_halt"] = "brake_to_halt"


class SetMotor(_Action):
    action: Literal["set_motor"] = "set_motor"
    setting: Literal["N", "S", "off", "either"]


class SetThrust(_Action):
    action: Literal["set_thrust"] = "set_thrust"
    vector: Tuple[float, ...]


class Wait(_Action):
    action: Literal["wait"] = "wait"
    seconds: float = Field(ge=0)


class RepeatUntil(_Action):
    """Run body, then stop once the mode state lies in until or the pass count reaches timelimit."""

    action: Literal["repeat_until"] = "repeat_until"
    until: Zone
    body: List["Action"]
    timelimit: Optional[int] = Field(default=None, ge=1)


Action = Annotated[
    Union[SetTargetSpeed, BrakeToHalt, SetMotor, SetThrust, Wait, RepeatUntil],
    Field(discriminator="action"),
]

RepeatUntil.model_rebuild()

SETTING_ACTIONS = (SetTargetSpeed, BrakeToHalt, SetMotor, SetThrust)


class OrdersProgram(BaseModel):
    model_config = ConfigDict(frozen=True)

    steps: List[Action] = Field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.steps


@dataclass(frozen=True)
class Command:
    """The setting in force, with the mode state and time at which it was issued."""

    action: _Action
    issued_state: Tuple[float, ...]
    issued_time: float


TimerHook = Callable[[float, int], None]


class OrdersExecutor:
    """Runs an OrdersProgram one lambda step per advance() call.

    Setting actions take no time. wait consumes ceil(seconds/lambda) steps,
    brake_to_halt holds until halted(state) is true. After the program ends
    the last command stays in force.
    """

    def __init__(
        self,
        program: OrdersProgram,
        lam: float,
        metric: MetricSpec,
        halted: Callable[[np.ndarray], bool],
        on_timer: Optional[TimerHook] = None,
    ):
        if not lam > 0:
            raise ParameterError("lambda must be positive", lam=lam)
        self.program = program
        self.lam = lam
        self.metric = metric
        self.halted = halted
        self.on_timer = on_timer
        self.command: Optional[Command] = None
        self.exhausted = False
        self.steps_taken = 0
        self._state: Optional[np.ndarray] = None
        self._time = 0.0
        self._gen = self._run(program.steps)

    def advance(self, state: np.ndarray, time: float) -> Optional[Command]:
        """Run up to the next step boundary and return the command to hold for the coming step."""
        self._state = np.asarray(state, dtype=float)
        self._time = time
        if not self.exhausted:
            try:
                next(self._gen)
            except StopIteration:
                self.exhausted = True
                logger.debug(f"orders exhausted at t={time:.6g}")
        self.steps_taken += 1
        return self.command

    def wait_steps(self, seconds: float) -> int:
        return int(math.ceil(seconds / self.lam - 1e-9))

    def _issue(self, action: _Action):
        self.command = Command(action, tuple(float(v) for v in self._state), self._time)

    def _run(self, steps) -> Generator[None, None, None]:
        for action in steps:
            if isinstance(action, BrakeToHalt):
                self._issue(action)
                while not self.halted(self._state):
                    yield
            elif isinstance(action, SETTING_ACTIONS):
                self._issue(action)
            elif isinstance(action, Wait):
                for _ in range(self.wait_steps(action.seconds)):
                    yield
            elif isinstance(action, RepeatUntil):
                yield from self._repeat(action)

    def _repeat(self, action: RepeatUntil) -> Generator[None, None, None]:
        passes = 0
        while True:
            before = self.steps_taken
            yield from self._run(action.body)
            if self.steps_taken == before:
                # A body that takes no time still costs one step per pass.
                yield
            passes += 1
            if action.until.contains(self._state, self.metric):
                return
            if action.timelimit is not None and passes >= action.timelimit:
                logger.info(f"repeat loop hit its timelimit of {action.timelimit} at t={self._time:.6g}")
                if self.on_timer is not None:
                    self.on_timer(self._time, passes)
                return
