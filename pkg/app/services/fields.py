"""
Built-in vector fields and control fibrations, selectable by name from scenario files
"""

import logging
from typing import Any, Callable, Dict, Tuple

import numpy as np

from app.core.exceptions import ScenarioConfigError
from app.services.plant import ControlFibration, VectorField

logger = logging.getLogger(__name__)

KMH_TO_MS = 1.0 / 3.6

FieldFactory = Callable[..., Tuple[VectorField, ControlFibration]]

_registry: Dict[str, FieldFactory] = {}


def register(name: str):
    def wrap(factory: FieldFactory) -> FieldFactory:
        _registry[name] = factory
        return factory

    return wrap


def build_field(name: str, dimension: int, params: Dict[str, Any]) -> Tuple[VectorField, ControlFibration]:
    if name not in _registry:
        raise ScenarioConfigError([f"unknown plant field '{name}' (known: {sorted(_registry)})"])
    try:
        return _registry[name](dimension=dimension, **params)
    except TypeError as e:
        raise ScenarioConfigError([f"bad parameters for field '{name}': {e}"])


def available_fields():
    return sorted(_registry)


def _no_control(dimension: int) -> ControlFibration:
    return ControlFibration(param_dimension=0, control_field=lambda x, p, t: np.zeros(dimension))


@register("static")
def static_field(dimension: int = 1):
    drift = VectorField(lambda x, t: np.zeros_like(x), lipschitz_hint=0.0, name="static")
    return drift, _no_control(dimension)


@register("constant")
def constant_field(dimension: int = 1, velocity=None):
    c = np.asarray(velocity if velocity is not None else [1.0] * dimension, dtype=float)
    drift = VectorField(lambda x, t: c.copy(), lipschitz_hint=0.0, name="constant")
    return drift, _no_control(dimension)


@register("linear")
def linear_field(dimension: int = 1, a: float = 1.0):
    drift = VectorField(lambda x, t: a * x, lipschitz_hint=abs(a), name="linear")
    return drift, _no_control(dimension)


@register("racing")
def racing_field(
    dimension: int = 4,
    agents=("car1", "car2"),
    gain: float = 20.0,
    max_accel: float = 20.0,
    max_brake: float = 40.0,
    max_speed: float = 120.0,
):
    """Cars on a line: state (x_i [m], v_i [km/h]) per car.

    Each car takes (target speed, acceleration limit, braking limit) with
    dv/dt = clip(gain * (target - v), -brake, accel).
    """
    n = len(agents)
    if dimension != 2 * n:
        raise ScenarioConfigError([f"racing state needs {2 * n} axes, got {dimension}"])

    def drift(x, t):
        out = np.zeros_like(x)
        out[0::2] = x[1::2] * KMH_TO_MS
        return out

    def control(x, p, t):
        p = p.reshape(n, 3)
        out = np.zeros_like(x)
        out[1::2] = np.clip(gain * (p[:, 0] - x[1::2]), -p[:, 2], p[:, 1])
        return out

    def in_range(lo, hi, column):
        return lambda x, p: bool(np.all((p.reshape(n, 3)[:, column] >= lo) & (p.reshape(n, 3)[:, column] <= hi)))

    fibration = ControlFibration(
        param_dimension=3 * n,
        control_field=control,
        predicates=(
            (f"0<=target_speed<={max_speed}", in_range(0.0, max_speed, 0)),
            (f"0<=accel<={max_accel}", in_range(0.0, max_accel, 1)),
            (f"0<=brake<={max_brake}", in_range(0.0, max_brake, 2)),
        ),
        layout={name: slice(3 * i, 3 * i + 3) for i, name in enumerate(agents)},
    )
    return VectorField(drift, name="racing"), fibration


MOTOR_SETTINGS = {"N": 1.0, "S": -1.0, "off": 0.0}


@register("boat")
def boat_field(dimension: int = 2, flow=(1.0, 0.0), motor_speed: float = 1.0):
    """Boat in a uniform flow with a lateral motor: N, S or off."""
    flow = np.asarray(flow, dtype=float)

    def control(x, p, t):
        return np.array([0.0, motor_speed * p[0]])

    fibration = ControlFibration(
        param_dimension=1,
        control_field=control,
        predicates=(("motor in {N,S,off}", lambda x, p: float(p[0]) in MOTOR_SETTINGS.values()),),
    )
    return VectorField(lambda x, t: flow.copy(), lipschitz_hint=0.0, name="boat"), fibration


@register("probe")
def probe_field(dimension: int = 7, mu: float = 1.0, k: float = 1.0, bodies=((0.0, 0.0, 0.0),)):
    """Point masses pulling a probe with state (x1,x2,x3,u1,u2,u3,F).

    Thrust c adds to the acceleration and burns fuel at k*|c|.
    """
    centres = np.asarray(bodies, dtype=float).reshape(-1, 3)

    def drift(x, t):
        out = np.zeros_like(x)
        out[0:3] = x[3:6]
        rel = x[0:3] - centres
        r3 = np.sum(rel**2, axis=1) ** 1.5
        out[3:6] = -mu * np.sum(rel / r3[:, None], axis=0)
        return out

    def control(x, p, t):
        out = np.zeros_like(x)
        out[3:6] = p
        out[6] = -k * float(np.sqrt(np.sum(p**2)))
        return out

    fibration = ControlFibration(param_dimension=3, control_field=control)
    return VectorField(drift, name="probe"), fibration
