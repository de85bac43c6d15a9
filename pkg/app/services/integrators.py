"""
Fixed-step classical Runge-Kutta integration
"""

import math
from typing import Callable, Tuple

import numpy as np

from app.core.exceptions import ParameterError

Field = Callable[[np.ndarray, float], np.ndarray]


def rk4_step(f: Field, t: float, x: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(x, t)
    k2 = f(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = f(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = f(x + dt * k3, t + dt)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_count(t0: float, t1: float, dt: float) -> int:
    """Number of equal steps of at most dt covering [t0, t1]."""
    if not dt > 0:
        raise ParameterError("integration step must be positive", dt=dt)
    if t1 < t0:
        raise ParameterError("integration interval is reversed", t0=t0, t1=t1)
    return max(1, int(math.ceil((t1 - t0) / dt - 1e-9))) if t1 > t0 else 0


def integrate(f: Field, t0: float, x0: np.ndarray, t1: float, dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """RK4 from t0 to t1 with equal steps no larger than dt.

    Returns (times, states) including both endpoints; states[0] is x0 itself.
    """
    n = step_count(t0, t1, dt)
    h = (t1 - t0) / n if n else 0.0
    times = t0 + h * np.arange(n + 1)
    if n:
        times[-1] = t1
    states = np.empty((n + 1, len(x0)))
    states[0] = x0
    x = np.asarray(x0, dtype=float)
    for k in range(n):
        x = rk4_step(f, times[k], x, h)
        states[k + 1] = x
    return times, states
