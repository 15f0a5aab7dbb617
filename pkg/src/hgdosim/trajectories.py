"""Position references for the closed loop.

Each trajectory yields reference position and yaw as functions of time; the
engine differentiates the position numerically at the outer-loop rate, so no
analytic derivatives are carried here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class Trajectory:
    def position(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def yaw(self, t: float) -> float:
        return 0.0


@dataclass
class Lemniscate(Trajectory):
    """Planar figure eight at constant height.

    x = A sin(ph), y = A sin(ph) cos(ph), ph = 2 pi t / period. The phase is
    reduced mod one period before the trig so samples a whole number of
    periods apart are bit identical.
    """

    amplitude: float = 0.5
    period: float = 40.0
    height: float = 0.5
    yaw_angle: float = 0.0

    def position(self, t: float) -> np.ndarray:
        ph = 2.0 * math.pi * math.fmod(t / self.period, 1.0)
        s, c = math.sin(ph), math.cos(ph)
        return np.array([self.amplitude * s, self.amplitude * s * c, self.height])

    def yaw(self, t: float) -> float:
        return self.yaw_angle


def quintic_blend(tau: float) -> float:
    """Smoothstep with zero velocity and acceleration at both ends."""
    if tau <= 0.0:
        return 0.0
    if tau >= 1.0:
        return 1.0
    return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau))


@dataclass
class HoverRamp(Trajectory):
    """Constant setpoint, optionally approached with a quintic ramp from start.

    ramp_time = 0 pins the reference at target for all t.
    """

    target: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 0.5]))
    start: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ramp_time: float = 0.0
    yaw_angle: float = 0.0

    def position(self, t: float) -> np.ndarray:
        target = np.asarray(self.target, dtype=float)
        if self.ramp_time <= 0.0 or t >= self.ramp_time:
            return target.copy()
        s = quintic_blend(t / self.ramp_time)
        return np.asarray(self.start, dtype=float) * (1.0 - s) + target * s

    def yaw(self, t: float) -> float:
        return self.yaw_angle
