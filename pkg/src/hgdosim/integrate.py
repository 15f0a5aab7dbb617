"""Fixed-step classical RK4."""

from __future__ import annotations

import numpy as np


class NonFinite(FloatingPointError):
    """Raised when a derivative evaluation returns NaN or Inf."""


def rk4_step(f, t: float, y, dt: float):
    """One classical Runge-Kutta step of y' = f(t, y).

    y may be a float or an ndarray; f must return the matching shape.
    """
    k1 = np.asarray(f(t, y), dtype=float)
    k2 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(f(t + 0.5 * dt, y + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(f(t + dt, y + dt * k3), dtype=float)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"non-finite state after step at t={t}")
    return out
