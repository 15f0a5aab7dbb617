"""High-gain disturbance observers for the canonical quadrotor form.

The auxiliary-variable observer keeps gamma = d_hat - x/epsilon as its state,
so stepping it needs only the measured velocity-level state and the applied
input, never a state derivative:

    gamma_dot = -(1/eps) * (gamma + x/eps) + (1/eps) * (model terms)
    d_hat     = gamma + x/eps

Against the true disturbance this behaves as a first-order lag with time
constant epsilon. A derivative-based variant of the same filter is included
for comparison; it has to differentiate the measurement and amplifies its
noise accordingly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrate import rk4_step


class NonPositiveEpsilon(ValueError):
    """Observer bandwidth parameter must be strictly positive."""


def _check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not epsilon > 0.0:
        raise NonPositiveEpsilon(f"epsilon must be > 0, got {epsilon}")
    return epsilon


@dataclass
class HgdoState:
    """Auxiliary observer state for one loop (translational or rotational)."""

    gamma: np.ndarray = field(default_factory=lambda: np.zeros(3))
    epsilon: float = 0.01
    loop: str = "translational"


def hgdo_init(x, epsilon: float, d_hat0=None, loop: str = "translational") -> HgdoState:
    """Start the observer so its first reconstruction equals d_hat0 (default 0)."""
    epsilon = _check_epsilon(epsilon)
    x = np.asarray(x, dtype=float)
    if d_hat0 is None:
        d_hat0 = np.zeros_like(x)
    gamma = np.asarray(d_hat0, dtype=float) - x / epsilon
    return HgdoState(gamma, epsilon, loop)


def reconstruct(st: HgdoState, x) -> np.ndarray:
    """Disturbance estimate from the auxiliary state and the current measurement."""
    return st.gamma + np.asarray(x, dtype=float) / st.epsilon


def gamma_dot_trans(gamma, x2, u1vec, epsilon: float, g: float) -> np.ndarray:
    """Auxiliary-state derivative, translational loop."""
    inv = 1.0 / epsilon
    gvec = np.array([0.0, 0.0, g])
    return -inv * (gamma + np.asarray(x2, dtype=float) * inv) + inv * (gvec - np.asarray(u1vec, dtype=float))


def gamma_dot_rot(gamma, x4, f2val, u2vec, epsilon: float) -> np.ndarray:
    """Auxiliary-state derivative, rotational loop."""
    inv = 1.0 / epsilon
    forcing = -np.asarray(f2val, dtype=float) - np.asarray(u2vec, dtype=float)
    return -inv * (gamma + np.asarray(x4, dtype=float) * inv) + inv * forcing


def hgdo_step_trans(st: HgdoState, x2, u1vec, g: float, dt: float) -> HgdoState:
    """Advance the translational observer one step, inputs held over dt."""
    x2 = np.asarray(x2, dtype=float)
    u1vec = np.asarray(u1vec, dtype=float)
    gamma = rk4_step(lambda _t, gm: gamma_dot_trans(gm, x2, u1vec, st.epsilon, g),
                     0.0, st.gamma, dt)
    return HgdoState(gamma, st.epsilon, st.loop)


def hgdo_step_rot(st: HgdoState, x4, f2val, u2vec, dt: float) -> HgdoState:
    """Advance the rotational observer one step, inputs held over dt."""
    x4 = np.asarray(x4, dtype=float)
    f2val = np.asarray(f2val, dtype=float)
    u2vec = np.asarray(u2vec, dtype=float)
    gamma = rk4_step(lambda _t, gm: gamma_dot_rot(gm, x4, f2val, u2vec, st.epsilon),
                     0.0, st.gamma, dt)
    return HgdoState(gamma, st.epsilon, st.loop)


def naive_hgdo_step(d_hat, x_dot, model_term, epsilon: float, dt: float) -> np.ndarray:
    """Derivative-based observer step: d_hat' = (x_dot + model_term - d_hat)/eps.

    model_term is (0,0,g) - u1vec for the translational loop and
    -f2 - u2vec for the rotational one. x_dot is an estimate of the
    velocity-level state derivative; when that estimate comes from finite
    differences of a noisy measurement, the noise passes straight into the
    filter (which is the point of keeping this variant around).
    """
    epsilon = _check_epsilon(epsilon)
    forcing = np.asarray(x_dot, dtype=float) + np.asarray(model_term, dtype=float)
    return rk4_step(lambda _t, dh: (forcing - dh) / epsilon, 0.0,
                    np.asarray(d_hat, dtype=float), dt)


class DerivativeFilter:
    """Finite-difference derivative smoothed by a first-order low-pass.

    The first call returns zero (no history yet). tau is the filter time
    constant; the engine uses 5x its measurement interval.
    """

    def __init__(self, tau: float, size: int = 3):
        if tau <= 0.0:
            raise ValueError("tau must be positive")
        self.tau = float(tau)
        self._prev = None
        self._est = np.zeros(size)

    def reset(self):
        self._prev = None
        self._est = np.zeros_like(self._est)

    def step(self, x, dt: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._prev is None:
            raw = np.zeros_like(self._est)
        else:
            raw = (x - self._prev) / dt
        self._prev = x.copy()
        alpha = self.tau / (self.tau + dt)
        self._est = alpha * self._est + (1.0 - alpha) * raw
        return self._est.copy()
