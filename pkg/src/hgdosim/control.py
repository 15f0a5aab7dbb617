"""Sliding-mode tracking control in two cascaded loops.

The outer loop turns position error into a virtual acceleration command,
which attitude extraction converts into a thrust magnitude and roll/pitch
setpoints for the commanded yaw. The inner loop tracks those angles with
torque-level accelerations. Both loops use the surface s = e_dot + lam*e,
a boundary-layer switch k*sat(s/mu) instead of a hard sign, linear surface
feedback L*s, and subtract the observer's disturbance estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quad import VehicleParams


class ThrustSingularity(ValueError):
    """Vertical acceleration demand too small to define a tilt attitude."""


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    r = math.fmod(a + math.pi, 2.0 * math.pi)
    if r < 0.0:
        r += 2.0 * math.pi
    r -= math.pi
    return math.pi if r == -math.pi else r


@dataclass
class SmcGains:
    """Per-axis controller gains; lam/k/l vectors run (x, y, z) or (phi, theta, psi)."""

    lam1: np.ndarray = field(default_factory=lambda: np.array([0.3580, 0.5058, 0.3405]))
    lam2: np.ndarray = field(default_factory=lambda: np.array([0.3580, 0.5058, 0.3405]))
    k1: np.ndarray = field(default_factory=lambda: np.array([5.2608, 5.0176, 5.4351]))
    k2: np.ndarray = field(default_factory=lambda: np.array([8.0568, 13.6547, 1.8914]))
    l1: np.ndarray = field(default_factory=lambda: np.array([2.6304, 2.5088, 2.7176]))
    l2: np.ndarray = field(default_factory=lambda: np.array([4.0284, 6.8274, 0.9457]))
    mu: float = 0.05          # boundary-layer half width
    uz_min: float = 2.0       # minimum vertical virtual acceleration [m/s^2]
    u1_max: float | None = None   # thrust ceiling [N]; None = twice hover weight
    tau_max: np.ndarray | None = None  # torque ceiling [N m]; None = from omega_max

    def thrust_cap(self, p: VehicleParams) -> float:
        return 2.0 * p.m * p.g if self.u1_max is None else float(self.u1_max)

    def torque_cap(self, p: VehicleParams) -> np.ndarray:
        if self.tau_max is not None:
            return np.asarray(self.tau_max, dtype=float)
        # half the torque each axis pair could produce at the rotor speed limit
        xy = 0.5 * p.arm * p.kt * p.omega_max**2
        z = 0.5 * p.kq * p.omega_max**2
        return np.array([xy, xy, z])


DEFAULT_GAINS = SmcGains()


@dataclass
class AttitudeSetpoint:
    """Inner-loop reference: angles (phi_d, theta_d, psi_d), thrust, and the
    filtered angle-rate/acceleration estimates the inner loop feeds forward."""

    angles: np.ndarray
    thrust: float
    rates: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accels: np.ndarray = field(default_factory=lambda: np.zeros(3))


def sat(s, mu: float):
    """Boundary-layer switch: s/mu clipped to [-1, 1]."""
    if mu <= 0.0:
        raise ValueError("boundary layer mu must be positive")
    return np.clip(np.asarray(s, dtype=float) / mu, -1.0, 1.0)


def sliding_surface(e, e_dot, lam) -> np.ndarray:
    return np.asarray(e_dot, dtype=float) + np.asarray(lam, dtype=float) * np.asarray(e, dtype=float)


def outer_loop(pos, vel, pos_d, vel_d, acc_d, d1_hat, gains: SmcGains,
               p: VehicleParams):
    """Virtual acceleration command from position tracking error.

    Componentwise clamp at u1_max/(m*sqrt(3)) guarantees the extracted thrust
    m*||u|| never exceeds u1_max, whatever the direction (peaking guard).
    Returns (u1vec, clamped). Scalar arithmetic throughout: this runs once
    per control tick and array temporaries dominate its cost otherwise.
    """
    mu = gains.mu
    if mu <= 0.0:
        raise ValueError("boundary layer mu must be positive")
    lam, k, l = gains.lam1, gains.k1, gains.l1
    cap = gains.thrust_cap(p) / (p.m * math.sqrt(3.0))
    gvec = (0.0, 0.0, p.g)
    u = np.empty(3)
    clamped = False
    for i in range(3):
        e = float(pos_d[i]) - float(pos[i])
        e_dot = float(vel_d[i]) - float(vel[i])
        s = e_dot + float(lam[i]) * e
        sw = s / mu
        if sw > 1.0:
            sw = 1.0
        elif sw < -1.0:
            sw = -1.0
        ui = (float(acc_d[i]) + gvec[i] - float(d1_hat[i])
              + float(lam[i]) * e_dot + float(k[i]) * sw + float(l[i]) * s)
        if ui > cap:
            ui = cap
            clamped = True
        elif ui < -cap:
            ui = -cap
            clamped = True
        u[i] = ui
    return u, clamped


def extract_attitude(u1vec, psi_d: float, gains: SmcGains, p: VehicleParams) -> AttitudeSetpoint:
    """Tilt angles and thrust that realize a virtual acceleration command.

    theta_d = atan((ux c_psi + uy s_psi) / uz)
    phi_d   = atan(cos(theta_d) (ux s_psi - uy c_psi) / uz)
    u1      = m uz / (cos(phi_d) cos(theta_d))

    Exact inverse of the thrust-direction map for uz > 0; raises
    ThrustSingularity when uz < uz_min (the engine clamps and flags instead).
    """
    ux, uy, uz = (float(v) for v in u1vec)
    if uz < gains.uz_min:
        raise ThrustSingularity(f"uz={uz:.3f} below floor {gains.uz_min}")
    cps, sps = math.cos(psi_d), math.sin(psi_d)
    theta_d = math.atan((ux * cps + uy * sps) / uz)
    phi_d = math.atan(math.cos(theta_d) * (ux * sps - uy * cps) / uz)
    thrust = p.m * uz / (math.cos(phi_d) * math.cos(theta_d))
    return AttitudeSetpoint(np.array([phi_d, theta_d, psi_d]), thrust)


def inner_loop(att, rate, sp: AttitudeSetpoint, d2_hat, f2val, gains: SmcGains) -> np.ndarray:
    """Angular acceleration command tracking the attitude setpoint.

    Yaw error is wrapped to (-pi, pi] so the loop never unwinds through a
    full turn. Returns u2vec; the engine maps it to torques and clamps.
    Scalarized for the same reason as outer_loop (runs every base step).
    """
    mu = gains.mu
    if mu <= 0.0:
        raise ValueError("boundary layer mu must be positive")
    lam, k, l = gains.lam2, gains.k2, gains.l2
    angles, rates_d, accels_d = sp.angles, sp.rates, sp.accels
    u = np.empty(3)
    for i in range(3):
        e = float(angles[i]) - float(att[i])
        if i == 2:
            e = wrap_angle(e)
        e_dot = float(rates_d[i]) - float(rate[i])
        s = e_dot + float(lam[i]) * e
        sw = s / mu
        if sw > 1.0:
            sw = 1.0
        elif sw < -1.0:
            sw = -1.0
        u[i] = (float(accels_d[i]) - float(f2val[i]) - float(d2_hat[i])
                + float(lam[i]) * e_dot + float(k[i]) * sw + float(l[i]) * s)
    return u


def gain_check(gains: SmcGains, eps1: float, eps2: float, d_tilde0, delta):
    """Switching-gain condition k > eps * (|dtilde(0)| + delta), per channel.

    d_tilde0 and delta are 6-vectors over (x, y, z, phi, theta, psi).
    Returns (ok, threshold) with ok a boolean 6-vector.
    """
    d_tilde0 = np.abs(np.asarray(d_tilde0, dtype=float))
    delta = np.asarray(delta, dtype=float)
    eps = np.array([eps1] * 3 + [eps2] * 3)
    threshold = eps * (d_tilde0 + delta)
    k = np.concatenate([gains.k1, gains.k2])
    return k > threshold, threshold
