import math

import numpy as np
import pytest

from hgdosim.trajectories import HoverRamp, Lemniscate, quintic_blend


class TestLemniscate:
    traj = Lemniscate()

    def test_starts_at_center(self):
        assert np.allclose(self.traj.position(0.0), [0.0, 0.0, 0.5])

    def test_quarter_period_hits_lobe_tip(self):
        p = self.traj.position(10.0)
        assert p[0] == pytest.approx(0.5, rel=1e-14)
        assert p[1] == pytest.approx(0.0, abs=1e-15)

    def test_eighth_period_frozen(self):
        p = self.traj.position(5.0)
        assert p[0] == pytest.approx(0.35355339059327373, rel=1e-14)
        assert p[1] == pytest.approx(0.25, rel=1e-14)
        assert p[2] == 0.5

    def test_periodic_without_phase_drift(self):
        # reducing the phase before the trig keeps distant periods aligned
        # to rounding of t itself, with no secular error growth
        for t in (0.0, 3.7, 17.21):
            a = self.traj.position(t)
            b = self.traj.position(t + 40.0)
            c = self.traj.position(t + 40.0 * 250000)
            assert np.allclose(a, b, atol=1e-12)
            assert np.allclose(a, c, atol=1e-9)

    def test_extent(self):
        ts = np.linspace(0.0, 40.0, 4001)
        pts = np.array([self.traj.position(t) for t in ts])
        assert abs(pts[:, 0]).max() == pytest.approx(0.5, abs=1e-6)
        assert abs(pts[:, 1]).max() == pytest.approx(0.25, abs=1e-6)

    def test_smooth(self):
        # second differences stay bounded by h^2 * max |acc|
        h = 1e-3
        ts = np.arange(0.0, 40.0, 0.25)
        for t in ts:
            pm, p0, pp = (self.traj.position(t + k * h) for k in (-1, 0, 1))
            acc = (pp - 2 * p0 + pm) / h**2
            assert np.all(np.abs(acc) < 0.1)

    def test_yaw_constant(self):
        assert self.traj.yaw(12.3) == 0.0
        assert Lemniscate(yaw_angle=0.4).yaw(12.3) == 0.4


class TestQuinticBlend:
    def test_endpoints(self):
        assert quintic_blend(0.0) == 0.0
        assert quintic_blend(1.0) == 1.0
        assert quintic_blend(-0.5) == 0.0
        assert quintic_blend(1.5) == 1.0

    def test_midpoint(self):
        assert quintic_blend(0.5) == pytest.approx(0.5, rel=1e-15)

    def test_flat_ends(self):
        h = 1e-5
        assert quintic_blend(h) / h < 1e-3
        assert (1.0 - quintic_blend(1.0 - h)) / h < 1e-3

    def test_monotone(self):
        taus = np.linspace(0.0, 1.0, 1001)
        vals = np.array([quintic_blend(float(x)) for x in taus])
        assert np.all(np.diff(vals) >= 0.0)


class TestHoverRamp:
    def test_pinned_without_ramp(self):
        traj = HoverRamp(target=np.array([1.0, -2.0, 0.7]))
        for t in (0.0, 0.5, 100.0):
            assert (traj.position(t) == [1.0, -2.0, 0.7]).all()

    def test_ramp_endpoints_exact(self):
        traj = HoverRamp(target=np.array([0.0, 0.0, 1.0]), ramp_time=2.0)
        assert (traj.position(0.0) == [0.0, 0.0, 0.0]).all()
        assert (traj.position(2.0) == [0.0, 0.0, 1.0]).all()
        assert (traj.position(37.0) == [0.0, 0.0, 1.0]).all()

    def test_ramp_midpoint(self):
        traj = HoverRamp(target=np.array([0.0, 0.0, 1.0]), ramp_time=2.0)
        assert traj.position(1.0)[2] == pytest.approx(0.5, rel=1e-14)

    def test_ramp_smooth_at_end(self):
        traj = HoverRamp(target=np.array([0.0, 0.0, 1.0]), ramp_time=2.0)
        h = 1e-4
        vel = (traj.position(2.0) - traj.position(2.0 - h)) / h
        assert np.linalg.norm(vel) < 1e-3

    def test_custom_start(self):
        traj = HoverRamp(target=np.array([2.0, 0.0, 1.0]),
                         start=np.array([1.0, 0.0, 1.0]), ramp_time=4.0)
        p = traj.position(2.0)
        assert p[0] == pytest.approx(1.5, rel=1e-14)
        assert p[2] == 1.0
