"""Closed-loop engine tests: determinism, equilibria, refinement, guards."""

import math

import numpy as np
import pytest

from hgdosim.disturbances import (
    CompositeSinusoid,
    Constant,
    DrydenGust,
    GroundEffect,
)
from hgdosim.integrate import rk4_step
from hgdosim.quad import MICRO_QUAD, VehicleParams
from hgdosim.sim import (
    FLAG_ROTOR_SAT,
    FLAG_UZ_FLOOR,
    TRACE_COLUMNS,
    Diverged,
    ScenarioConfig,
    SimTrace,
    lyapunov_value,
    run_scenario,
)
from hgdosim.trajectories import HoverRamp, Lemniscate

HOLD = np.array([0.0, 0.0, 0.5])


def hold_cfg(**kw):
    base = dict(name="hold", duration=2.0, dt=0.002, outer_divisor=1,
                trajectory=HoverRamp(target=HOLD.copy()), pos0=HOLD.copy())
    base.update(kw)
    return ScenarioConfig(**base)


def lemniscate_cfg(**kw):
    w = 2.0 * math.pi / 40.0
    base = dict(name="lem", duration=4.0, dt=0.002, outer_divisor=1,
                trajectory=Lemniscate(),
                pos0=np.array([0.0, 0.0, 0.5]),
                vel0=np.array([0.5 * w, 0.5 * w, 0.0]))
    base.update(kw)
    return ScenarioConfig(**base)


class TestTraceShape:
    def test_row_count_and_grid(self):
        tr = run_scenario(hold_cfg(duration=2.0))
        assert len(tr) == 1001
        assert tr.data.shape == (1001, len(TRACE_COLUMNS))
        dt = np.diff(tr.t)
        assert np.allclose(dt, 0.002, rtol=0.0, atol=1e-12)
        assert np.isfinite(tr.data).all()

    def test_column_accessors(self):
        tr = run_scenario(hold_cfg())
        assert tr.col("z").shape == (len(tr),)
        block = tr.cols("ex", "ey", "ez")
        assert block.shape == (len(tr), 3)
        with pytest.raises(KeyError):
            tr.col("no_such_column")

    def test_meta_contents(self):
        tr = run_scenario(hold_cfg(seed=7))
        assert tr.meta["seed"] == 7
        assert tr.meta["observer"] == "hgdo"
        assert tr.meta["wall_time"] > 0.0
        assert tr.config is not None


class TestEquilibrium:
    def test_static_hover_is_preserved(self):
        # On-setpoint start, no disturbance: feedforward is exact and the
        # state should not move at all beyond rounding.
        tr = run_scenario(hold_cfg(duration=10.0))
        assert np.abs(tr.cols("ex", "ey", "ez")).max() <= 1e-6
        assert np.abs(tr.cols("phi", "theta", "psi")).max() <= 1e-9

    def test_hover_thrust_matches_weight(self):
        tr = run_scenario(hold_cfg())
        hover = MICRO_QUAD.m * MICRO_QUAD.g
        assert np.allclose(tr.col("thrust"), hover, rtol=1e-9)

    def test_heavier_vehicle_hovers_at_its_own_weight(self):
        heavy = VehicleParams(m=2.0 * MICRO_QUAD.m, jx=2.0 * MICRO_QUAD.jx,
                              jy=2.0 * MICRO_QUAD.jy, jz=2.0 * MICRO_QUAD.jz,
                              omega_max=2.0 * MICRO_QUAD.omega_max)
        tr = run_scenario(hold_cfg(vehicle=heavy))
        assert np.allclose(tr.col("thrust"), heavy.m * heavy.g, rtol=1e-9)


class TestDeterminism:
    def stochastic_cfg(self, seed):
        return hold_cfg(name="noisy", seed=seed, noise_power=0.01,
                        force_signals=(DrydenGust("u"), DrydenGust("v"), None),
                        outer_divisor=5)

    def test_same_seed_bit_identical(self):
        a = run_scenario(self.stochastic_cfg(3))
        b = run_scenario(self.stochastic_cfg(3))
        assert np.array_equal(a.data, b.data)

    def test_different_seed_differs(self):
        a = run_scenario(self.stochastic_cfg(3))
        b = run_scenario(self.stochastic_cfg(4))
        assert not np.array_equal(a.data, b.data)

    def test_deterministic_run_repeats(self):
        a = run_scenario(lemniscate_cfg())
        b = run_scenario(lemniscate_cfg())
        assert np.array_equal(a.data, b.data)


class TestObserverInLoop:
    def test_step_estimate_matches_filter_theory(self):
        # The observer is forced by the wrench the plant actually receives,
        # so a constant step converges exactly like the first-order filter.
        cfg = hold_cfg(duration=0.2, force_signals=(Constant(0.2), None, None))
        tr = run_scenario(cfg)
        for tk in (0.01, 0.05):
            i = int(round(tk / cfg.dt))
            exact = 0.2 * (1.0 - math.exp(-tr.t[i] / cfg.epsilon1))
            assert tr.col("d1x_hat")[i] == pytest.approx(exact, rel=1e-6)

    def test_none_observer_reports_zero_estimates(self):
        cfg = lemniscate_cfg(observer="none",
                             force_signals=(CompositeSinusoid(), None, None))
        tr = run_scenario(cfg)
        hat = tr.cols("d1x_hat", "d1y_hat", "d1z_hat",
                      "d2x_hat", "d2y_hat", "d2z_hat")
        assert np.all(hat == 0.0)

    def test_naive_observer_tracks_composite(self):
        cfg = lemniscate_cfg(observer="naive",
                             force_signals=(CompositeSinusoid(),
                                            CompositeSinusoid(),
                                            CompositeSinusoid()))
        tr = run_scenario(cfg)
        err = (tr.cols("d1x_true", "d1y_true", "d1z_true")
               - tr.cols("d1x_hat", "d1y_hat", "d1z_hat"))
        assert np.abs(err[-1]).max() < 0.05

    def test_ground_effect_estimated_through_position_path(self):
        cfg = hold_cfg(duration=6.0, trajectory=HoverRamp(target=np.array([0.0, 0.0, 0.2])),
                       pos0=np.array([0.0, 0.0, 0.2]),
                       force_signals=(None, None, GroundEffect()))
        tr = run_scenario(cfg)
        recon = 0.3 * np.clip(1.0 - tr.col("z") / 0.3, 0.0, 1.0)
        assert np.abs(tr.col("d1z_true") - recon).max() <= 1e-12
        assert tr.col("d1z_hat")[-1] == pytest.approx(0.1, abs=1e-4)


class TestRefinementAndAllocation:
    def test_substep_refinement_is_converged(self):
        coarse = run_scenario(lemniscate_cfg(substeps=4))
        fine = run_scenario(lemniscate_cfg(substeps=8))
        dpos = np.abs(coarse.cols("x", "y", "z")[-1] - fine.cols("x", "y", "z")[-1])
        assert dpos.max() <= 1e-5

    def test_allocation_roundtrip_is_transparent(self):
        direct = run_scenario(lemniscate_cfg(allocate=False))
        routed = run_scenario(lemniscate_cfg(allocate=True))
        flags = routed.col("sat_flags").astype(int)
        assert not np.any(flags & FLAG_ROTOR_SAT)
        diff = np.abs(direct.cols("x", "y", "z", "phi", "theta", "psi")
                      - routed.cols("x", "y", "z", "phi", "theta", "psi"))
        assert diff.max() <= 1e-9

    def test_full_plant_stays_close_to_canonical(self):
        kw = dict(name="ramp", duration=6.0, dt=0.002, outer_divisor=1,
                  trajectory=HoverRamp(target=np.array([0.5, 0.5, 0.5]),
                                       ramp_time=3.0),
                  force_signals=(Constant(0.2), Constant(-0.1), Constant(0.1)))
        ca = run_scenario(ScenarioConfig(plant="canonical", **kw))
        fu = run_scenario(ScenarioConfig(plant="full", **kw))
        dpos = np.abs(ca.cols("x", "y", "z") - fu.cols("x", "y", "z")).max()
        assert dpos <= 1e-4
        assert np.abs(fu.cols("ex", "ey", "ez")[-1]).max() <= 5e-3


class TestGuards:
    def test_divergence_returns_partial_trace(self):
        cfg = hold_cfg(duration=10.0, observer="none",
                       force_signals=(None, None, Constant(60.0)))
        with pytest.raises(Diverged) as exc:
            run_scenario(cfg)
        tr = exc.value.trace
        assert isinstance(tr, SimTrace)
        assert 0 < len(tr) < 5001
        assert np.all(np.diff(tr.t) > 0.0)
        assert "wall_time" in tr.meta

    def test_uz_floor_flag_raised(self):
        # A large upward push drives the vertical demand below the extraction
        # floor once the estimate converges; the engine clamps and flags.
        cfg = hold_cfg(duration=3.0, force_signals=(None, None, Constant(14.0)))
        tr = run_scenario(cfg)
        flags = tr.col("sat_flags").astype(int)
        assert np.any(flags & FLAG_UZ_FLOOR)
        assert np.all(tr.col("thrust") > 0.0)

    def test_config_rejects_bad_values(self):
        with pytest.raises(ValueError):
            ScenarioConfig(duration=-1.0)
        with pytest.raises(ValueError):
            ScenarioConfig(dt=0.0)
        with pytest.raises(ValueError):
            ScenarioConfig(outer_divisor=0)
        with pytest.raises(ValueError):
            ScenarioConfig(observer="kalman")
        with pytest.raises(ValueError):
            ScenarioConfig(plant="linear")
        with pytest.raises(ValueError):
            ScenarioConfig(substeps=0)
        with pytest.raises(ValueError):
            ScenarioConfig(noise_power=-0.1)
        with pytest.raises(ValueError):
            ScenarioConfig(epsilon1=0.0)


class TestLyapunov:
    def step_trace(self):
        cfg = hold_cfg(duration=2.0,
                       force_signals=(Constant(0.5), Constant(-0.3), None),
                       torque_signals=(Constant(2.0), None, None))
        return run_scenario(cfg)

    def test_column_matches_recomputation(self):
        tr = self.step_trace()
        v = lyapunov_value(tr.cols("s1x", "s1y", "s1z"),
                           tr.cols("s2x", "s2y", "s2z"),
                           tr.cols("d1x_true", "d1y_true", "d1z_true")
                           - tr.cols("d1x_hat", "d1y_hat", "d1z_hat"),
                           tr.cols("d2x_true", "d2y_true", "d2z_true")
                           - tr.cols("d2x_hat", "d2y_hat", "d2z_hat"))
        assert np.allclose(tr.col("lyapunov"), v, rtol=1e-12, atol=1e-15)

    def test_bounded_by_early_peak(self):
        tr = self.step_trace()
        v = tr.col("lyapunov")
        first_second = v[tr.t <= 1.0]
        assert np.all(v <= 10.0 * first_second.max() + 1e-15)

    def test_step_disturbance_energy_decays(self):
        tr = self.step_trace()
        v = tr.col("lyapunov")
        assert v[-1] <= 1e-8 * v.max()

    def test_quadratic_scaling(self):
        one = lyapunov_value(np.ones(3), np.zeros(3), np.zeros(3), np.zeros(3))
        two = lyapunov_value(2.0 * np.ones(3), np.zeros(3), np.zeros(3), np.zeros(3))
        assert one == pytest.approx(1.5)
        assert two == pytest.approx(4.0 * one)


class TestIntegratorOrder:
    def test_rk4_observed_order_on_linear_system(self):
        # Damped rotation with a closed-form solution; Richardson estimate
        # of the global order from successive halvings.
        a, w = 0.2, 1.0

        def f(t, y):
            return np.array([-a * y[0] + w * y[1], -w * y[0] - a * y[1]])

        def exact(t):
            return math.exp(-a * t) * np.array([math.cos(w * t), -math.sin(w * t)])

        def final_error(n):
            h = 1.0 / n
            y = np.array([1.0, 0.0])
            for i in range(n):
                y = rk4_step(f, i * h, y, h)
            return np.linalg.norm(y - exact(1.0))

        e1, e2 = final_error(16), final_error(32)
        order = math.log2(e1 / e2)
        assert order >= 3.8
