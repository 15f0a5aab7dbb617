"""Every shipped scenario file loads, runs to completion, and stays bounded."""

from pathlib import Path

import numpy as np
import pytest

from hgdosim.config import load_scenario
from hgdosim.sim import run_scenario

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
SCENARIOS = sorted(SCENARIO_DIR.glob("*.json"))


def test_scenario_files_present():
    names = {p.stem for p in SCENARIOS}
    assert {"lemniscate_composite", "bound_check", "dryden_lemniscate",
            "noise_study", "hover_step", "ground_effect"} <= names


@pytest.fixture(scope="module")
def traces():
    out = {}
    for path in SCENARIOS:
        cfg = load_scenario(path)
        out[path.stem] = run_scenario(cfg)
    return out


def test_all_runs_complete_finite(traces):
    for name, tr in traces.items():
        assert np.isfinite(tr.data).all(), name
        assert len(tr) == int(round(tr.meta["duration"] / tr.meta["dt"])) + 1, name


def test_lyapunov_below_ten_times_early_peak(traces):
    for name, tr in traces.items():
        v = tr.col("lyapunov")
        peak = v[tr.t <= 1.0].max()
        assert np.all(v <= 10.0 * peak + 1e-15), name


def test_deterministic_scenarios_track_tightly(traces):
    for name in ("bound_check", "ground_effect", "lemniscate_composite"):
        e1 = np.abs(traces[name].cols("ex", "ey", "ez"))
        assert e1.max() < 5e-3, name


def test_observer_pins_down_ground_effect(traces):
    tr = traces["ground_effect"]
    tail = tr.t >= 4.0
    err = (tr.col("d1z_true") - tr.col("d1z_hat"))[tail]
    assert np.abs(err).max() < 1e-3
