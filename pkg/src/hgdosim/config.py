"""Scenario files: JSON documents validated against the shipped schema.

A document must carry `"schema": "hgdosim-scenario-1"` and may only use known
keys; anything else is rejected up front with the offending JSON path, so a
typo in a gain name fails loudly instead of silently running defaults.
"""

from __future__ import annotations

import dataclasses
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from jsonschema.exceptions import best_match

from .control import SmcGains
from .disturbances import (
    CompositeSinusoid,
    Constant,
    DrydenGust,
    GroundEffect,
    Scaled,
    Sum,
    WhiteNoise,
)
from .quad import MICRO_QUAD
from .sim import ScenarioConfig
from .trajectories import HoverRamp, Lemniscate

SCENARIO_SCHEMA_ID = "hgdosim-scenario-1"
METRICS_SCHEMA_ID = "hgdosim-metrics-1"

_AXIS = {"x": 0, "y": 1, "z": 2}
_WIND_AXIS = ("u", "v", "w")


class ConfigError(ValueError):
    """Configuration rejected; the message carries the JSON path."""


@lru_cache(maxsize=None)
def _schema(name: str) -> dict:
    text = resources.files("hgdosim").joinpath(f"schemas/{name}").read_text()
    return json.loads(text)


def scenario_schema() -> dict:
    return _schema("scenario.schema.json")


def metrics_schema() -> dict:
    return _schema("metrics.schema.json")


def _validate(doc, schema, label: str):
    validator = jsonschema.Draft202012Validator(schema)
    err = best_match(validator.iter_errors(doc))
    if err is not None:
        raise ConfigError(f"{label} at {err.json_path}: {err.message}")


def validate_scenario(doc: dict) -> None:
    _validate(doc, scenario_schema(), "scenario config")


def validate_metrics(doc: dict) -> None:
    _validate(doc, metrics_schema(), "metrics report")


def _build_trajectory(doc: dict):
    if doc["kind"] == "lemniscate":
        return Lemniscate(amplitude=float(doc.get("amplitude", 0.5)),
                          period=float(doc.get("period", 40.0)),
                          height=float(doc.get("height", 0.5)),
                          yaw_angle=float(doc.get("yaw", 0.0)))
    return HoverRamp(target=np.asarray(doc.get("target", [0.0, 0.0, 0.5]), dtype=float),
                     start=np.asarray(doc.get("start", [0.0, 0.0, 0.0]), dtype=float),
                     ramp_time=float(doc.get("ramp_time", 0.0)),
                     yaw_angle=float(doc.get("yaw", 0.0)))


def _build_signal(entry: dict, dt: float, axis: int):
    kind = entry["kind"]
    if kind == "constant":
        sig = Constant(float(entry["value"]))
    elif kind == "composite":
        sig = CompositeSinusoid()
        if "scale" in entry:
            sig = Scaled(sig, float(entry["scale"]))
    elif kind == "white_noise":
        sig = WhiteNoise(float(entry["power"]))
    elif kind == "dryden":
        sig = DrydenGust(entry.get("wind_axis", _WIND_AXIS[axis]),
                         wind_speed=float(entry.get("wind_speed", 1.11)),
                         altitude=float(entry.get("altitude", 0.5)),
                         airspeed=float(entry.get("airspeed", 2.0)),
                         accel_gain=float(entry.get("accel_gain", 0.5)),
                         dt=dt)
    elif kind == "ground_effect":
        sig = GroundEffect(strength=float(entry.get("strength", 0.3)),
                           z_ref=float(entry.get("z_ref", 0.3)))
    else:  # unreachable behind the schema
        raise ConfigError(f"unknown disturbance kind {kind!r}")
    if "seed" in entry and sig.stochastic:
        sig.seed = int(entry["seed"])
    return sig


def _combine(slot: list, where: str):
    if not slot:
        return None
    if len(slot) == 1:
        return slot[0]
    if any(s.stochastic for s in slot):
        raise ConfigError(
            f"at most one stochastic signal per channel; {where} has {len(slot)}")
    return Sum(slot)


def _build_gains(doc: dict) -> SmcGains:
    kw = {}
    for src, dst in (("lambda1", "lam1"), ("lambda2", "lam2"), ("k1", "k1"),
                     ("k2", "k2"), ("l1", "l1"), ("l2", "l2")):
        if src in doc:
            kw[dst] = np.asarray(doc[src], dtype=float)
    for name in ("mu", "uz_min"):
        if name in doc:
            kw[name] = float(doc[name])
    if "u1_max" in doc:
        kw["u1_max"] = None if doc["u1_max"] is None else float(doc["u1_max"])
    if "tau_max" in doc:
        kw["tau_max"] = (None if doc["tau_max"] is None
                         else np.asarray(doc["tau_max"], dtype=float))
    return SmcGains(**kw)


def build_scenario(doc: dict) -> ScenarioConfig:
    """Turn a validated document into a runnable ScenarioConfig."""
    dt = float(doc.get("dt", 0.002))
    slots = {("force", i): [] for i in range(3)}
    slots.update({("torque", i): [] for i in range(3)})
    for entry in doc.get("disturbances", []):
        axis = _AXIS[entry["axis"]]
        slots[(entry["domain"], axis)].append(_build_signal(entry, dt, axis))

    force = tuple(_combine(slots[("force", i)], f"force/{a}")
                  for i, a in enumerate("xyz"))
    torque = tuple(_combine(slots[("torque", i)], f"torque/{a}")
                   for i, a in enumerate("xyz"))

    noise_power = float(doc.get("noise_power", 0.0))
    stochastic = noise_power > 0.0 or any(
        s is not None and s.stochastic for s in force + torque)
    if stochastic and "seed" not in doc:
        raise ConfigError(
            "seed is required when noise or a stochastic disturbance is configured")

    initial = doc.get("initial", {})
    kw = dict(
        name=doc["name"],
        duration=float(doc.get("duration", 10.0)),
        dt=dt,
        outer_divisor=int(doc.get("outer_divisor", 5)),
        seed=int(doc.get("seed", 0)),
        epsilon1=float(doc.get("epsilon1", 0.01)),
        epsilon2=float(doc.get("epsilon2", 0.01)),
        observer=doc.get("observer", "hgdo"),
        trajectory=_build_trajectory(doc.get("trajectory", {"kind": "hover"})),
        force_signals=force,
        torque_signals=torque,
        noise_power=noise_power,
        allocate=bool(doc.get("allocate", True)),
        plant=doc.get("plant", "canonical"),
        substeps=None if doc.get("substeps") is None else int(doc["substeps"]),
    )
    for src, dst in (("position", "pos0"), ("velocity", "vel0"),
                     ("attitude", "att0"), ("rates", "rate0")):
        if src in initial:
            kw[dst] = np.asarray(initial[src], dtype=float)
    if "vehicle" in doc:
        kw["vehicle"] = dataclasses.replace(MICRO_QUAD, **doc["vehicle"])
    if "gains" in doc:
        kw["gains"] = _build_gains(doc["gains"])
    try:
        return ScenarioConfig(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_scenario(doc: dict) -> ScenarioConfig:
    validate_scenario(doc)
    return build_scenario(doc)


def load_scenario(path) -> ScenarioConfig:
    """Read, validate and build a scenario file; all failures raise ConfigError."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    try:
        return parse_scenario(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
