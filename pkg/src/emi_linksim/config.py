"""TOML run configuration.

Sections ``[link]``, ``[channel]``, ``[pulse]``, ``[schedule]`` and ``[sweep]``.
Keys use the same names and units as the command-line flags, so a flag
overrides exactly one key::

    [link]
    preset = "lte-a-like"

    [pulse]
    tau_hold_ns = 30
    time_scale = 10

    [sweep]
    gains_db = [12, 15, 18]
    seeds = 20
"""

from __future__ import annotations

import copy
from dataclasses import replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import harness
from .channel import ChannelConfig
from .dsp import DbGain
from .interference import BurstSchedule, PulseMode, TransientPulseParams

DEFAULTS = {
    "link": {
        "preset": "nr-like",
        "power_scale": 0.8,
        "center_hz": harness.LINK_CENTER_HZ,
    },
    "channel": {
        "snr_db": None,
        "snr_reference": "subcarrier",
        "cfo_hz": 0.0,
        "offset_hz": 0.0,
        "gain_db": None,
        "jammer": "transient",
        "jammer_reference_db": harness.DEFAULT_JAMMER_REFERENCE_DB,
        "seed": 0,
    },
    "pulse": {
        "a0": 1.0,
        "tau_rise_ns": 2.0,
        "tau_hold_ns": 30.0,
        "carrier_hz": 0.0,
        "mode": PulseMode.CANONICAL.value,
        "time_scale": harness.DEFAULT_TIME_SCALE,
    },
    "schedule": {
        "pulse_period_us": harness.DEFAULT_PULSE_PERIOD_S * 1e6,
        "jitter": harness.DEFAULT_JITTER,
        "seed": 0,
    },
    "sweep": {
        "offsets_hz": list(harness.DEFAULT_OFFSETS_HZ),
        "gains_db": list(harness.DEFAULT_GAINS_DB),
        "seeds": 1,
        "seed": 0,
        "seed_stride": 1,
        "parallelism": 1,
        "snr_db": harness.DEFAULT_SWEEP_SNR_DB,
        "cfo_hz": harness.DEFAULT_SWEEP_CFO_HZ,
    },
}


class ConfigError(ValueError):
    pass


def defaults() -> dict:
    return copy.deepcopy(DEFAULTS)


def merge(base: dict, overrides: dict) -> dict:
    """Section-wise merge; unknown sections or keys are rejected."""
    out = copy.deepcopy(base)
    for section, values in overrides.items():
        if section not in out:
            raise ConfigError(f"unknown config section [{section}]; expected one of {sorted(out)}")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in out[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]; expected one of {sorted(out[section])}")
            out[section][key] = value
    return out


def load(path=None) -> dict:
    """Defaults, overlaid with the TOML file at ``path`` when given."""
    if path is None:
        return defaults()
    with Path(path).open("rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return merge(DEFAULTS, data)


def pulse_params(cfg: dict) -> TransientPulseParams:
    p = cfg["pulse"]
    return TransientPulseParams(
        a0=float(p["a0"]),
        tau_rise_s=float(p["tau_rise_ns"]) * 1e-9,
        tau_hold_s=float(p["tau_hold_ns"]) * 1e-9,
        carrier_freq_hz=float(p["carrier_hz"]),
        mode=p["mode"],
        time_scale=float(p["time_scale"]),
    )


def schedule(cfg: dict, duration_s: float = 10e-3) -> BurstSchedule:
    s = cfg["schedule"]
    return BurstSchedule(
        pulse_period_s=float(s["pulse_period_us"]) * 1e-6,
        jitter_fraction=float(s["jitter"]),
        duration_s=duration_s,
        seed=int(s["seed"]),
    )


def _snr(value):
    if value is None or (isinstance(value, str) and value.lower() in ("inf", "none", "off")):
        return None
    return float(value)


def trial_spec(cfg: dict, seed: int = 0) -> harness.TrialSpec:
    c = cfg["channel"]
    gain = c["gain_db"]
    channel = ChannelConfig(
        snr_db=_snr(c["snr_db"]),
        cfo_hz=float(c["cfo_hz"]),
        interferer_offset_hz=float(c["offset_hz"]),
        interferer_gain=None if gain is None else DbGain(float(gain)),
        seed=int(c["seed"]),
    )
    return harness.TrialSpec(
        link=cfg["link"]["preset"],
        channel=channel,
        pulse=pulse_params(cfg),
        schedule=schedule(cfg),
        jammer_kind=c["jammer"] if gain is not None else "none",
        seed=seed,
        snr_reference=c["snr_reference"],
        jammer_reference_db=float(c["jammer_reference_db"]),
        power_scale=float(cfg["link"]["power_scale"]),
    )


def sweep_spec(cfg: dict) -> harness.SweepSpec:
    sw = cfg["sweep"]
    base = trial_spec(cfg, seed=int(sw["seed"]))
    channel = replace(base.channel, snr_db=_snr(sw["snr_db"]), cfo_hz=float(sw["cfo_hz"]))
    base = replace(base, channel=channel, jammer_kind=cfg["channel"]["jammer"])
    return harness.SweepSpec(
        base=base,
        offsets_hz=tuple(sw["offsets_hz"]),
        gains_db=tuple(sw["gains_db"]),
        seeds_per_point=int(sw["seeds"]),
        seed_stride=int(sw["seed_stride"]),
    )
