"""Transient EMI pulses, burst trains and a CW comparison tone.

Physical pulse constants are nanoseconds, far below what a 15.36 MS/s
baseband can resolve. ``time_scale`` stretches every time constant by the
same factor (and divides the carrier frequency by it) so the band-limited
pulse can be simulated; the physical values stay on the params object.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .dsp import IqBuffer, seeded_rng

TAU_RISE_RANGE_S = (0.1e-9, 3e-9)
TAU_HOLD_RANGE_S = (1e-9, 50e-9)
JITTER_STREAM = 0x7A11


class PulseMode(str, enum.Enum):
    LITERAL = "literal"
    CANONICAL = "canonical"


@dataclass(frozen=True)
class TransientPulseParams:
    """Double-exponential transient.

    ``carrier_freq_hz = 0`` in canonical mode means an on-tune carrier: the
    envelope is emitted unmodulated (its complex-baseband equivalent).
    """

    a0: float = 1.0
    tau_rise_s: float = 2e-9
    tau_hold_s: float = 30e-9
    carrier_freq_hz: float = 0.0
    mode: PulseMode = PulseMode.CANONICAL
    time_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mode", PulseMode(self.mode))
        if not 0 < self.tau_rise_s < self.tau_hold_s:
            raise ValueError(
                f"need 0 < tau_rise < tau_hold, got {self.tau_rise_s} and {self.tau_hold_s}"
            )
        lo, hi = TAU_RISE_RANGE_S
        if not lo <= self.tau_rise_s <= hi:
            raise ValueError(f"tau_rise {self.tau_rise_s} s outside [{lo}, {hi}] s")
        lo, hi = TAU_HOLD_RANGE_S
        if not lo <= self.tau_hold_s <= hi:
            raise ValueError(f"tau_hold {self.tau_hold_s} s outside [{lo}, {hi}] s")
        if not self.time_scale > 0:
            raise ValueError("time_scale must be > 0")
        if self.carrier_freq_hz < 0:
            raise ValueError("carrier_freq_hz must be >= 0")

    @property
    def sim_tau_rise_s(self) -> float:
        return self.tau_rise_s * self.time_scale

    @property
    def sim_tau_hold_s(self) -> float:
        return self.tau_hold_s * self.time_scale

    @property
    def sim_carrier_freq_hz(self) -> float:
        return self.carrier_freq_hz / self.time_scale

    def envelope_peak_time_s(self) -> float:
        """Closed-form argmax of the difference-of-exponentials envelope (simulation time)."""
        tr, th = self.sim_tau_rise_s, self.sim_tau_hold_s
        return tr * th / (th - tr) * np.log(th / tr)


def pulse_envelope(params: TransientPulseParams, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    env = params.a0 * (np.exp(-t / params.sim_tau_hold_s) - np.exp(-t / params.sim_tau_rise_s))
    return np.where(t >= 0, env, 0.0)


def _evaluate(params: TransientPulseParams, t: np.ndarray) -> np.ndarray:
    """Pulse value at times ``t`` after onset; zero before it."""
    fc = params.sim_carrier_freq_hz
    causal = t >= 0
    tc = np.where(causal, t, 0.0)
    if params.mode is PulseMode.LITERAL:
        step = 1.0
        value = (
            params.a0
            + np.exp(-tc / params.sim_tau_rise_s)
            + np.exp(-tc / params.sim_tau_hold_s)
            + np.sin(2 * np.pi * fc * tc)
            + step
        )
    else:
        carrier = np.sin(2 * np.pi * fc * tc) if fc > 0 else 1.0
        value = params.a0 * (np.exp(-tc / params.sim_tau_hold_s) - np.exp(-tc / params.sim_tau_rise_s)) * carrier
    return np.where(causal, value, 0.0)


def _check_carrier(params: TransientPulseParams, sample_rate_hz: float):
    if not sample_rate_hz > 0:
        raise ValueError("sample_rate_hz must be > 0")
    if params.sim_carrier_freq_hz >= sample_rate_hz / 2:
        raise ValueError(
            f"carrier {params.sim_carrier_freq_hz} Hz is not representable at "
            f"{sample_rate_hz} S/s (Nyquist {sample_rate_hz / 2} Hz)"
        )


def transient_pulse(params: TransientPulseParams, sample_rate_hz: float, duration_s: float) -> IqBuffer:
    """One pulse with onset at t = 0, real-valued (imaginary part zero)."""
    _check_carrier(params, sample_rate_hz)
    if duration_s < 10 * params.sim_tau_hold_s:
        raise ValueError(
            f"duration {duration_s} s shorter than 10 hold constants ({10 * params.sim_tau_hold_s} s)"
        )
    t = np.arange(int(round(duration_s * sample_rate_hz))) / sample_rate_hz
    return IqBuffer(_evaluate(params, t).astype(np.complex128), sample_rate_hz)


@dataclass(frozen=True)
class BurstSchedule:
    pulse_period_s: float = 1.5e-3
    jitter_fraction: float = 0.0
    duration_s: float = 10e-3
    seed: int = 0

    def __post_init__(self):
        if not self.pulse_period_s > 0:
            raise ValueError("pulse_period_s must be > 0")
        if not 0 <= self.jitter_fraction < 1:
            raise ValueError(f"jitter_fraction must be in [0, 1), got {self.jitter_fraction}")
        if not self.duration_s > 0:
            raise ValueError("duration_s must be > 0")


def burst_onsets(sched: BurstSchedule) -> np.ndarray:
    """Arrival times m * period * (1 + jitter * u_m), u_m ~ U[-1, 1], inside the duration."""
    count = int(np.ceil(sched.duration_s / sched.pulse_period_s - 1e-12))
    m = np.arange(count)
    u = seeded_rng(sched.seed, JITTER_STREAM).uniform(-1.0, 1.0, size=count)
    onsets = m * sched.pulse_period_s * (1.0 + sched.jitter_fraction * u)
    return onsets[(onsets >= 0) & (onsets < sched.duration_s)]


def burst_train(params: TransientPulseParams, sched: BurstSchedule, sample_rate_hz: float) -> IqBuffer:
    _check_carrier(params, sample_rate_hz)
    if sched.pulse_period_s < 5 * params.sim_tau_hold_s:
        warnings.warn(
            f"pulse period {sched.pulse_period_s} s is under 5 hold constants "
            f"({params.sim_tau_hold_s} s); consecutive pulses overlap",
            stacklevel=2,
        )
    n = int(round(sched.duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    out = np.zeros(n)
    # canonical pulses are below e**-60 of their peak after 60 hold constants
    span = n if params.mode is PulseMode.LITERAL else int(np.ceil(60 * params.sim_tau_hold_s * sample_rate_hz)) + 1
    for onset in burst_onsets(sched):
        first = int(np.ceil(onset * sample_rate_hz - 1e-9))
        stop = min(n, first + span)
        out[first:stop] += _evaluate(params, t[first:stop] - onset)
    return IqBuffer(out.astype(np.complex128), sample_rate_hz)


def cw_tone(freq_hz: float, amplitude: float, sample_rate_hz: float, duration_s: float) -> IqBuffer:
    if abs(freq_hz) >= sample_rate_hz / 2:
        raise ValueError(f"tone at {freq_hz} Hz aliases at {sample_rate_hz} S/s")
    n = np.arange(int(round(duration_s * sample_rate_hz)))
    return IqBuffer(amplitude * np.exp(2j * np.pi * freq_hz * n / sample_rate_hz), sample_rate_hz)
