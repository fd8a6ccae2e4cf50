"""Received-signal composition: flat gain, oscillator offset, interferer, AWGN."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsp import DbGain, IqBuffer, apply_gain, complex_gaussian, frequency_shift, mean_power, seeded_rng
from .kpi import PowerTriple

NOISE_STREAM = 0xA3C9


def _disabled_snr(snr_db) -> bool:
    return snr_db is None or snr_db == math.inf


@dataclass(frozen=True)
class ChannelConfig:
    """``snr_db=None`` disables noise; ``interferer_gain=None`` disables the interferer."""

    snr_db: float | None = None
    cfo_hz: float = 0.0
    flat_gain: complex = 1.0 + 0.0j
    interferer_offset_hz: float = 0.0
    interferer_gain: DbGain | None = None
    seed: int = 0

    def __post_init__(self):
        if self.snr_db is not None and (self.snr_db == math.inf):
            object.__setattr__(self, "snr_db", None)
        if self.snr_db is not None and not math.isfinite(self.snr_db):
            raise ValueError(f"snr_db must be finite or None, got {self.snr_db}")
        gain = self.interferer_gain
        if isinstance(gain, (int, float)):
            gain = None if gain == -math.inf else DbGain(float(gain))
            object.__setattr__(self, "interferer_gain", gain)
        if abs(complex(self.flat_gain)) == 0:
            raise ValueError("flat_gain must be nonzero")
        object.__setattr__(self, "flat_gain", complex(self.flat_gain))


def add_awgn(buf: IqBuffer, snr_db: float | None, seed: int) -> tuple[IqBuffer, float]:
    """Add circular Gaussian noise at ``mean_power(buf) / 10**(snr_db/10)``.

    Returns the noisy buffer and the realized noise power.
    """
    p_sig = mean_power(buf)
    if _disabled_snr(snr_db):
        return buf, 0.0
    noise = _noise(len(buf), p_sig / 10.0 ** (snr_db / 10.0), seed)
    return buf.replace(buf.samples + noise), mean_power(noise)


def _noise(n: int, sigma2: float, seed: int) -> np.ndarray:
    return complex_gaussian(seeded_rng(seed, NOISE_STREAM), n) * np.sqrt(sigma2)


def apply_cfo(buf: IqBuffer, cfo_hz: float) -> IqBuffer:
    """Oscillator offset: rotate like a frequency shift but keep the nominal center."""
    if cfo_hz == 0:
        return buf
    return frequency_shift(buf, cfo_hz).replace(center_freq_hz=buf.center_freq_hz)


def _fit_length(samples: np.ndarray, n: int) -> np.ndarray:
    if samples.size == 0:
        raise ValueError("interferer buffer is empty")
    return samples[:n] if samples.size >= n else np.resize(samples, n)


def combine(desired: IqBuffer, interferer: IqBuffer | None, cfg: ChannelConfig) -> tuple[IqBuffer, PowerTriple]:
    """received = g * cfo(desired) + shift(gain(interferer)) + AWGN, with realized powers."""
    signal = apply_cfo(desired, cfg.cfo_hz)
    if cfg.flat_gain != 1:
        signal = signal.replace(signal.samples * cfg.flat_gain)
    p_signal = mean_power(signal)
    total = signal.samples

    p_interference = 0.0
    if interferer is not None and cfg.interferer_gain is not None:
        if interferer.sample_rate_hz != desired.sample_rate_hz:
            raise ValueError(
                f"sample-rate mismatch: desired {desired.sample_rate_hz} vs interferer {interferer.sample_rate_hz}"
            )
        jam = interferer.replace(_fit_length(interferer.samples, len(desired)), center_freq_hz=0.0)
        jam = frequency_shift(apply_gain(jam, cfg.interferer_gain), cfg.interferer_offset_hz)
        p_interference = mean_power(jam)
        total = total + jam.samples

    received = signal.replace(total)
    p_noise = 0.0
    if not _disabled_snr(cfg.snr_db):
        noise = _noise(len(received), p_signal / 10.0 ** (cfg.snr_db / 10.0), cfg.seed)
        received = received.replace(received.samples + noise)
        p_noise = mean_power(noise)
    return received, PowerTriple(p_signal, p_interference, p_noise)
