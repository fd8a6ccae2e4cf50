"""Complex-baseband signal container and the numeric primitives built on it.

Conventions used throughout the package:

* dB values are power dB (``10*log10``); amplitudes scale by ``10**(dB/20)``.
* The DFT is unitary (``1/sqrt(N)`` in both directions), so Parseval holds
  without bookkeeping factors.
* Random streams come from numpy's ``PCG64`` bit generator, whose output is
  stable across numpy releases for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

PSD_FLOOR_DB = -200.0


@dataclass(frozen=True)
class IqBuffer:
    """Immutable run of complex baseband samples plus capture metadata."""

    samples: np.ndarray
    sample_rate_hz: float
    center_freq_hz: float = 0.0

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.complex128).ravel()
        if not np.all(np.isfinite(x)):
            raise ValueError("IqBuffer samples must be finite")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if self.center_freq_hz < 0:
            raise ValueError(f"center_freq_hz must be >= 0, got {self.center_freq_hz}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "center_freq_hz", float(self.center_freq_hz))

    def __len__(self):
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def replace(self, samples=None, **meta) -> "IqBuffer":
        """Copy with new samples and/or metadata."""
        return IqBuffer(
            self.samples if samples is None else samples,
            meta.get("sample_rate_hz", self.sample_rate_hz),
            meta.get("center_freq_hz", self.center_freq_hz),
        )


@dataclass(frozen=True)
class DbGain:
    """A power gain in dB."""

    value_db: float

    def __post_init__(self):
        if not np.isfinite(self.value_db):
            raise ValueError("DbGain must be finite; use None to disable a path")

    @property
    def power_factor(self) -> float:
        return 10.0 ** (self.value_db / 10.0)

    @property
    def amplitude_factor(self) -> float:
        return 10.0 ** (self.value_db / 20.0)


def db_to_linear(value_db):
    return 10.0 ** (np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value, floor_db: float | None = None):
    value = np.asarray(value, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(value)
    if floor_db is not None:
        out = np.maximum(out, floor_db)
    return out


def frequency_shift(buf: IqBuffer, offset_hz: float) -> IqBuffer:
    """Mix ``buf`` by ``offset_hz`` and move its nominal center by the same amount."""
    nyquist = buf.sample_rate_hz / 2
    if abs(offset_hz) >= nyquist:
        raise ValueError(
            f"offset {offset_hz} Hz outside the representable range +/-{nyquist} Hz"
        )
    if offset_hz == 0:
        return buf
    n = np.arange(len(buf))
    rot = np.exp(2j * np.pi * offset_hz * n / buf.sample_rate_hz)
    return IqBuffer(buf.samples * rot, buf.sample_rate_hz, max(buf.center_freq_hz + offset_hz, 0.0))


def apply_gain(buf: IqBuffer, gain: DbGain | float) -> IqBuffer:
    if not isinstance(gain, DbGain):
        gain = DbGain(float(gain))
    if gain.value_db == 0:
        return buf
    return buf.replace(buf.samples * gain.amplitude_factor)


def mean_power(buf: IqBuffer | np.ndarray) -> float:
    x = buf.samples if isinstance(buf, IqBuffer) else np.asarray(buf)
    if x.size == 0:
        raise ValueError("mean power of an empty buffer is undefined")
    return float(np.mean(x.real**2 + x.imag**2))


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def dft(buf: IqBuffer, inverse: bool = False) -> IqBuffer:
    """Unitary DFT of the whole buffer; lengths must be powers of two."""
    n = len(buf)
    if not is_power_of_two(n):
        raise ValueError(f"unsupported transform size {n}; supported sizes are powers of two")
    op = np.fft.ifft if inverse else np.fft.fft
    return buf.replace(op(buf.samples, norm="ortho"))


@dataclass(frozen=True)
class PsdTrace:
    """Two-sided PSD: frequency offsets from the buffer center and power density in dB/Hz."""

    freq_hz: np.ndarray
    power_db: np.ndarray
    center_freq_hz: float = 0.0
    resolution_hz: float = field(default=0.0)

    def integrated_power(self) -> float:
        lin = 10.0 ** (self.power_db / 10.0)
        return float(np.sum(lin) * self.resolution_hz)

    def peak_freq_hz(self) -> float:
        return float(self.freq_hz[np.argmax(self.power_db)])


def welch_psd(buf: IqBuffer, segment_len: int = 1024, overlap: float = 0.5) -> PsdTrace:
    """Hann-windowed averaged periodogram, density-scaled so it integrates to mean power."""
    if segment_len > len(buf):
        raise ValueError(f"segment_len {segment_len} exceeds buffer length {len(buf)}")
    if segment_len < 1:
        raise ValueError("segment_len must be >= 1")
    if not 0 <= overlap < 1:
        raise ValueError(f"overlap must be in [0, 1), got {overlap}")
    freqs, pxx = sps.welch(
        buf.samples,
        fs=buf.sample_rate_hz,
        window="hann",
        nperseg=segment_len,
        noverlap=int(round(overlap * segment_len)),
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    order = np.argsort(freqs)
    return PsdTrace(
        freq_hz=freqs[order],
        power_db=linear_to_db(pxx[order], floor_db=PSD_FLOOR_DB),
        center_freq_hz=buf.center_freq_hz,
        resolution_hz=buf.sample_rate_hz / segment_len,
    )


def seeded_rng(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; extra integers select independent sub-streams."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(s) & 0xFFFFFFFFFFFFFFFF for s in stream)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def complex_gaussian(rng: np.random.Generator, n: int) -> np.ndarray:
    """Standard circular complex normal draws (per-component variance 1/2)."""
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * np.sqrt(0.5)


def random_bits(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, 2, size=n, dtype=np.uint8)
