"""CP-OFDM link: QAM mapping, resource grid, modulation, sync, channel estimation."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .dsp import IqBuffer, is_power_of_two, random_bits, seeded_rng

PILOT_STREAM = 0x9107


class Modulation(str, enum.Enum):
    QPSK = "QPSK"
    QAM16 = "QAM16"
    QAM64 = "QAM64"

    @property
    def bits_per_symbol(self) -> int:
        return {"QPSK": 2, "QAM16": 4, "QAM64": 6}[self.value]

    @property
    def order(self) -> int:
        return 2**self.bits_per_symbol


class Role(enum.IntEnum):
    DATA = 0
    PILOT = 1
    NULL = 2


@dataclass(frozen=True)
class LinkConfig:
    label: str
    fft_size: int
    num_subcarriers: int
    subcarrier_spacing_hz: float
    cp_len: int
    num_symbols_per_frame: int
    modulation: Modulation = Modulation.QAM64
    pilot_spacing_freq: int = 6
    pilot_spacing_time: int = 4
    sample_rate_hz: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "modulation", Modulation(self.modulation))
        if self.sample_rate_hz is None:
            object.__setattr__(self, "sample_rate_hz", self.fft_size * self.subcarrier_spacing_hz)
        if not is_power_of_two(self.fft_size):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if abs(self.sample_rate_hz - self.fft_size * self.subcarrier_spacing_hz) > 1e-6 * self.sample_rate_hz:
            raise ValueError(
                f"sample_rate_hz {self.sample_rate_hz} != fft_size * subcarrier_spacing_hz "
                f"({self.fft_size * self.subcarrier_spacing_hz})"
            )
        if self.num_subcarriers % 2 or not 0 < self.num_subcarriers < self.fft_size:
            raise ValueError(
                f"num_subcarriers must be even and in (0, fft_size), got {self.num_subcarriers}"
            )
        if not 0 <= self.cp_len < self.fft_size:
            raise ValueError(f"cp_len must be in [0, fft_size), got {self.cp_len}")
        if self.num_symbols_per_frame < 1:
            raise ValueError("num_symbols_per_frame must be >= 1")
        if self.pilot_spacing_freq < 1 or self.pilot_spacing_time < 1:
            raise ValueError("pilot spacings must be >= 1")

    @property
    def symbol_len(self) -> int:
        return self.fft_size + self.cp_len

    @property
    def frame_len(self) -> int:
        return self.num_symbols_per_frame * self.symbol_len

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_subcarriers, self.num_symbols_per_frame)

    @property
    def occupied_bandwidth_hz(self) -> float:
        return self.num_subcarriers * self.subcarrier_spacing_hz

    def active_bins(self) -> np.ndarray:
        """Signed DFT bin of each active subcarrier, DC skipped."""
        half = self.num_subcarriers // 2
        return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)])

    def subcarrier_freqs_hz(self) -> np.ndarray:
        return self.active_bins() * self.subcarrier_spacing_hz

    def roles(self) -> np.ndarray:
        return _pilot_roles(self.shape, self.pilot_spacing_freq, self.pilot_spacing_time).copy()

    def num_pilots(self) -> int:
        return int(np.count_nonzero(self.roles() == Role.PILOT))

    def num_data_cells(self) -> int:
        return self.num_subcarriers * self.num_symbols_per_frame - self.num_pilots()

    def payload_bits(self) -> int:
        return self.num_data_cells() * self.modulation.bits_per_symbol

    def with_(self, **changes) -> "LinkConfig":
        if "fft_size" in changes or "subcarrier_spacing_hz" in changes:
            changes.setdefault("sample_rate_hz", None)
        return replace(self, **changes)


@lru_cache(maxsize=16)
def _pilot_roles(shape, dk, dl):
    roles = np.full(shape, Role.DATA, dtype=np.int8)
    roles[::dk, ::dl] = Role.PILOT
    roles.flags.writeable = False
    return roles


# Engineering reconstructions of the two links, both at 15.36 MS/s. They match
# bandwidth and numerology, not the standards' frame structure.
PRESETS = {
    "lte-a-like": LinkConfig(
        label="lte-a-like",
        fft_size=1024,
        num_subcarriers=600,
        subcarrier_spacing_hz=15e3,
        cp_len=72,
        num_symbols_per_frame=140,
    ),
    "nr-like": LinkConfig(
        label="nr-like",
        fft_size=512,
        num_subcarriers=288,
        subcarrier_spacing_hz=30e3,
        cp_len=36,
        num_symbols_per_frame=280,
    ),
}


def get_preset(name: str) -> LinkConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown link preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class ResourceGrid:
    """Subcarrier x OFDM-symbol cells; ``roles`` labels each cell data/pilot/null."""

    symbols: np.ndarray
    roles: np.ndarray
    config: LinkConfig

    def __post_init__(self):
        symbols = np.asarray(self.symbols, dtype=np.complex128)
        roles = np.asarray(self.roles, dtype=np.int8)
        if symbols.shape != self.config.shape or roles.shape != self.config.shape:
            raise ValueError(
                f"grid shape {symbols.shape} / roles {roles.shape} != config shape {self.config.shape}"
            )
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "roles", roles)

    @property
    def data_mask(self) -> np.ndarray:
        return self.roles == Role.DATA

    @property
    def pilot_mask(self) -> np.ndarray:
        return self.roles == Role.PILOT

    def data_symbols(self) -> np.ndarray:
        """Data cells in (symbol, subcarrier) raster order."""
        return self.symbols.T[self.data_mask.T]

    def with_symbols(self, symbols) -> "ResourceGrid":
        return ResourceGrid(symbols, self.roles, self.config)


# ---------------------------------------------------------------------------
# QAM
# ---------------------------------------------------------------------------


def _gray_to_binary(v: np.ndarray) -> np.ndarray:
    out = v.copy()
    shift = v >> 1
    while np.any(shift):
        out ^= shift
        shift >>= 1
    return out


@lru_cache(maxsize=None)
def _axis_levels(bits_per_axis: int) -> np.ndarray:
    """PAM level for each per-axis bit pattern value (MSB first); pattern 0 -> most positive."""
    m = 2**bits_per_axis
    position = _gray_to_binary(np.arange(m))
    levels = (m - 1) - 2.0 * position
    levels.flags.writeable = False
    return levels


def _scale(modulation: Modulation) -> float:
    return float(np.sqrt(2.0 * (modulation.order - 1) / 3.0))


def constellation(modulation: Modulation | str) -> np.ndarray:
    """All points, indexed by the integer value of their bit pattern."""
    modulation = Modulation(modulation)
    half = modulation.bits_per_symbol // 2
    levels = _axis_levels(half)
    idx = np.arange(modulation.order)
    return (levels[idx >> half] + 1j * levels[idx & ((1 << half) - 1)]) / _scale(modulation)


def _pack(bits: np.ndarray, width: int) -> np.ndarray:
    weights = 1 << np.arange(width - 1, -1, -1)
    return bits.reshape(-1, width).astype(np.int64) @ weights


def qam_map(bits, modulation: Modulation | str) -> np.ndarray:
    """Gray-mapped square QAM at unit mean power. First half of each bit group drives I."""
    modulation = Modulation(modulation)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    bps = modulation.bits_per_symbol
    if bits.size % bps:
        raise ValueError(f"{bits.size} bits is not a multiple of {bps} bits per {modulation.value} symbol")
    return constellation(modulation)[_pack(bits, bps)]


def qam_demap(symbols, modulation: Modulation | str) -> np.ndarray:
    """Hard minimum-distance decisions; exact ties go to the smaller bit pattern."""
    modulation = Modulation(modulation)
    half = modulation.bits_per_symbol // 2
    levels = _axis_levels(half) / _scale(modulation)
    y = np.asarray(symbols, dtype=np.complex128).ravel()
    # argmin returns the first minimum, and levels are ordered by pattern value
    i_pat = np.argmin(np.abs(y.real[:, None] - levels[None, :]), axis=1)
    q_pat = np.argmin(np.abs(y.imag[:, None] - levels[None, :]), axis=1)
    shifts = np.arange(half - 1, -1, -1)
    i_bits = (i_pat[:, None] >> shifts) & 1
    q_bits = (q_pat[:, None] >> shifts) & 1
    return np.hstack([i_bits, q_bits]).astype(np.uint8).ravel()


# ---------------------------------------------------------------------------
# Frame assembly and modulation
# ---------------------------------------------------------------------------


def pilot_values(cfg: LinkConfig, seed: int) -> np.ndarray:
    rng = seeded_rng(seed, PILOT_STREAM)
    return qam_map(random_bits(rng, 2 * cfg.num_pilots()), Modulation.QPSK)


def build_grid(payload, cfg: LinkConfig, seed: int) -> ResourceGrid:
    bits = np.asarray(payload, dtype=np.uint8).ravel()
    expected = cfg.payload_bits()
    if bits.size != expected:
        raise ValueError(f"payload has {bits.size} bits but the grid holds {expected}")
    roles = cfg.roles()
    symbols = np.zeros(cfg.shape, dtype=np.complex128)
    symbols[roles == Role.PILOT] = pilot_values(cfg, seed)
    # data fill runs symbol by symbol, subcarriers within each symbol
    sym_t = symbols.T
    sym_t[roles.T == Role.DATA] = qam_map(bits, cfg.modulation)
    return ResourceGrid(sym_t.T, roles, cfg)


def ofdm_modulate(grid: ResourceGrid) -> IqBuffer:
    cfg = grid.config
    freq = np.zeros((cfg.num_symbols_per_frame, cfg.fft_size), dtype=np.complex128)
    freq[:, cfg.active_bins() % cfg.fft_size] = grid.symbols.T
    body = np.fft.ifft(freq, axis=1, norm="ortho")
    with_cp = np.hstack([body[:, cfg.fft_size - cfg.cp_len :], body])
    return IqBuffer(with_cp.ravel(), cfg.sample_rate_hz)


def ofdm_demodulate(buf: IqBuffer, cfg: LinkConfig, frame_start: int) -> ResourceGrid:
    frame_start = int(frame_start)
    if frame_start < 0 or frame_start + cfg.frame_len > len(buf):
        raise ValueError(
            f"frame of {cfg.frame_len} samples starting at {frame_start} "
            f"does not fit in a {len(buf)}-sample buffer"
        )
    frame = buf.samples[frame_start : frame_start + cfg.frame_len]
    body = frame.reshape(cfg.num_symbols_per_frame, cfg.symbol_len)[:, cfg.cp_len :]
    freq = np.fft.fft(body, axis=1, norm="ortho")
    return ResourceGrid(freq[:, cfg.active_bins() % cfg.fft_size].T, cfg.roles(), cfg)


# ---------------------------------------------------------------------------
# Synchronization
# ---------------------------------------------------------------------------


class SyncError(RuntimeError):
    """No frame found. ``best_start`` still carries the strongest candidate."""

    def __init__(self, message, best_start: int, metric: float, cfo_hz: float):
        super().__init__(message)
        self.best_start = best_start
        self.metric = metric
        self.cfo_hz = cfo_hz


@dataclass(frozen=True)
class SyncResult:
    frame_start: int
    cfo_hz: float
    metric: float


def _window_sum(x: np.ndarray, width: int) -> np.ndarray:
    c = np.concatenate([[0], np.cumsum(x)])
    return c[width:] - c[:-width]


def synchronize(
    buf: IqBuffer, cfg: LinkConfig, threshold: float = 0.1, reference: ResourceGrid | None = None
) -> SyncResult:
    """Frame timing and fractional CFO from the cyclic-prefix correlation.

    Every candidate start accumulates the CP/tail correlation of all symbols in
    the frame; the start with the largest coherent sum wins. Its normalized
    magnitude (1 for a clean frame) must reach ``threshold``.

    CP correlation only pins timing modulo one OFDM symbol. When the
    transmitted ``reference`` grid is known, starts a whole number of symbols
    away are also tried and the one whose pilots match best is kept.
    """
    x = buf.samples
    n, cp, step = cfg.fft_size, cfg.cp_len, cfg.symbol_len
    n_sym = cfg.num_symbols_per_frame
    if len(x) < cfg.frame_len:
        raise ValueError(f"buffer of {len(x)} samples is shorter than one frame ({cfg.frame_len})")
    if cp == 0:
        raise ValueError("CP-based synchronization needs cp_len > 0")

    lagged = np.conj(x[:-n]) * x[n:]
    energy = 0.5 * (np.abs(x[:-n]) ** 2 + np.abs(x[n:]) ** 2)
    corr = _window_sum(lagged, cp)
    pow_ = _window_sum(energy, cp)

    n_cand = len(x) - cfg.frame_len + 1
    acc = np.zeros(n_cand, dtype=np.complex128)
    norm = np.zeros(n_cand)
    for sym in range(n_sym):
        acc += corr[sym * step : sym * step + n_cand]
        norm += pow_[sym * step : sym * step + n_cand]

    start = int(np.argmax(np.abs(acc)))
    cfo = float(np.angle(acc[start]) / (2 * np.pi) * cfg.subcarrier_spacing_hz)
    if reference is not None:
        start = _resolve_symbol_ambiguity(buf, cfg, start, cfo, reference)
        cfo = float(np.angle(acc[start]) / (2 * np.pi) * cfg.subcarrier_spacing_hz)
    metric = float(np.abs(acc[start]) / norm[start]) if norm[start] > 0 else 0.0
    if metric < threshold:
        raise SyncError(
            f"sync failure: CP correlation {metric:.3f} below threshold {threshold}",
            start,
            metric,
            cfo,
        )
    return SyncResult(start, cfo, metric)


def _resolve_symbol_ambiguity(buf, cfg, start, cfo_hz, reference) -> int:
    step = cfg.symbol_len
    last = len(buf) - cfg.frame_len
    candidates = np.arange(start % step, last + 1, step)
    if candidates.size <= 1:
        return start
    pilots = reference.pilot_mask
    l_p = np.flatnonzero(pilots.any(axis=0))
    ref = reference.symbols[:, l_p]
    mask = pilots[:, l_p]
    x = correct_cfo(buf, cfo_hz).samples
    bins = cfg.active_bins() % cfg.fft_size
    scores = []
    for d in candidates:
        idx = d + l_p[:, None] * step + cfg.cp_len + np.arange(cfg.fft_size)[None, :]
        rx = np.fft.fft(x[idx], axis=1, norm="ortho")[:, bins].T
        # per-symbol coherent pilot correlation, combined non-coherently
        per_sym = np.sum(np.where(mask, np.conj(ref) * rx, 0), axis=0)
        scores.append(np.sum(np.abs(per_sym)))
    return int(candidates[int(np.argmax(scores))])


def correct_cfo(buf: IqBuffer, cfo_hz: float) -> IqBuffer:
    n = np.arange(len(buf))
    return buf.replace(buf.samples * np.exp(-2j * np.pi * cfo_hz * n / buf.sample_rate_hz))


# ---------------------------------------------------------------------------
# Channel estimation and equalization
# ---------------------------------------------------------------------------


def _interp_matrix(targets: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Linear interpolation weights, constant beyond the outermost anchors."""
    eye = np.eye(anchors.size)
    return np.stack([np.interp(targets, anchors, eye[j]) for j in range(anchors.size)], axis=1)


def estimate_channel(raw: ResourceGrid, reference: ResourceGrid) -> np.ndarray:
    """LS at pilot cells, then linear interpolation over frequency and then time."""
    cfg = raw.config
    if raw.symbols.shape != reference.symbols.shape:
        raise ValueError("raw and reference grids differ in shape")
    pilots = reference.pilot_mask
    if not pilots.any():
        raise ValueError("reference grid carries no pilots")
    k_p = np.flatnonzero(pilots.any(axis=1))
    l_p = np.flatnonzero(pilots.any(axis=0))
    block = np.ix_(k_p, l_p)
    if not pilots[block].all():
        raise ValueError("pilot cells do not form a rectangular lattice")
    ls = raw.symbols[block] / reference.symbols[block]
    w_f = _interp_matrix(np.arange(cfg.num_subcarriers), k_p)
    w_t = _interp_matrix(np.arange(cfg.num_symbols_per_frame), l_p)
    return w_f @ ls @ w_t.T


class DeepFadeError(ValueError):
    pass


def equalize(raw: ResourceGrid, h_hat: np.ndarray, min_gain: float = 1e-12) -> ResourceGrid:
    h_hat = np.asarray(h_hat)
    if h_hat.shape != raw.symbols.shape:
        raise ValueError(f"channel estimate shape {h_hat.shape} != grid shape {raw.symbols.shape}")
    weak = np.abs(h_hat) <= min_gain
    if weak.any():
        k, l = np.argwhere(weak)[0]
        raise DeepFadeError(f"deep fade: |H| <= {min_gain} at subcarrier {k}, symbol {l}")
    return raw.with_symbols(raw.symbols / h_hat)
