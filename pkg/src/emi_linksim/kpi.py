"""Link quality indicators: EVM, SINR (aggregate and per subcarrier), BER, PAPR."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dsp import IqBuffer, linear_to_db
from .ofdm import ResourceGrid, Role


class NoiselessError(ZeroDivisionError):
    """Interference plus noise is exactly zero; SINR is unbounded."""


@dataclass(frozen=True)
class PowerTriple:
    p_signal: float
    p_interference: float
    p_noise: float

    def __post_init__(self):
        for name in ("p_signal", "p_interference", "p_noise"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")

    def scaled(self, c: float) -> "PowerTriple":
        return PowerTriple(self.p_signal * c, self.p_interference * c, self.p_noise * c)


def evm(reference, received):
    """RMS and peak EVM in percent, plus per-symbol EVM, normalized by reference RMS."""
    ref = np.asarray(reference, dtype=np.complex128).ravel()
    rx = np.asarray(received, dtype=np.complex128).ravel()
    if ref.size != rx.size:
        raise ValueError(f"length mismatch: {ref.size} reference vs {rx.size} received symbols")
    if ref.size == 0:
        raise ValueError("EVM of zero symbols is undefined")
    ref_rms = np.sqrt(np.mean(np.abs(ref) ** 2))
    if ref_rms == 0:
        raise ValueError("reference has zero power")
    err = np.abs(ref - rx)
    per_symbol = err / ref_rms * 100.0
    rms = np.sqrt(np.mean(err**2)) / ref_rms * 100.0
    return float(rms), float(per_symbol.max()), per_symbol


def sinr(p: PowerTriple) -> tuple[float, float]:
    """(linear, dB) signal over interference-plus-noise."""
    denom = p.p_interference + p.p_noise
    if denom == 0:
        raise NoiselessError("interference and noise are both zero")
    ratio = p.p_signal / denom
    return ratio, float(linear_to_db(ratio))


@dataclass(frozen=True)
class SubcarrierSinrInput:
    """Per-subcarrier link budget. ``h_k`` may be a scalar or an array over subcarriers."""

    h_k: complex | np.ndarray
    p_tx: float
    interferer_powers: tuple | np.ndarray = ()
    n0: float = 0.0
    b_k: float = 1.0

    def __post_init__(self):
        if not self.p_tx > 0:
            raise ValueError("p_tx must be > 0")
        if self.n0 * self.b_k < 0:
            raise ValueError("n0 * b_k must be >= 0")


def sinr_per_subcarrier(inp: SubcarrierSinrInput, eq4_strict: bool = True):
    """|H_k|^2 P_Tx / (sum_j |I_j|^2 [* P_Tx] + N0 B_k).

    With ``eq4_strict`` the interference sum is multiplied by P_Tx (the strict
    form); otherwise the conventional unscaled sum is used.
    """
    interference = float(np.sum(inp.interferer_powers))
    if eq4_strict:
        interference *= inp.p_tx
    denom = interference + inp.n0 * inp.b_k
    if denom <= 0:
        raise NoiselessError("per-subcarrier SINR denominator is zero")
    return np.abs(np.asarray(inp.h_k)) ** 2 * inp.p_tx / denom


def _projection(received: np.ndarray, reference: np.ndarray):
    ref_energy = np.vdot(reference, reference).real
    if ref_energy == 0:
        raise ValueError("reference has zero power")
    alpha = np.vdot(reference, received) / ref_energy
    p_signal = abs(alpha) ** 2 * ref_energy / reference.size
    residual = received - alpha * reference
    return p_signal, float(np.mean(np.abs(residual) ** 2))


def estimate_sinr_from_grid(equalized: ResourceGrid, reference: ResourceGrid) -> PowerTriple:
    """Data-aided split of the data cells into signal and impairment power.

    The signal is the projection of the received cells onto the reference;
    everything left over is reported as ``p_interference`` with ``p_noise``
    zero, because a receiver cannot tell the two apart.
    """
    if equalized.symbols.shape != reference.symbols.shape:
        raise ValueError("grid shapes differ")
    mask = reference.data_mask
    p_sig, p_res = _projection(equalized.symbols[mask], reference.symbols[mask])
    return PowerTriple(float(p_sig), p_res, 0.0)


def sinr_db_or_sentinel(p: PowerTriple, ceiling_db: float = 300.0) -> float:
    """Aggregate SINR in dB, with a noiseless link reported as ``ceiling_db``."""
    try:
        return sinr(p)[1]
    except NoiselessError:
        return ceiling_db


def subcarrier_sinr_db(equalized: ResourceGrid, reference: ResourceGrid, ceiling_db: float = 300.0) -> np.ndarray:
    """Measured SINR of each subcarrier from its data cells across the frame."""
    mask = reference.data_mask
    out = np.empty(equalized.config.num_subcarriers)
    for k in range(out.size):
        p_sig, p_res = _projection(equalized.symbols[k, mask[k]], reference.symbols[k, mask[k]])
        out[k] = ceiling_db if p_res == 0 else min(10 * np.log10(max(p_sig, 1e-300) / p_res), ceiling_db)
    return out


def ber(tx_bits, rx_bits) -> float:
    tx = np.asarray(tx_bits, dtype=np.uint8).ravel()
    rx = np.asarray(rx_bits, dtype=np.uint8).ravel()
    if tx.size != rx.size:
        raise ValueError(f"bit count mismatch: {tx.size} vs {rx.size}")
    if tx.size == 0:
        raise ValueError("BER of zero bits is undefined")
    return float(np.count_nonzero(tx != rx) / tx.size)


def papr(buf: IqBuffer | np.ndarray) -> float:
    x = buf.samples if isinstance(buf, IqBuffer) else np.asarray(buf)
    if x.size == 0:
        raise ValueError("PAPR of an empty buffer is undefined")
    p = np.abs(x) ** 2
    if p.max() == 0:
        raise ValueError("PAPR of an all-zero buffer is undefined")
    return float(10 * np.log10(p.max() / p.mean()))


def evm_grid(equalized: ResourceGrid, reference: ResourceGrid) -> np.ndarray:
    """Per-cell EVM (%) against the frame-wide reference RMS; null cells are NaN."""
    if equalized.symbols.shape != reference.symbols.shape:
        raise ValueError(
            f"grid shapes differ: {equalized.symbols.shape} vs {reference.symbols.shape}"
        )
    live = reference.roles != Role.NULL
    ref_rms = np.sqrt(np.mean(np.abs(reference.symbols[live]) ** 2))
    if ref_rms == 0:
        raise ValueError("reference grid has zero power")
    out = np.abs(equalized.symbols - reference.symbols) / ref_rms * 100.0
    out[~live] = np.nan
    return out


_ROLE_NAMES = {Role.DATA: "data", Role.PILOT: "pilot", Role.NULL: "null"}


def evm_grid_csv(grid_pct: np.ndarray, roles: np.ndarray) -> str:
    lines = ["subcarrier,symbol,evm_percent,role"]
    for k, l in np.ndindex(grid_pct.shape):
        if roles[k, l] == Role.NULL:
            continue
        lines.append(f"{k},{l},{grid_pct[k, l]:.6g},{_ROLE_NAMES[Role(roles[k, l])]}")
    return "\n".join(lines) + "\n"


@dataclass
class KpiReport:
    evm_rms_percent: float
    evm_peak_percent: float
    ber: float
    sinr_db: float
    cfo_hz: float
    papr_db: float
    sinr_per_subcarrier_db: np.ndarray = field(default_factory=lambda: np.zeros(0))
    evm_grid: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    sync_failed: bool = False

    def __post_init__(self):
        if not 0 <= self.ber <= 1:
            raise ValueError(f"ber must be in [0, 1], got {self.ber}")
        if self.evm_rms_percent < 0 or self.evm_peak_percent < self.evm_rms_percent - 1e-9:
            raise ValueError("need evm_peak >= evm_rms >= 0")

    def to_dict(self, config_digest: str | None = None) -> dict:
        d = asdict(self)
        d["sinr_per_subcarrier_db"] = _json_array(self.sinr_per_subcarrier_db)
        d["evm_grid"] = _json_array(self.evm_grid)
        if config_digest is not None:
            d["config_digest"] = config_digest
        return d

    def to_json(self, config_digest: str | None = None) -> str:
        return json.dumps(self.to_dict(config_digest), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "KpiReport":
        d = {k: v for k, v in d.items() if k != "config_digest"}
        d["sinr_per_subcarrier_db"] = np.array(d.get("sinr_per_subcarrier_db", []), dtype=float)
        rows = d.get("evm_grid") or []
        grid = np.array([[np.nan if v is None else v for v in row] for row in rows], dtype=float)
        d["evm_grid"] = grid if rows else np.zeros((0, 0))
        return cls(**d)


def _json_array(a: np.ndarray):
    a = np.asarray(a, dtype=float)
    return np.where(np.isnan(a), None, a).tolist()


def config_digest(obj) -> str:
    """Stable short hash of a JSON-able configuration."""
    blob = json.dumps(obj, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
