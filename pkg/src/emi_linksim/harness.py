"""Trial execution, frequency x gain sweeps and report emission."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import ChannelConfig, combine
from .dsp import DbGain, IqBuffer, mean_power, random_bits, seeded_rng, welch_psd
from .interference import BurstSchedule, PulseMode, TransientPulseParams, burst_train, cw_tone
from .kpi import (
    KpiReport,
    PowerTriple,
    config_digest,
    estimate_sinr_from_grid,
    evm,
    evm_grid,
    papr,
    sinr_db_or_sentinel,
    subcarrier_sinr_db,
)
from . import kpi as _kpi
from .ofdm import LinkConfig, ResourceGrid, build_grid, get_preset, ofdm_modulate
from .receiver import OfdmReceiver

PAYLOAD_STREAM = 0x0BE7
GUARD_STREAM = 0x6A2D
JAMMER_KINDS = ("transient", "cw", "none")
SNR_REFERENCES = ("subcarrier", "buffer")

LINK_CENTER_HZ = 2.2e9
# Stretches the ns-scale transient to a few samples: still wideband across the
# occupied subcarriers. Much larger factors collapse the pulse onto the DC bin.
DEFAULT_TIME_SCALE = 10.0
DEFAULT_PULSE_PERIOD_S = 20e-6
DEFAULT_JITTER = 0.5
# Interferer level at 0 dB gain, relative to the desired frame power. The
# 12/15/18 dB campaign gains then span roughly 13 to 7 dB signal-to-interference.
DEFAULT_JAMMER_REFERENCE_DB = -25.0
# In-band SNR and oscillator offset of the interference-free baseline link
DEFAULT_SWEEP_SNR_DB = 30.0
DEFAULT_SWEEP_CFO_HZ = 1372.998
# Measurement-campaign interferer frequencies relative to the 2.2 GHz link center.
DEFAULT_OFFSETS_HZ = (-4.5e6, 0.0, 4.5e6)
DEFAULT_GAINS_DB = (12.0, 15.0, 18.0)

CSV_COLUMNS = (
    "offset_hz",
    "gain_db",
    "seed",
    "evm_peak_pct",
    "evm_rms_pct",
    "ber",
    "sinr_db",
    "cfo_hz",
    "papr_db",
    "sync_failed",
)


def default_pulse() -> TransientPulseParams:
    return TransientPulseParams(time_scale=DEFAULT_TIME_SCALE)


def default_schedule() -> BurstSchedule:
    return BurstSchedule(pulse_period_s=DEFAULT_PULSE_PERIOD_S, jitter_fraction=DEFAULT_JITTER)


@dataclass(frozen=True)
class TrialSpec:
    """One experimental condition.

    With ``snr_reference="subcarrier"`` the channel SNR is the per-subcarrier
    Es/N0 seen by the demodulator; ``"buffer"`` applies it to the mean power of
    the whole capture as :func:`channel.add_awgn` does.
    """

    link: str = "nr-like"
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    pulse: TransientPulseParams = field(default_factory=default_pulse)
    schedule: BurstSchedule = field(default_factory=default_schedule)
    jammer_kind: str = "transient"
    seed: int = 0
    snr_reference: str = "subcarrier"
    jammer_reference_db: float = DEFAULT_JAMMER_REFERENCE_DB
    power_scale: float = 0.8

    def __post_init__(self):
        get_preset(self.link)
        if self.jammer_kind not in JAMMER_KINDS:
            raise ValueError(f"jammer_kind must be one of {JAMMER_KINDS}, got {self.jammer_kind!r}")
        if self.snr_reference not in SNR_REFERENCES:
            raise ValueError(f"snr_reference must be one of {SNR_REFERENCES}")
        if not self.power_scale > 0:
            raise ValueError("power_scale must be > 0")
        cfg = get_preset(self.link)
        if abs(self.channel.interferer_offset_hz) >= cfg.sample_rate_hz / 2:
            raise ValueError(
                f"interferer offset {self.channel.interferer_offset_hz} Hz outside "
                f"+/-{cfg.sample_rate_hz / 2} Hz"
            )
        if self.jammer_kind != "none" and self.pulse.sim_carrier_freq_hz >= cfg.sample_rate_hz / 2:
            raise ValueError(
                f"pulse carrier {self.pulse.sim_carrier_freq_hz} Hz (after time scaling) "
                f"exceeds Nyquist at {cfg.sample_rate_hz} S/s"
            )

    @property
    def config(self) -> LinkConfig:
        return get_preset(self.link)

    def to_dict(self) -> dict:
        return _plain(asdict(self))


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, PulseMode):
        return obj.value
    return obj


@dataclass
class TrialResult:
    report: KpiReport
    ground_truth: PowerTriple
    config_digest: str
    artifacts: dict = field(default_factory=dict)


def _capture_layout(cfg: LinkConfig, seed: int) -> tuple[int, int]:
    rng = seeded_rng(seed, GUARD_STREAM)
    lead = int(rng.integers(cfg.cp_len, cfg.symbol_len + cfg.cp_len))
    return lead, cfg.symbol_len


def reference_for(link: str, seed: int, power_scale: float = 0.8):
    """Payload bits, resource grid and scaled baseband frame a trial transmits."""
    cfg = get_preset(link)
    bits = random_bits(seeded_rng(seed, PAYLOAD_STREAM), cfg.payload_bits())
    grid = build_grid(bits, cfg, seed)
    return bits, grid, ofdm_modulate(grid).samples * power_scale


def _transmit(spec: TrialSpec):
    cfg = spec.config
    bits, grid, frame = reference_for(spec.link, spec.seed, spec.power_scale)
    lead, tail = _capture_layout(cfg, spec.seed)
    capture = np.concatenate([np.zeros(lead), frame, np.zeros(tail)])
    desired = IqBuffer(capture, cfg.sample_rate_hz, LINK_CENTER_HZ)
    return bits, grid, desired, lead


def _jammer(spec: TrialSpec, n: int, fs: float, ref_power: float) -> IqBuffer | None:
    if spec.jammer_kind == "none":
        return None
    duration = n / fs
    if spec.jammer_kind == "cw":
        jam = cw_tone(spec.pulse.sim_carrier_freq_hz, 1.0, fs, duration)
    else:
        sched = replace(spec.schedule, duration_s=duration, seed=spec.schedule.seed ^ spec.seed)
        jam = burst_train(spec.pulse, sched, fs)
    p = mean_power(jam)
    if p == 0:
        return jam
    level = ref_power * 10.0 ** (spec.jammer_reference_db / 10.0)
    return jam.replace(jam.samples * math.sqrt(level / p))


def _channel_for(spec: TrialSpec, desired: IqBuffer) -> ChannelConfig:
    ch = replace(spec.channel, seed=spec.channel.seed ^ spec.seed)
    if ch.snr_db is None or spec.snr_reference == "buffer":
        return ch
    # per-subcarrier Es/N0 -> SNR against the capture's mean power
    p_cell = spec.power_scale**2 * abs(ch.flat_gain) ** 2
    sigma2 = p_cell / 10.0 ** (ch.snr_db / 10.0)
    p_capture = mean_power(desired) * abs(ch.flat_gain) ** 2
    return replace(ch, snr_db=10.0 * math.log10(p_capture / sigma2))


def evaluate_capture(received: IqBuffer, bits, grid: ResourceGrid, keep_grid: bool = True):
    """Receive a capture against the known transmission and score it.

    A lost sync is an outcome, not an error: BER is then recorded as 0.5.
    """
    cfg = grid.config
    rx = OfdmReceiver(cfg).fit(grid).receive(received)
    eq = rx.equalized
    rms, peak, _ = evm(grid.data_symbols(), eq.data_symbols())
    ber = 0.5 if rx.sync_failed else _kpi.ber(bits, rx.bits)
    window = received.samples[rx.frame_start : rx.frame_start + cfg.frame_len]
    report = KpiReport(
        evm_rms_percent=rms,
        evm_peak_percent=peak,
        ber=ber,
        sinr_db=sinr_db_or_sentinel(estimate_sinr_from_grid(eq, grid)),
        cfo_hz=rx.cfo_hz,
        papr_db=papr(window),
        sinr_per_subcarrier_db=subcarrier_sinr_db(eq, grid),
        evm_grid=evm_grid(eq, grid) if keep_grid else np.zeros((0, 0)),
        sync_failed=rx.sync_failed,
    )
    return report, rx


def run_trial(spec: TrialSpec, artifacts: bool = False, keep_grid: bool = True) -> TrialResult:
    cfg = spec.config
    bits, grid, desired, lead = _transmit(spec)
    frame_power = mean_power(desired.samples[lead : lead + cfg.frame_len])
    interferer = _jammer(spec, len(desired), cfg.sample_rate_hz, frame_power)
    channel = _channel_for(spec, desired)
    received, truth = combine(desired, interferer, channel)

    report, rx = evaluate_capture(received, bits, grid, keep_grid=keep_grid)
    out = TrialResult(report, truth, config_digest(spec.to_dict()))
    if artifacts:
        out.artifacts = {
            "received": received,
            "psd": welch_psd(received, segment_len=min(1024, len(received))),
            "constellation": rx.equalized.data_symbols(),
            "evm_grid": report.evm_grid if keep_grid else evm_grid(rx.equalized, grid),
            "roles": grid.roles,
            "reference": grid,
            "frame_start": rx.frame_start,
            "lead": lead,
        }
    return out


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def default_sweep_base(link: str = "nr-like") -> TrialSpec:
    """Baseline link impairments (SNR, CFO) shared by every sweep point."""
    return TrialSpec(
        link=link, channel=ChannelConfig(snr_db=DEFAULT_SWEEP_SNR_DB, cfo_hz=DEFAULT_SWEEP_CFO_HZ)
    )


@dataclass(frozen=True)
class SweepSpec:
    base: TrialSpec = field(default_factory=default_sweep_base)
    offsets_hz: tuple = DEFAULT_OFFSETS_HZ
    gains_db: tuple = DEFAULT_GAINS_DB
    seeds_per_point: int = 1
    seed_stride: int = 1

    def __post_init__(self):
        if not self.offsets_hz or not self.gains_db:
            raise ValueError("sweep axes must be nonempty")
        if self.seeds_per_point < 1:
            raise ValueError("seeds_per_point must be >= 1")
        object.__setattr__(self, "offsets_hz", tuple(float(v) for v in self.offsets_hz))
        object.__setattr__(self, "gains_db", tuple(float(v) for v in self.gains_db))

    def points(self):
        """(offset, gain, seed, TrialSpec) in output order.

        Replica ``r`` uses seed ``base.seed + r * seed_stride`` at every grid
        point, so one seed can be followed across the gain axis.
        """
        for offset in self.offsets_hz:
            for gain in self.gains_db:
                for r in range(self.seeds_per_point):
                    seed = self.base.seed + r * self.seed_stride
                    ch = replace(
                        self.base.channel, interferer_offset_hz=offset, interferer_gain=DbGain(gain)
                    )
                    yield offset, gain, seed, replace(self.base, channel=ch, seed=seed)


@dataclass
class SweepRow:
    offset_hz: float
    gain_db: float
    seed: int
    report: KpiReport
    ground_truth: PowerTriple

    @property
    def sinr_oracle_db(self) -> float:
        return sinr_db_or_sentinel(self.ground_truth)


@dataclass
class SweepResult:
    rows: list
    time_scale: float | None = None

    def to_json(self) -> str:
        payload = []
        for r in self.rows:
            payload.append(
                {
                    "offset_hz": r.offset_hz,
                    "gain_db": r.gain_db,
                    "seed": r.seed,
                    "kpi": r.report.to_dict(),
                    "ground_truth": asdict(r.ground_truth),
                    "sinr_oracle_db": r.sinr_oracle_db,
                }
            )
        return json.dumps({"rows": payload, "time_scale": self.time_scale}, indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SweepResult":
        data = json.loads(text)
        rows = []
        for d in data["rows"]:
            rows.append(
                SweepRow(
                    d["offset_hz"],
                    d["gain_db"],
                    d["seed"],
                    KpiReport.from_dict(d["kpi"]),
                    PowerTriple(**d["ground_truth"]),
                )
            )
        return cls(rows, data.get("time_scale"))


def _run_point(args) -> SweepRow:
    offset, gain, seed, spec = args
    res = run_trial(spec, keep_grid=False)
    return SweepRow(offset, gain, seed, res.report, res.ground_truth)


def run_sweep(spec: SweepSpec, parallelism: int = 1) -> SweepResult:
    # building every TrialSpec validates it before anything runs
    points = list(spec.points())
    if parallelism <= 1:
        rows = [_run_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_run_point, points, chunksize=max(1, len(points) // (4 * parallelism))))
    return SweepResult(rows, spec.base.pulse.time_scale)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.rows:
        k = r.report
        w.writerow(
            [
                repr(r.offset_hz),
                repr(r.gain_db),
                r.seed,
                repr(k.evm_peak_percent),
                repr(k.evm_rms_percent),
                repr(k.ber),
                repr(k.sinr_db),
                repr(k.cfo_hz),
                repr(k.papr_db),
                str(k.sync_failed).lower(),
            ]
        )
    return buf.getvalue()


def aggregate(result: SweepResult) -> list[dict]:
    """Mean and sample std of each KPI per (offset, gain), in sweep order."""
    groups: dict = {}
    for r in result.rows:
        groups.setdefault((r.offset_hz, r.gain_db), []).append(r)
    out = []
    for (offset, gain), rows in groups.items():
        entry = {"offset_hz": offset, "gain_db": gain, "n": len(rows)}
        for name, attr in (
            ("evm_peak_pct", "evm_peak_percent"),
            ("evm_rms_pct", "evm_rms_percent"),
            ("ber", "ber"),
            ("sinr_db", "sinr_db"),
            ("cfo_hz", "cfo_hz"),
        ):
            vals = np.array([getattr(r.report, attr) for r in rows], dtype=float)
            entry[name] = (float(vals.mean()), float(vals.std(ddof=1)) if vals.size > 1 else 0.0)
        entry["sync_failures"] = sum(r.report.sync_failed for r in rows)
        out.append(entry)
    return out


def to_markdown(result: SweepResult) -> str:
    head = "| Interferer offset (MHz) | Gain (dB) | EVM Peak (%) | EVM RMS (%) | BER | SINR (dB) | CFO (Hz) | n |"
    lines = [head, "|" + "---|" * 8]
    for e in aggregate(result):
        cells = [f"{e['offset_hz'] / 1e6:+.4g}", f"{e['gain_db']:g}"]
        for name, fmt in (("evm_peak_pct", ".2f"), ("evm_rms_pct", ".2f"), ("ber", ".4f"), ("sinr_db", ".2f"), ("cfo_hz", ".1f")):
            m, s = e[name]
            cells.append(f"{m:{fmt}} ± {s:{fmt}}")
        cells.append(str(e["n"]))
        lines.append("| " + " | ".join(cells) + " |")
    if result.time_scale is not None:
        lines += ["", f"Pulse time scale: {result.time_scale:g}"]
    return "\n".join(lines) + "\n"


def emit_report(result: SweepResult, fmt: str, path) -> Path:
    if not result.rows:
        raise ValueError("nothing to report: sweep result is empty")
    render = {"csv": to_csv, "json": SweepResult.to_json, "markdown-table": to_markdown}
    try:
        text = render[fmt](result)
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r}; choose from {sorted(render)}") from None
    path = Path(path)
    path.write_text(text)
    return path
