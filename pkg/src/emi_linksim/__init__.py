"""Baseband OFDM link simulator for transient-EMI susceptibility studies."""

from .channel import ChannelConfig, add_awgn, combine
from .dsp import DbGain, IqBuffer, PsdTrace, apply_gain, dft, frequency_shift, mean_power, welch_psd
from .harness import SweepSpec, TrialSpec, emit_report, run_sweep, run_trial
from .interference import BurstSchedule, PulseMode, TransientPulseParams, burst_train, cw_tone, transient_pulse
from .iqfile import IqFormatError, export_iq, import_iq
from .kpi import KpiReport, PowerTriple, ber, evm, papr, sinr, sinr_per_subcarrier
from .ofdm import (
    PRESETS,
    LinkConfig,
    Modulation,
    ResourceGrid,
    SyncError,
    build_grid,
    equalize,
    estimate_channel,
    get_preset,
    ofdm_demodulate,
    ofdm_modulate,
    qam_demap,
    qam_map,
    synchronize,
)
from .receiver import OfdmReceiver

__version__ = "0.1.0"
