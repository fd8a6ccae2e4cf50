"""``emi-linksim`` command-line front end.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 lost sync (only
with ``--fail-on-sync-loss``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import config as cfgmod
from . import harness
from .dsp import frequency_shift, welch_psd
from .interference import PulseMode, burst_train, cw_tone, transient_pulse
from .iqfile import IqFormatError, export_iq, import_iq
from .kpi import evm_grid_csv
from .ofdm import PRESETS, get_preset

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_SYNC = 4


class SyncLoss(Exception):
    pass


# flag dest -> (section, key)
_FLAG_KEYS = {
    "link": ("link", "preset"),
    "power_scale": ("link", "power_scale"),
    "link_center_hz": ("link", "center_hz"),
    "snr_db": ("channel", "snr_db"),
    "snr_reference": ("channel", "snr_reference"),
    "cfo_hz": ("channel", "cfo_hz"),
    "jammer": ("channel", "jammer"),
    "jammer_reference_db": ("channel", "jammer_reference_db"),
    "channel_seed": ("channel", "seed"),
    "a0": ("pulse", "a0"),
    "tau_rise_ns": ("pulse", "tau_rise_ns"),
    "tau_hold_ns": ("pulse", "tau_hold_ns"),
    "carrier_hz": ("pulse", "carrier_hz"),
    "mode": ("pulse", "mode"),
    "time_scale": ("pulse", "time_scale"),
    "pulse_period_us": ("schedule", "pulse_period_us"),
    "jitter": ("schedule", "jitter"),
    "schedule_seed": ("schedule", "seed"),
    "seeds": ("sweep", "seeds"),
    "seed_stride": ("sweep", "seed_stride"),
    "parallelism": ("sweep", "parallelism"),
}


def _parents():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration; flags override its keys")
    common.add_argument("--link", choices=sorted(PRESETS), help="link preset")
    common.add_argument("--seed", type=int, default=None, help="trial seed (payload, pilots, guard)")
    common.add_argument("--link-center-hz", type=float, help="link RF center for --rf-freq-hz conversion")

    pulse = argparse.ArgumentParser(add_help=False)
    g = pulse.add_argument_group("transient pulse")
    g.add_argument("--a0", type=float)
    g.add_argument("--tau-rise-ns", type=float)
    g.add_argument("--tau-hold-ns", type=float)
    g.add_argument("--carrier-hz", type=float, help="pulse carrier before time scaling (0 = on-tune)")
    g.add_argument("--mode", choices=[m.value for m in PulseMode])
    g.add_argument("--time-scale", type=float, help="stretch factor for the ns-scale time constants")
    g.add_argument("--pulse-period-us", type=float)
    g.add_argument("--jitter", type=float, help="period jitter fraction in [0, 1)")
    g.add_argument("--schedule-seed", type=int)

    channel = argparse.ArgumentParser(add_help=False)
    g = channel.add_argument_group("channel")
    g.add_argument("--snr-db", help="in-band SNR in dB, or 'inf' for no noise")
    g.add_argument("--snr-reference", choices=harness.SNR_REFERENCES)
    g.add_argument("--cfo-hz", type=float)
    g.add_argument("--power-scale", type=float)
    g.add_argument("--jammer", choices=harness.JAMMER_KINDS)
    g.add_argument("--jammer-reference-db", type=float, help="interferer level at 0 dB gain, re frame power")
    g.add_argument("--channel-seed", type=int)
    where = g.add_mutually_exclusive_group()
    where.add_argument("--offset-hz", type=float, nargs="+", help="interferer offset(s) from the link center")
    where.add_argument("--rf-freq-hz", type=float, nargs="+", help="absolute interferer frequency(ies)")
    g.add_argument("--gain-db", type=float, nargs="+", help="relative interferer gain(s)")
    g.add_argument("--fail-on-sync-loss", action="store_true", help="exit 4 if any trial lost sync")
    return common, pulse, channel


def build_parser() -> argparse.ArgumentParser:
    common, pulse, channel = _parents()
    ap = argparse.ArgumentParser(prog="emi-linksim", description="OFDM link simulator under transient EMI")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-pulse", parents=[common, pulse], help="write a transient burst train as IQ")
    p.add_argument("--duration-ms", type=float, default=10.0)
    p.add_argument("--single", action="store_true", help="one pulse at t = 0 instead of a train")
    p.add_argument("--offset-hz", type=float, default=0.0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("gen-cw", parents=[common], help="write a CW tone as IQ")
    where = p.add_mutually_exclusive_group()
    where.add_argument("--offset-hz", type=float, default=None)
    where.add_argument("--rf-freq-hz", type=float)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--duration-ms", type=float, default=10.0)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("simulate", parents=[common, pulse, channel], help="run one trial")
    p.add_argument("--out", default="-", help="KPI report JSON (default stdout)")
    p.add_argument("--artifacts", type=Path, help="directory for IQ, PSD, constellation and EVM-grid files")

    p = sub.add_parser("sweep", parents=[common, pulse, channel], help="offset x gain x seed sweep")
    p.add_argument("--seeds", type=int, help="seeds per grid point")
    p.add_argument("--seed-stride", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--format", choices=("csv", "json", "markdown-table"), default="csv")
    p.add_argument("--out", default="-", help="report path (default stdout)")

    p = sub.add_parser("kpi", parents=[common], help="KPIs of an IQ capture against a trial's transmission")
    p.add_argument("iq", type=Path)
    p.add_argument("--fail-on-sync-loss", action="store_true")
    p.add_argument("--out", default="-")

    p = sub.add_parser("psd", help="Welch PSD of an IQ capture as CSV")
    p.add_argument("iq", type=Path)
    p.add_argument("--segment-len", type=int, default=1024)
    p.add_argument("--out", default="-")

    p = sub.add_parser("export-grid", parents=[common], help="resource grid or EVM grid as CSV")
    p.add_argument("--iq", type=Path, help="capture to score; without it the transmitted grid is written")
    p.add_argument("--out", default="-")
    return ap


def _listed(value):
    if value is None or isinstance(value, list):
        return value
    return [value]


def _settings(args) -> dict:
    settings = cfgmod.load(getattr(args, "config", None))
    overrides: dict = {}
    for dest, (section, key) in _FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    settings = cfgmod.merge(settings, overrides)
    center = float(settings["link"]["center_hz"])
    offsets = _listed(getattr(args, "offset_hz", None))
    rf = _listed(getattr(args, "rf_freq_hz", None))
    if rf is not None:
        offsets = [f - center for f in rf]
    gains = _listed(getattr(args, "gain_db", None))
    if args.command == "sweep":
        if offsets is not None:
            settings["sweep"]["offsets_hz"] = list(offsets)
        if gains is not None:
            settings["sweep"]["gains_db"] = list(gains)
        if args.seed is not None:
            settings["sweep"]["seed"] = args.seed
        if args.snr_db is not None:
            settings["sweep"]["snr_db"] = args.snr_db
        if args.cfo_hz is not None:
            settings["sweep"]["cfo_hz"] = args.cfo_hz
    else:
        for name, values, key in (("offset", offsets, "offset_hz"), ("gain", gains, "gain_db")):
            if values is None:
                continue
            if len(values) != 1:
                raise ValueError(f"a single trial takes one {name} value, got {len(values)}")
            settings["channel"][key] = values[0]
    return settings


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        return
    Path(out).write_text(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _psd_csv(trace) -> str:
    return _csv_text(
        ("freq_offset_hz", "power_db"),
        ((repr(float(f)), repr(float(p))) for f, p in zip(trace.freq_hz, trace.power_db)),
    )


def _constellation_csv(points) -> str:
    return _csv_text(("re", "im"), ((repr(float(z.real)), repr(float(z.imag))) for z in points))


def cmd_gen_pulse(args) -> int:
    settings = _settings(args)
    cfg = get_preset(settings["link"]["preset"])
    params = cfgmod.pulse_params(settings)
    duration = args.duration_ms * 1e-3
    if args.single:
        buf = transient_pulse(params, cfg.sample_rate_hz, duration)
    else:
        buf = burst_train(params, cfgmod.schedule(settings, duration), cfg.sample_rate_hz)
    buf = buf.replace(center_freq_hz=float(settings["link"]["center_hz"]))
    if args.offset_hz:
        buf = frequency_shift(buf, args.offset_hz).replace(center_freq_hz=buf.center_freq_hz)
    export_iq(buf, args.out)
    return EXIT_OK


def cmd_gen_cw(args) -> int:
    settings = _settings(args)
    cfg = get_preset(settings["link"]["preset"])
    center = float(settings["link"]["center_hz"])
    offset = args.rf_freq_hz - center if args.rf_freq_hz is not None else (args.offset_hz or 0.0)
    buf = cw_tone(offset, args.amplitude, cfg.sample_rate_hz, args.duration_ms * 1e-3)
    export_iq(buf.replace(center_freq_hz=center), args.out)
    return EXIT_OK


def _write_artifacts(result: harness.TrialResult, folder: Path) -> None:
    folder.mkdir(parents=True, exist_ok=True)
    a = result.artifacts
    export_iq(a["received"], folder / "received.iq")
    (folder / "psd.csv").write_text(_psd_csv(a["psd"]))
    (folder / "constellation.csv").write_text(_constellation_csv(a["constellation"]))
    (folder / "evm_grid.csv").write_text(evm_grid_csv(a["evm_grid"], a["roles"]))


def cmd_simulate(args) -> int:
    settings = _settings(args)
    spec = cfgmod.trial_spec(settings, seed=args.seed or 0)
    result = harness.run_trial(spec, artifacts=args.artifacts is not None)
    report = result.report.to_dict(result.config_digest)
    report["time_scale"] = spec.pulse.time_scale
    _emit(json.dumps(report, sort_keys=True), args.out)
    if args.artifacts is not None:
        _write_artifacts(result, args.artifacts)
    if args.fail_on_sync_loss and result.report.sync_failed:
        raise SyncLoss("trial lost frame sync")
    return EXIT_OK


def cmd_sweep(args) -> int:
    settings = _settings(args)
    spec = cfgmod.sweep_spec(settings)
    result = harness.run_sweep(spec, parallelism=int(settings["sweep"]["parallelism"]))
    render = {"csv": harness.to_csv, "json": harness.SweepResult.to_json, "markdown-table": harness.to_markdown}
    if args.out in (None, "-"):
        sys.stdout.write(render[args.format](result))
    else:
        harness.emit_report(result, args.format, args.out)
    lost = sum(r.report.sync_failed for r in result.rows)
    if args.fail_on_sync_loss and lost:
        raise SyncLoss(f"{lost} of {len(result.rows)} trials lost frame sync")
    return EXIT_OK


def _reference(args):
    settings = _settings(args)
    link = settings["link"]["preset"]
    seed = args.seed or 0
    bits, grid, _ = harness.reference_for(link, seed, float(settings["link"]["power_scale"]))
    return bits, grid, {"link": link, "seed": seed}


def cmd_kpi(args) -> int:
    bits, grid, ident = _reference(args)
    buf = import_iq(args.iq)
    report, _ = harness.evaluate_capture(buf, bits, grid)
    _emit(report.to_json(harness.config_digest(ident)), args.out)
    if args.fail_on_sync_loss and report.sync_failed:
        raise SyncLoss("capture lost frame sync")
    return EXIT_OK


def cmd_psd(args) -> int:
    buf = import_iq(args.iq)
    _emit(_psd_csv(welch_psd(buf, segment_len=min(args.segment_len, len(buf)))), args.out)
    return EXIT_OK


def cmd_export_grid(args) -> int:
    bits, grid, _ = _reference(args)
    if args.iq is None:
        rows = []
        for sym in range(grid.symbols.shape[1]):
            for k in range(grid.symbols.shape[0]):
                z = grid.symbols[k, sym]
                rows.append((k, sym, repr(float(z.real)), repr(float(z.imag)), int(grid.roles[k, sym])))
        _emit(_csv_text(("subcarrier", "symbol", "re", "im", "role"), rows), args.out)
        return EXIT_OK
    report, _ = harness.evaluate_capture(import_iq(args.iq), bits, grid)
    _emit(evm_grid_csv(report.evm_grid, grid.roles), args.out)
    return EXIT_OK


COMMANDS = {
    "gen-pulse": cmd_gen_pulse,
    "gen-cw": cmd_gen_cw,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "kpi": cmd_kpi,
    "psd": cmd_psd,
    "export-grid": cmd_export_grid,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except SyncLoss as exc:
        print(f"emi-linksim: {exc}", file=sys.stderr)
        return EXIT_SYNC
    except (IqFormatError, OSError) as exc:
        print(f"emi-linksim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"emi-linksim: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
