"""cf32le IQ recordings with a JSON sidecar.

Payload: little-endian float32 pairs, I then Q. Sidecar ``<name>.iq.json``::

    {"sample_rate_hz": 15360000.0, "center_freq_hz": 2.2e9,
     "num_samples": 153600, "format": "cf32le"}
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dsp import IqBuffer

FORMAT = "cf32le"
_DTYPE = np.dtype("<c8")


class IqFormatError(ValueError):
    """Sidecar and payload disagree, or the sidecar is malformed."""


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json") if path.suffix == ".iq" else path.with_name(path.name + ".iq.json")


def export_iq(buf: IqBuffer, path) -> Path:
    path = Path(path)
    path.write_bytes(buf.samples.astype(_DTYPE).tobytes())
    meta = {
        "sample_rate_hz": buf.sample_rate_hz,
        "center_freq_hz": buf.center_freq_hz,
        "num_samples": len(buf),
        "format": FORMAT,
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def import_iq(path) -> IqBuffer:
    path = Path(path)
    meta_file = sidecar_path(path)
    try:
        meta = json.loads(meta_file.read_text())
    except json.JSONDecodeError as exc:
        raise IqFormatError(f"{meta_file}: invalid JSON ({exc})") from exc
    missing = {"sample_rate_hz", "center_freq_hz", "num_samples", "format"} - meta.keys()
    if missing:
        raise IqFormatError(f"{meta_file}: missing fields {sorted(missing)}")
    if meta["format"] != FORMAT:
        raise IqFormatError(f"{meta_file}: unknown format {meta['format']!r}, expected {FORMAT!r}")

    raw = path.read_bytes()
    if len(raw) % _DTYPE.itemsize:
        raise IqFormatError(
            f"{path}: payload of {len(raw)} bytes is not a whole number of cf32 samples"
        )
    found = len(raw) // _DTYPE.itemsize
    expected = int(meta["num_samples"])
    if found != expected:
        raise IqFormatError(
            f"{path}: sidecar declares {expected} samples but payload holds {found}"
        )
    samples = np.frombuffer(raw, dtype=_DTYPE).astype(np.complex128)
    return IqBuffer(samples, meta["sample_rate_hz"], meta["center_freq_hz"])
