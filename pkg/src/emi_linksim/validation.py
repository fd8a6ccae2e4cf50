"""Input coercion helpers shared by the estimator layer and the CLI."""

from __future__ import annotations

import numpy as np

from .dsp import IqBuffer
from .ofdm import LinkConfig, ResourceGrid, get_preset


def check_link(link) -> LinkConfig:
    if isinstance(link, LinkConfig):
        return link
    if isinstance(link, str):
        return get_preset(link)
    raise TypeError(f"expected a LinkConfig or preset name, got {type(link).__name__}")


def check_iq(x, sample_rate_hz: float | None = None) -> IqBuffer:
    """Accept an IqBuffer or a 1-D complex array (which then needs ``sample_rate_hz``)."""
    if isinstance(x, IqBuffer):
        if sample_rate_hz is not None and x.sample_rate_hz != sample_rate_hz:
            raise ValueError(
                f"buffer sampled at {x.sample_rate_hz} Hz, expected {sample_rate_hz} Hz"
            )
        return x
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D sample array, got shape {arr.shape}")
    if sample_rate_hz is None:
        raise ValueError("a raw sample array needs sample_rate_hz")
    return IqBuffer(arr, sample_rate_hz)


def check_grid(grid, cfg: LinkConfig | None = None) -> ResourceGrid:
    if not isinstance(grid, ResourceGrid):
        raise TypeError(f"expected a ResourceGrid, got {type(grid).__name__}")
    if cfg is not None and grid.config != cfg:
        raise ValueError(f"grid built for {grid.config.label!r}, receiver configured for {cfg.label!r}")
    return grid
