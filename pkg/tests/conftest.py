import time

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FS = 15.36e6


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def direct_periodogram(x: np.ndarray, fs: float):
    """Rectangular-window periodogram by explicit DFT summation, fftshifted."""
    n = x.size
    k = np.arange(n)
    m = k - n // 2
    kernel = np.exp(-2j * np.pi * np.outer(m, k) / n)
    return m * fs / n, np.abs(kernel @ x) ** 2 / n


_SWEEPS = {}


def default_sweep(link: str, seeds: int = 20):
    """The acceptance sweep for ``link`` (default axes, 20 seeds), computed once per session.

    Returns (spec, result, wall-clock seconds).
    """
    key = (link, seeds)
    if key not in _SWEEPS:
        from emi_linksim.harness import SweepSpec, default_sweep_base, run_sweep

        spec = SweepSpec(base=default_sweep_base(link), seeds_per_point=seeds)
        start = time.perf_counter()
        result = run_sweep(spec, parallelism=1)
        _SWEEPS[key] = (spec, result, time.perf_counter() - start)
    return _SWEEPS[key]


# criterion number -> list of (check, passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[number]
        ok = all(passed for _, passed, _ in checks)
        detail = "; ".join(f"{name}: {'ok' if passed else 'FAIL'} ({info})" for name, passed, info in checks)
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
