"""Shared fixtures: the bundled device table and synthetic traces."""

import numpy as np
import pytest

from sawres import (BackgroundModel, ModeParams, load_device_table,
                    synth_trace)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def table():
    return load_device_table()


@pytest.fixture(scope="session")
def material(table):
    return table.material


def make_trace(f0=3.1e9, qi=7.47e4, qe=1.2e5, amp0=0.97, amp_slope=0.0,
               phase0=0.3, delay=3.0e-8, noise_sigma=0.0, seed=1234,
               n=1601, span_linewidths=20.0):
    """Single-mode trace on a grid of span_linewidths loaded linewidths."""
    ql = 1.0 / (1.0 / qi + 1.0 / qe)
    span = span_linewidths * f0 / ql
    freqs = np.linspace(f0 - span / 2, f0 + span / 2, n)
    mode = ModeParams(f0=f0, qi=qi, qe=qe)
    bg = BackgroundModel(amp0=amp0, amp_slope=amp_slope, phase0=phase0,
                         delay=delay, f_ref=f0)
    trace = synth_trace([mode], bg, freqs, noise_sigma=noise_sigma, seed=seed)
    return trace, mode, bg
