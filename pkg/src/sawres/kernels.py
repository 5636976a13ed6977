"""Kernel backend selection.

Imports the compiled extension when present, otherwise the pure-numpy
fallback.  Set SAWRES_KERNELS=python to force the fallback (used by the
benchmark and by tests that compare the two implementations).
"""

from __future__ import annotations

import os

import numpy as np

if os.environ.get("SAWRES_KERNELS", "").lower() in ("python", "numpy"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _kernels_py as _impl  # type: ignore[no-redef]

BACKEND: str = _impl.BACKEND


def _grid(freqs) -> np.ndarray:
    return np.ascontiguousarray(freqs, dtype=np.float64)


def reflection(freqs, f0: float, qi: float, qe: float) -> np.ndarray:
    return _impl.reflection(_grid(freqs), f0, qi, qe)


def reflection_multi(freqs, f0s, qis, qes) -> np.ndarray:
    return _impl.reflection_multi(_grid(freqs), _grid(f0s), _grid(qis),
                                  _grid(qes))


def background(freqs, amp0: float, amp_slope: float, phase0: float,
               delay: float, f_ref: float) -> np.ndarray:
    return _impl.background(_grid(freqs), amp0, amp_slope, phase0, delay,
                            f_ref)


def model(freqs, f0: float, qi: float, qe: float, amp0: float,
          amp_slope: float, phase0: float, delay: float,
          f_ref: float) -> np.ndarray:
    return _impl.model(_grid(freqs), f0, qi, qe, amp0, amp_slope, phase0,
                       delay, f_ref)


def model_and_jacobian(freqs, f0: float, qi: float, qe: float, amp0: float,
                       amp_slope: float, phase0: float, delay: float,
                       f_ref: float) -> tuple[np.ndarray, np.ndarray]:
    return _impl.model_and_jacobian(_grid(freqs), f0, qi, qe, amp0,
                                    amp_slope, phase0, delay, f_ref)
