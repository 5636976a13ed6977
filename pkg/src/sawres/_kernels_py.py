"""Pure-numpy reference kernels for the reflection model.

Same contract as the compiled extension in _kernels_cy.pyx; sawres.kernels
picks whichever is available at import time.  All functions take float64
arrays for `freqs` and return complex128.  Everything is elementwise over
the frequency grid, so evaluating in chunks is bit-identical to evaluating
the whole grid at once.

Model, with x = (f - f0) / f and u = qi / qe:

    refl(f)  = ((1 - u) + 2i qi x) / ((1 + u) + 2i qi x)
    bg(f)    = (amp0 + amp_slope (f - f_ref)) * exp(i (phase0 - 2 pi delay (f - f_ref)))
    model(f) = bg(f) * refl(f)

The Jacobian is with respect to theta = (f0, ln qi, ln qe, amp0, amp_slope,
phase0, delay); log parameters keep the Q factors positive during fits.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

TWO_PI = 2.0 * np.pi


def reflection(freqs: np.ndarray, f0: float, qi: float, qe: float) -> np.ndarray:
    """One-port reflection factor of a single mode."""
    u = qi / qe
    t = 2.0 * qi * (freqs - f0) / freqs
    return ((1.0 - u) + 1j * t) / ((1.0 + u) + 1j * t)


def reflection_multi(freqs: np.ndarray, f0s: np.ndarray, qis: np.ndarray,
                     qes: np.ndarray) -> np.ndarray:
    """Product of single-mode reflection factors over all modes."""
    out = np.ones(freqs.shape[0], dtype=np.complex128)
    for k in range(f0s.shape[0]):
        out *= reflection(freqs, f0s[k], qis[k], qes[k])
    return out


def background(freqs: np.ndarray, amp0: float, amp_slope: float,
               phase0: float, delay: float, f_ref: float) -> np.ndarray:
    """Affine-magnitude, linear-phase (cable delay) background."""
    df = freqs - f_ref
    phase = phase0 - TWO_PI * delay * df
    return (amp0 + amp_slope * df) * (np.cos(phase) + 1j * np.sin(phase))


def model(freqs: np.ndarray, f0: float, qi: float, qe: float, amp0: float,
          amp_slope: float, phase0: float, delay: float,
          f_ref: float) -> np.ndarray:
    """Single mode times background."""
    return background(freqs, amp0, amp_slope, phase0, delay, f_ref) \
        * reflection(freqs, f0, qi, qe)


def model_and_jacobian(freqs: np.ndarray, f0: float, qi: float, qe: float,
                       amp0: float, amp_slope: float, phase0: float,
                       delay: float, f_ref: float
                       ) -> tuple[np.ndarray, np.ndarray]:
    """Model values and the (n, 7) complex Jacobian d model / d theta."""
    n = freqs.shape[0]
    u = qi / qe
    t = 2.0 * qi * (freqs - f0) / freqs
    num = (1.0 - u) + 1j * t
    den = (1.0 + u) + 1j * t
    refl = num / den
    den2 = den * den

    df = freqs - f_ref
    phase = phase0 - TWO_PI * delay * df
    osc = np.cos(phase) + 1j * np.sin(phase)
    bg = (amp0 + amp_slope * df) * osc
    s = bg * refl

    jac = np.empty((n, 7), dtype=np.complex128)
    jac[:, 0] = bg * (-4j * qi * u / (freqs * den2))      # d/d f0
    jac[:, 1] = bg * (-2.0 * u / den2)                    # d/d ln qi
    jac[:, 2] = bg * (2.0 * u * (1.0 + 1j * t) / den2)    # d/d ln qe
    jac[:, 3] = osc * refl                                # d/d amp0
    jac[:, 4] = df * osc * refl                           # d/d amp_slope
    jac[:, 5] = 1j * s                                    # d/d phase0
    jac[:, 6] = -1j * TWO_PI * df * s                     # d/d delay
    return s, jac
