"""Complex one-port reflection traces: model, synthesis, background removal.

A resonance shows up in reflection as

    s11(f) = ((qe - qi)/qe + 2i qi (f - f0)/f) / ((qe + qi)/qe + 2i qi (f - f0)/f)

which dips to (qe - qi)/(qe + qi) at f = f0 and reaches exactly zero at
critical coupling qi = qe.  Multiple cavity modes compose multiplicatively,
and the instrument contributes a slowly varying background (affine
magnitude, linear phase from cable delay) that multiplies the whole trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import kernels
from .errors import SingularBackgroundError, ValidationError

DEFAULT_SEED = 1234

# Background magnitudes below this are treated as zero; S11 data is O(1).
_BG_FLOOR = 1e-12


@dataclass(frozen=True)
class ModeParams:
    """One resonant mode: centre frequency and internal/external Q."""

    f0: float
    qi: float
    qe: float

    def __post_init__(self) -> None:
        for name in ("f0", "qi", "qe"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValidationError(
                    f"{name}: must be finite and > 0, got {value}")

    @property
    def ql(self) -> float:
        """Loaded quality factor: 1/ql = 1/qi + 1/qe."""
        return 1.0 / (1.0 / self.qi + 1.0 / self.qe)


@dataclass(frozen=True)
class BackgroundModel:
    """Instrument background, multiplying the resonator response.

        bg(f) = (amp0 + amp_slope (f - f_ref))
                * exp(i (phase0 - 2 pi delay (f - f_ref)))

    amp0 is the magnitude at f_ref (the band centre), delay the cable group
    delay in seconds.  f_ref anchors the model to a grid and is carried as
    metadata, never fitted.
    """

    amp0: float = 1.0
    amp_slope: float = 0.0
    phase0: float = 0.0
    delay: float = 0.0
    f_ref: float = 0.0

    def __post_init__(self) -> None:
        for name in ("amp0", "amp_slope", "phase0", "delay", "f_ref"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValidationError(f"{name}: must be finite, got {value}")

    def __call__(self, freqs) -> np.ndarray:
        return kernels.background(freqs, self.amp0, self.amp_slope,
                                  self.phase0, self.delay, self.f_ref)


@dataclass(frozen=True, eq=False)
class ComplexTrace:
    """A sampled complex reflection trace on a strictly increasing grid.

    meta carries measurement context; recognized keys are power_dbm (drive
    power at the instrument), attenuation_db (line attenuation, negative)
    and temperature_k.
    """

    freqs: np.ndarray
    s11: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        freqs = np.asarray(self.freqs, dtype=np.float64)
        s11 = np.asarray(self.s11, dtype=np.complex128)
        if freqs.ndim != 1 or s11.ndim != 1:
            raise ValidationError("freqs/s11: must be one-dimensional")
        if freqs.shape[0] != s11.shape[0]:
            raise ValidationError(
                f"s11: length {s11.shape[0]} != freqs length {freqs.shape[0]}")
        if freqs.shape[0] < 2:
            raise ValidationError("freqs: need at least 2 points")
        if not np.all(np.isfinite(freqs)):
            raise ValidationError("freqs: must be finite")
        if not np.all(np.isfinite(s11.view(np.float64))):
            raise ValidationError("s11: must be finite")
        if not np.all(np.diff(freqs) > 0):
            raise ValidationError("freqs: must be strictly increasing")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "s11", s11)

    def __len__(self) -> int:
        return self.freqs.shape[0]

    def window(self, f_lo: float, f_hi: float) -> "ComplexTrace":
        """Sub-trace restricted to [f_lo, f_hi]."""
        sel = (self.freqs >= f_lo) & (self.freqs <= f_hi)
        if np.count_nonzero(sel) < 2:
            raise ValidationError(
                f"window: [{f_lo}, {f_hi}] holds fewer than 2 grid points")
        return ComplexTrace(self.freqs[sel], self.s11[sel], dict(self.meta))


def s11_single(freqs, mode: ModeParams) -> np.ndarray | complex:
    """Reflection of a single mode; scalar in, scalar out."""
    arr = np.atleast_1d(np.asarray(freqs, dtype=np.float64))
    out = kernels.reflection(arr, mode.f0, mode.qi, mode.qe)
    if np.isscalar(freqs) or np.ndim(freqs) == 0:
        return complex(out[0])
    return out


# ---------------------------------------------------------------------------
# Counter-based noise: value at grid index i depends only on (seed, i), so
# chunked synthesis is bit-identical to whole-grid synthesis.
# ---------------------------------------------------------------------------

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _complex_noise(seed: int, start: int, n: int, sigma: float) -> np.ndarray:
    """sigma: standard deviation of each quadrature."""
    base = np.uint64(seed)
    idx = np.arange(start, start + n, dtype=np.uint64)
    w1 = _mix64(base + (np.uint64(2) * idx + np.uint64(1)) * _GAMMA)
    w2 = _mix64(base + (np.uint64(2) * idx + np.uint64(2)) * _GAMMA)
    # (0, 1] and [0, 1): keeps the log finite.
    u1 = ((w1 >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (w2 >> np.uint64(11)).astype(np.float64) * 2.0**-53
    r = sigma * np.sqrt(-2.0 * np.log(u1))
    theta = (2.0 * np.pi) * u2
    return r * np.cos(theta) + 1j * (r * np.sin(theta))


def _checked_background(bg: BackgroundModel, freqs: np.ndarray) -> np.ndarray:
    values = bg(freqs)
    if not np.all(np.abs(values) > _BG_FLOOR):
        raise SingularBackgroundError(
            "background magnitude vanishes on the grid "
            f"(min |bg| = {np.min(np.abs(values)):.3e})")
    return values


def _chunks(n: int, chunk_size: int | None) -> Iterator[tuple[int, int]]:
    if chunk_size is None:
        yield 0, n
        return
    if chunk_size < 1:
        raise ValidationError(f"chunk_size: must be >= 1, got {chunk_size}")
    for start in range(0, n, chunk_size):
        yield start, min(start + chunk_size, n)


def synth_trace(modes: Sequence[ModeParams], bg: BackgroundModel, freqs,
                noise_sigma: float = 0.0, *, seed: int = DEFAULT_SEED,
                meta: dict | None = None,
                chunk_size: int | None = None) -> ComplexTrace:
    """Synthesize a reflection trace: product of modes, times background,
    plus complex Gaussian noise (noise_sigma = per-quadrature std).

    The same seed always gives the same trace, and the noise at a grid
    point depends only on (seed, index), so chunk_size changes nothing but
    the evaluation order.
    """
    grid = np.asarray(freqs, dtype=np.float64)
    if noise_sigma < 0 or not math.isfinite(noise_sigma):
        raise ValidationError(
            f"noise_sigma: must be finite and >= 0, got {noise_sigma}")
    if seed < 0:
        raise ValidationError(f"seed: must be >= 0, got {seed}")
    f0s = np.array([m.f0 for m in modes], dtype=np.float64)
    qis = np.array([m.qi for m in modes], dtype=np.float64)
    qes = np.array([m.qe for m in modes], dtype=np.float64)

    out = np.empty(grid.shape[0], dtype=np.complex128)
    for start, stop in _chunks(grid.shape[0], chunk_size):
        piece = grid[start:stop]
        values = _checked_background(bg, piece)
        if len(modes):
            values = values * kernels.reflection_multi(piece, f0s, qis, qes)
        if noise_sigma > 0:
            values = values + _complex_noise(seed, start, stop - start,
                                             noise_sigma)
        out[start:stop] = values
    return ComplexTrace(grid, out, dict(meta or {}))


def remove_background(trace: ComplexTrace, bg: BackgroundModel) -> ComplexTrace:
    """Divide a trace by a background model."""
    values = _checked_background(bg, trace.freqs)
    return ComplexTrace(trace.freqs, trace.s11 / values, dict(trace.meta))
