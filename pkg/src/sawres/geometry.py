"""Geometry of one-port SAW Fabry-Perot resonators.

A resonator is an interdigital transducer (IDT) of ``nt`` fingers placed
between two reflective gratings of ``ng`` electrodes each, separated by a
cavity of length ``d = m_half_waves * lambda0 / 2``.  Electrode pitch ``a``
sets the operating wavelength ``lambda0 = 4 a`` and centre frequency
``f0 = v / lambda0``.

Closed forms implemented here, with ``|rs|`` the reflectivity of a single
electrode:

    lp   = a / |rs|                       grating penetration depth
    lc   = d + 2 lp                       effective cavity length
    fsr  = v / lc                         free spectral range
    R    = tanh(ng |rs|)                  grating mirror reflectance
    df_stopband = 2 f0 |rs| / pi          width of the first grating stopband
    df_idt      = 1.8 f0 / nt             IDT bandwidth
    qg   = pi lc / (lambda0 (1 - R))      mirror-leakage quality factor limit
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

WindowSpec = "str | tuple[float, float] | None"


def _require(cond: bool, field: str, msg: str) -> None:
    if not cond:
        raise ValidationError(f"{field}: {msg}")


@dataclass(frozen=True)
class MaterialParams:
    """Substrate/metallization parameters.

    v           SAW phase velocity (m/s)
    rho         mass density (kg/m^3)
    rs_mag      reflectivity magnitude |rs| of a single grating electrode
    temperature operating temperature (K)
    """

    v: float = 3100.0
    rho: float = 2650.0
    rs_mag: float = 0.002
    temperature: float = 0.010

    def __post_init__(self) -> None:
        _require(self.v > 0, "v", f"must be > 0, got {self.v}")
        _require(self.rho > 0, "rho", f"must be > 0, got {self.rho}")
        _require(0 < self.rs_mag < 1, "rs_mag",
                 f"must be in (0, 1), got {self.rs_mag}")
        _require(self.temperature > 0, "temperature",
                 f"must be > 0, got {self.temperature}")


@dataclass(frozen=True)
class DeviceGeometry:
    """As-drawn resonator geometry.

    a             electrode pitch (m); lambda0 = 4 a
    w             acoustic aperture (m)
    nt            number of IDT fingers
    ng            number of electrodes per grating mirror
    m_half_waves  cavity length in half-wavelengths: d = m lambda0 / 2
    h             metallization film thickness (m)
    """

    a: float
    w: float
    nt: int
    ng: int
    m_half_waves: int
    h: float

    def __post_init__(self) -> None:
        _require(self.a > 0, "a", f"must be > 0, got {self.a}")
        _require(self.w > 0, "w", f"must be > 0, got {self.w}")
        for field in ("nt", "ng", "m_half_waves"):
            value = getattr(self, field)
            _require(isinstance(value, (int, np.integer)) and value > 0,
                     field, f"must be a positive integer, got {value!r}")
        _require(self.h > 0, "h", f"must be > 0, got {self.h}")

    @property
    def d(self) -> float:
        """Mirror-to-mirror cavity length (m); equals 2 a m_half_waves."""
        return 2.0 * self.a * self.m_half_waves


@dataclass(frozen=True)
class DerivedParams:
    """Derived resonator parameters; see the module docstring for formulas."""

    lambda0: float
    f0: float
    lp: float
    lc: float
    fsr: float
    r_mirror: float
    df_stopband: float
    df_idt: float
    qg: float


def one_minus_tanh(x: float) -> float:
    """1 - tanh(x) for x >= 0 without cancellation: 2 e^{-2x} / (1 + e^{-2x}).

    Long mirrors (ng |rs| >> 1) drive tanh within an ulp of 1; the naive
    difference underflows to 0 far too early.
    """
    if x < 0:
        raise ValidationError(f"x: must be >= 0, got {x}")
    t = math.exp(-2.0 * x)
    return 2.0 * t / (1.0 + t)


def derive_params(geom: DeviceGeometry, mat: MaterialParams) -> DerivedParams:
    """Evaluate all closed-form resonator parameters for one device."""
    lambda0 = 4.0 * geom.a
    f0 = mat.v / lambda0
    lp = geom.a / mat.rs_mag
    lc = geom.d + 2.0 * lp
    fsr = mat.v / lc
    r_mirror = math.tanh(geom.ng * mat.rs_mag)
    df_stopband = 2.0 * f0 * mat.rs_mag / math.pi
    df_idt = 1.8 * f0 / geom.nt
    leakage = one_minus_tanh(mat.rs_mag * geom.ng)
    # ng |rs| beyond ~745 underflows the leakage to exactly 0: lossless
    # mirrors, infinite qg.
    qg = math.pi * lc / (lambda0 * leakage) if leakage > 0 else math.inf
    return DerivedParams(lambda0=lambda0, f0=f0, lp=lp, lc=lc, fsr=fsr,
                         r_mirror=r_mirror, df_stopband=df_stopband,
                         df_idt=df_idt, qg=qg)


def _resolve_window(derived: DerivedParams,
                    window: WindowSpec = None) -> tuple[float, float]:
    if window is None:
        half = 0.5 * min(derived.df_stopband, derived.df_idt)
        return derived.f0 - half, derived.f0 + half
    if isinstance(window, str):
        if window == "first-stopband":
            half = 0.5 * derived.df_stopband
        elif window == "idt":
            half = 0.5 * derived.df_idt
        else:
            raise ValidationError(
                f"window: expected 'first-stopband', 'idt' or (lo, hi), "
                f"got {window!r}")
        return derived.f0 - half, derived.f0 + half
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValidationError(f"window: bounds must be finite, got {window!r}")
    return lo, hi


def mode_frequencies(derived: DerivedParams,
                     window: WindowSpec = None) -> np.ndarray:
    """Cavity mode frequencies f0 + k * fsr inside a frequency window.

    window selects the admitted band: None (default) uses the narrower of
    the first grating stopband and the IDT bandwidth, centred on f0;
    "first-stopband" / "idt" pick one of those explicitly; a (lo, hi) tuple
    gives absolute bounds in Hz.  Returns a sorted array, possibly empty.
    """
    lo, hi = _resolve_window(derived, window)
    if hi < lo:
        return np.empty(0, dtype=float)
    # Half-ulp slack so a mode landing exactly on a bound stays included.
    slack = 1e-9 * derived.fsr
    k_lo = math.ceil((lo - derived.f0 - slack) / derived.fsr)
    k_hi = math.floor((hi - derived.f0 + slack) / derived.fsr)
    if k_hi < k_lo:
        return np.empty(0, dtype=float)
    k = np.arange(k_lo, k_hi + 1, dtype=float)
    return derived.f0 + k * derived.fsr


def external_q(geom: DeviceGeometry, derived: DerivedParams,
               c_e: float) -> float:
    """External (coupling) quality factor scaling law qe = c_e * lc / nt^2.

    c_e is an empirical constant calibrated on a reference device with
    calibrate_external_q; the lc / nt^2 scaling is the useful content.
    """
    _require(c_e > 0, "c_e", f"must be > 0, got {c_e}")
    return c_e * derived.lc / geom.nt**2


def calibrate_external_q(geom: DeviceGeometry, derived: DerivedParams,
                         qe_meas: float) -> float:
    """Back out c_e from one measured external Q."""
    _require(qe_meas > 0, "qe_meas", f"must be > 0, got {qe_meas}")
    return qe_meas * geom.nt**2 / derived.lc
