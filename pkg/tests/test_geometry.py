"""Closed-form geometry chain against independently computed references.

Reference values in this file are recomputed with mpmath at 40 digits from
the defining formulas, not with the package code.
"""

import math

import numpy as np
import pytest
from mpmath import mp, mpf, tanh

from sawres import (DeviceGeometry, MaterialParams, ValidationError,
                    calibrate_external_q, derive_params, external_q,
                    mode_frequencies)

mp.dps = 40

MAT = MaterialParams(v=3100.0, rho=2650.0, rs_mag=0.002, temperature=0.010)

# Table geometry of the 1929-half-wave, 1000-electrode-mirror device.
GEOM = DeviceGeometry(a=2.5e-7, w=1e-4, nt=71, ng=1000, m_half_waves=1929,
                      h=3e-8)


class TestDerivedParams:
    """Each derived quantity against its 40-digit reference."""

    def test_reference_chain(self):
        d = derive_params(GEOM, MAT)
        # lambda0 = 4a; f0 = v/lambda0; Lp = a/|rs|; Lc = d + 2 Lp
        assert d.lambda0 == pytest.approx(1e-6, rel=1e-15)
        assert d.f0 == pytest.approx(3.1e9, rel=1e-15)
        assert d.lp == pytest.approx(1.25e-4, rel=1e-15)
        assert d.lc == pytest.approx(1.2145e-3, rel=1e-15)
        # v/Lc, tanh(Ng |rs|), 2 f0 |rs|/pi, 1.8 f0/Nt, pi Lc/(lambda0 (1-R))
        assert d.fsr == pytest.approx(2552490.736928777274, rel=1e-13)
        assert d.r_mirror == pytest.approx(0.9640275800758168839, rel=1e-13)
        assert d.df_stopband == pytest.approx(3947042.588679004327, rel=1e-13)
        assert d.df_idt == pytest.approx(78591549.29577464789, rel=1e-13)
        assert d.qg == pytest.approx(106066.3776811909273, rel=1e-12)

    def test_fsr_identity(self):
        # v/Lc must equal the equivalent closed form 2 f0 / (d/2a + 1/|rs|)
        for m_half in (109, 1051, 1929, 3629):
            geom = DeviceGeometry(a=GEOM.a, w=GEOM.w, nt=GEOM.nt, ng=GEOM.ng,
                                  m_half_waves=m_half, h=GEOM.h)
            d = derive_params(geom, MAT)
            alt = 2.0 * d.f0 / (geom.d / (2 * geom.a) + 1.0 / MAT.rs_mag)
            assert d.fsr == pytest.approx(alt, rel=1e-12)

    def test_cavity_length_field(self):
        assert GEOM.d == pytest.approx(2 * 2.5e-7 * 1929, rel=1e-15)

    def test_qg_against_mpmath_long_grating(self):
        # Long-grating stability: 1 - tanh must not cancel catastrophically.
        # The reference needs ~35 extra digits at ng=20000 before the
        # subtraction, hence the raised working precision.
        with mp.workdps(150):
            for ng in (1000, 3000, 8000, 20000):
                geom = DeviceGeometry(a=GEOM.a, w=GEOM.w, nt=GEOM.nt, ng=ng,
                                      m_half_waves=GEOM.m_half_waves,
                                      h=GEOM.h)
                d = derive_params(geom, MAT)
                ref = math.pi * mpf(str(d.lc)) / (
                    mpf('1e-6') * (1 - tanh(mpf('0.002') * ng)))
                assert d.qg == pytest.approx(float(ref), rel=1e-12)

    def test_qg_monotone_in_ng(self):
        qgs = []
        for ng in range(200, 6000, 400):
            geom = DeviceGeometry(a=GEOM.a, w=GEOM.w, nt=GEOM.nt, ng=ng,
                                  m_half_waves=GEOM.m_half_waves, h=GEOM.h)
            qgs.append(derive_params(geom, MAT).qg)
        assert all(b > a for a, b in zip(qgs, qgs[1:]))

    def test_qg_finite_for_extreme_grating(self):
        # ng |rs| ~ 1600: leakage underflows to 0, Qg saturates at inf
        geom = DeviceGeometry(a=GEOM.a, w=GEOM.w, nt=GEOM.nt, ng=800000,
                              m_half_waves=GEOM.m_half_waves, h=GEOM.h)
        d = derive_params(geom, MAT)
        assert d.qg == math.inf

    def test_validation(self):
        with pytest.raises(ValidationError, match="a:"):
            DeviceGeometry(a=-1e-7, w=1e-4, nt=71, ng=1000,
                           m_half_waves=1929, h=3e-8)
        with pytest.raises(ValidationError, match="nt:"):
            DeviceGeometry(a=2.5e-7, w=1e-4, nt=0, ng=1000,
                           m_half_waves=1929, h=3e-8)
        with pytest.raises(ValidationError, match="rs_mag:"):
            MaterialParams(v=3100.0, rho=2650.0, rs_mag=1.5,
                           temperature=0.01)
        with pytest.raises(ValidationError, match="v:"):
            MaterialParams(v=0.0, rho=2650.0, rs_mag=0.002, temperature=0.01)


class TestModeFrequencies:
    """Mode enumeration against an explicit brute-force count."""

    @staticmethod
    def _brute_count(f0, fsr, lo, hi):
        count = 0
        k = -10 ** 6
        # scan a generous k range; slack mirrors the implementation's
        k_lo = math.floor((lo - f0) / fsr) - 2
        k_hi = math.ceil((hi - f0) / fsr) + 2
        for k in range(k_lo, k_hi + 1):
            f = f0 + k * fsr
            if lo - 1e-9 * fsr <= f <= hi + 1e-9 * fsr:
                count += 1
        return count

    def test_single_mode_when_fsr_exceeds_stopband(self):
        # 1051-half-wave long-pitch device: FSR 666 kHz > stopband 658 kHz
        geom = DeviceGeometry(a=1.5e-6, w=9e-4, nt=51, ng=1500,
                              m_half_waves=1051, h=1e-7)
        d = derive_params(geom, MAT)
        assert d.fsr > d.df_stopband
        modes = mode_frequencies(d, "first-stopband")
        assert modes.shape == (1,)
        assert modes[0] == pytest.approx(d.f0, rel=1e-15)

    def test_degenerate_window(self):
        d = derive_params(GEOM, MAT)
        modes = mode_frequencies(d, (d.f0, d.f0))
        assert modes.shape == (1,)
        assert modes[0] == d.f0

    def test_empty_window(self):
        d = derive_params(GEOM, MAT)
        lo = d.f0 + 0.1 * d.fsr
        hi = d.f0 + 0.9 * d.fsr
        assert mode_frequencies(d, (lo, hi)).shape == (0,)

    def test_idt_window_count_floor_consistent(self):
        # 3629-half-wave device: FSR ~ 1.50 MHz, IDT band ~ 78.6 MHz wide
        geom = DeviceGeometry(a=2.5e-7, w=1e-4, nt=71, ng=1000,
                              m_half_waves=3629, h=3e-8)
        d = derive_params(geom, MAT)
        assert d.fsr == pytest.approx(1.5016e6, rel=1e-3)
        modes = mode_frequencies(d, "idt")
        expected = 2 * math.floor((d.df_idt / 2) / d.fsr) + 1
        assert modes.shape[0] == expected == 53
        brute = self._brute_count(d.f0, d.fsr, d.f0 - d.df_idt / 2,
                                  d.f0 + d.df_idt / 2)
        assert modes.shape[0] == brute

    def test_explicit_window_matches_brute_force(self):
        rng = np.random.default_rng(7)
        d = derive_params(GEOM, MAT)
        for _ in range(50):
            lo = d.f0 + d.fsr * rng.uniform(-30, 0)
            hi = lo + d.fsr * rng.uniform(0, 60)
            modes = mode_frequencies(d, (lo, hi))
            assert modes.shape[0] == self._brute_count(d.f0, d.fsr, lo, hi)
            assert np.all(np.diff(modes) > 0)

    def test_symmetric_window_symmetric_output(self):
        d = derive_params(GEOM, MAT)
        modes = mode_frequencies(d, (d.f0 - 10.3 * d.fsr,
                                     d.f0 + 10.3 * d.fsr))
        offsets = modes - d.f0
        assert offsets[::-1] == pytest.approx(-offsets, abs=1e-3)

    def test_default_window_is_narrower_band(self):
        d = derive_params(GEOM, MAT)
        # default = min(stopband, IDT) = stopband for this device
        assert np.array_equal(mode_frequencies(d),
                              mode_frequencies(d, "first-stopband"))

    def test_inverted_window_is_empty(self):
        d = derive_params(GEOM, MAT)
        assert mode_frequencies(d, (d.f0 + 1e6, d.f0 - 1e6)).shape == (0,)


class TestExternalQ:
    def test_scaling(self):
        d = derive_params(GEOM, MAT)
        c_e = 3.0e11
        # Qe = c_e Lc / Nt^2
        assert external_q(GEOM, d, c_e) == pytest.approx(
            c_e * d.lc / GEOM.nt ** 2, rel=1e-15)

    def test_calibration_round_trip(self):
        d = derive_params(GEOM, MAT)
        c_e = calibrate_external_q(GEOM, d, qe_meas=6.57e5)
        assert external_q(GEOM, d, c_e) == pytest.approx(6.57e5, rel=1e-12)

    def test_doubling_transducer_quarters_qe(self):
        d = derive_params(GEOM, MAT)
        g2 = DeviceGeometry(a=GEOM.a, w=GEOM.w, nt=2 * GEOM.nt, ng=GEOM.ng,
                            m_half_waves=GEOM.m_half_waves, h=GEOM.h)
        assert external_q(g2, d, 1.0) == pytest.approx(
            external_q(GEOM, d, 1.0) / 4.0, rel=1e-12)

    def test_positive_calibration_required(self):
        d = derive_params(GEOM, MAT)
        with pytest.raises(ValidationError, match="c_e"):
            external_q(GEOM, d, 0.0)
