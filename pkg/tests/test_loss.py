"""Loss budget, extraction pipelines, TLS saturation, phonon numbers.

Reference numbers are recomputed with mpmath at 40 digits from the
defining expressions; fit recoveries run against self-generated data.
"""

import math

import numpy as np
import pytest
from mpmath import mp, mpf, tanh
from mpmath import pi as mppi

from sawres import (DeviceGeometry, FitDataError, MaterialParams,
                    ModeParams, TlsParams, ValidationError,
                    coupling_estimate, dbm_to_watts, derive_params,
                    fit_powerlaw, fit_rs_alpha, fit_tls, loss_budget,
                    mean_free_path, phonon_number, power_at_sample,
                    powerlaw_dataset, predict_qi, rs_alpha_dataset,
                    tls_alpha, tls_qi, watts_to_dbm)
from sawres.loss import _qg_of

mp.dps = 40

MAT = MaterialParams(v=3100.0, rho=2650.0, rs_mag=0.002, temperature=0.010)
GEOM = DeviceGeometry(a=2.5e-7, w=1e-4, nt=71, ng=1000, m_half_waves=1929,
                      h=3e-8)

# standard TLS context quoted to 4.449 GHz at 10 mK
TLS = TlsParams(n0_gamma2=4.5e4, p_c=dbm_to_watts(-65.7 - 67.0), q_rl=5.75e4,
                rho=2650.0, v=3100.0, f0=4.449e9, temperature=0.010)


class TestPredictQi:
    def test_lossless_propagation_is_grating_limit(self):
        d = derive_params(GEOM, MAT)
        assert predict_qi(d, 0.0, MAT) == pytest.approx(d.qg, rel=1e-14)

    def test_budget_reference_value(self):
        # Qi = (1/Qg + v alpha/(pi f0))^-1 for the 1929-half-wave device at
        # alpha = 12.5 /m, recomputed at 40 digits
        d = derive_params(GEOM, MAT)
        ref = 1 / (1 / mpf('106066.3776811909272543859913914936328606')
                   + 3100 * mpf('12.5') / (mppi * mpf('3.1e9')))
        got = predict_qi(d, 12.5, MAT)
        assert got == pytest.approx(float(ref), rel=1e-12)
        # and against the measured device's tabulated internal Q
        assert got == pytest.approx(74.7e3, rel=0.01)

    def test_measured_qi_consistency(self, table):
        # forward model with |rs|=0.002, alpha=12.5 /m against the measured
        # internal Q of the 1929- and 3229-half-wave devices
        r6 = table['r6']
        r9 = table['r9']
        d6 = derive_params(r6.geometry, table.material)
        d9 = derive_params(r9.geometry, table.material)
        assert predict_qi(d6, 12.5, table.material) == pytest.approx(
            r6.qi_meas, rel=0.05)
        assert predict_qi(d9, 12.5, table.material) == pytest.approx(
            r9.qi_meas, rel=0.10)

    def test_long_cavity_saturation(self):
        alpha = 12.5
        geom = DeviceGeometry(a=GEOM.a, w=GEOM.w, nt=GEOM.nt, ng=GEOM.ng,
                              m_half_waves=20 ** 6, h=GEOM.h)
        d = derive_params(geom, MAT)
        limit = math.pi * d.f0 / (MAT.v * alpha)
        assert predict_qi(d, alpha, MAT) == pytest.approx(limit, rel=1e-4)

    def test_upper_bound_by_both_channels(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            m_half = int(rng.integers(100, 5000))
            alpha = 10 ** rng.uniform(-2, 3)
            geom = DeviceGeometry(a=GEOM.a, w=GEOM.w, nt=GEOM.nt,
                                  ng=int(rng.integers(100, 3000)),
                                  m_half_waves=m_half, h=GEOM.h)
            d = derive_params(geom, MAT)
            qi = predict_qi(d, alpha, MAT)
            assert qi <= d.qg * (1 + 1e-12)
            assert qi <= math.pi * d.f0 / (MAT.v * alpha) * (1 + 1e-12)

    def test_budget_invariant(self):
        d = derive_params(GEOM, MAT)
        budget = loss_budget(d, 12.5, MAT)
        assert 1.0 / budget.qi_pred == pytest.approx(
            1.0 / budget.qg + budget.v * budget.alpha_p
            / (math.pi * budget.f0), rel=1e-12)

    def test_negative_alpha_rejected(self):
        d = derive_params(GEOM, MAT)
        with pytest.raises(ValidationError, match="alpha_p"):
            predict_qi(d, -1.0, MAT)


class TestFitRsAlpha:
    def _series(self, rs, alpha, n=10, noise=0.0, rng=None):
        m_halves = np.unique(np.geomspace(109, 3629, n).astype(int))
        ds = 2.0 * GEOM.a * m_halves
        f0 = MAT.v / (4 * GEOM.a)
        qg = np.array([_qg_of(d, rs, GEOM.a, GEOM.ng) for d in ds])
        qi = 1.0 / (1.0 / qg + alpha * MAT.v / (math.pi * f0))
        if noise:
            qi = qi * (1.0 + noise * rng.standard_normal(qi.shape))
        return [(d, f0, q) for d, q in zip(ds, qi)]

    def test_bundled_series(self, table):
        fit = fit_rs_alpha(rs_alpha_dataset(table.select('r*')),
                           table['r1'].geometry, table.material)
        assert fit.converged
        assert 0.0015 <= fit.rs_mag <= 0.0026
        assert fit.alpha_p <= 15.0
        # the data are mirror-limited: alpha collapses and its sigma sets
        # the upper limit, around the 0.015 /mm scale
        assert 1.0 <= fit.alpha_sigma <= 30.0
        assert fit.rs_sigma < 0.3 * fit.rs_mag

    def test_noiseless_recovery_exact(self):
        fit = fit_rs_alpha(self._series(0.002, 12.5), GEOM, MAT)
        assert fit.converged
        assert fit.rs_mag == pytest.approx(0.002, rel=1e-6)
        assert fit.alpha_p == pytest.approx(12.5, rel=1e-6)
        assert fit.residual_rms < 1e-7

    def test_monte_carlo_recovery(self):
        # 5% multiplicative Q noise over 10 devices, 100 seeded repetitions
        rng = np.random.default_rng(1234)
        errs_rs, errs_alpha = [], []
        for _ in range(100):
            fit = fit_rs_alpha(self._series(0.002, 12.5, noise=0.05,
                                            rng=rng), GEOM, MAT)
            errs_rs.append(abs(fit.rs_mag - 0.002) / 0.002)
            errs_alpha.append(abs(fit.alpha_p - 12.5) / 12.5)
        assert np.median(errs_rs) < 0.15
        assert np.median(errs_alpha) < 0.15

    def test_too_few_devices(self):
        with pytest.raises(FitDataError, match="4"):
            fit_rs_alpha(self._series(0.002, 12.5)[:3], GEOM, MAT)

    def test_insufficient_length_span(self):
        rows = self._series(0.002, 12.5)
        f0 = rows[0][1]
        squeezed = [(rows[0][0] * (1 + 0.1 * i), f0, rows[0][2])
                    for i in range(6)]
        with pytest.raises(FitDataError, match="span"):
            fit_rs_alpha(squeezed, GEOM, MAT)


class TestFitPowerlaw:
    def test_bundled_frequency_series(self, table):
        fit = fit_powerlaw(powerlaw_dataset(table.select('q*,r6')))
        # within the quoted one-sigma intervals around 719 and 2.07
        assert abs(fit.c1 - 719.0) <= 85.0
        assert abs(fit.c2 - 2.07) <= 0.13

    def test_two_exact_points(self):
        # Q = 100e3 (f/GHz)^-2 sampled at 1 and 2.5 GHz
        data = [(1e9, 100e3), (2.5e9, 100e3 / 2.5 ** 2)]
        fit = fit_powerlaw(data)
        assert fit.c1 == pytest.approx(100.0, rel=1e-12)
        assert fit.c2 == pytest.approx(2.0, rel=1e-12)
        assert math.isnan(fit.c1_sigma) and math.isnan(fit.c2_sigma)

    def test_reference_point_prediction(self):
        # c1=719, c2=2.07 evaluated at 2.01 GHz lands near the tabulated
        # 171e3 of the 2.01 GHz device
        law = fit_powerlaw([(1e9, 719e3), (2e9, 719e3 * 2 ** -2.07),
                            (4e9, 719e3 * 4 ** -2.07)])
        assert law.qi(2.01e9) == pytest.approx(169e3, rel=0.01)
        assert law.qi(2.01e9) == pytest.approx(171e3, rel=0.02)

    def test_exact_recovery_with_scatter_sigmas(self):
        rng = np.random.default_rng(3)
        f0s = np.geomspace(0.5e9, 5e9, 12)
        qis = 719e3 * (f0s / 1e9) ** -2.07 * np.exp(
            0.05 * rng.standard_normal(12))
        fit = fit_powerlaw(list(zip(f0s, qis)))
        assert fit.c1 == pytest.approx(719.0, rel=0.1)
        assert fit.c2 == pytest.approx(2.07, rel=0.05)
        assert 0 < fit.c2_sigma < 0.1

    def test_degenerate_frequencies(self):
        with pytest.raises(FitDataError, match="span"):
            fit_powerlaw([(1e9, 1e5), (1e9, 2e5), (1e9, 3e5)])


class TestTls:
    def test_low_power_attenuation_reference(self):
        # 2 pi^2 f0 n0 gamma^2/(rho v^3) tanh(h f0/(2 kB T)) at 40 digits
        ref = mpf('50.05802428648724801601394471637902196351')
        assert tls_alpha(0.0, TLS) == pytest.approx(float(ref), rel=1e-12)

    def test_per_time_convention_scales_by_v(self):
        a_len = tls_alpha(1e-16, TLS, convention="per-length")
        a_time = tls_alpha(1e-16, TLS, convention="per-time")
        assert a_time == pytest.approx(a_len * TLS.v, rel=1e-12)
        with pytest.raises(ValidationError, match="convention"):
            tls_alpha(1e-16, TLS, convention="per-photon")

    def test_saturation_law(self):
        # alpha(3 Pc) = alpha(0)/2 exactly: (1 + 3)^(-1/2) = 1/2
        assert tls_alpha(3 * TLS.p_c, TLS) == pytest.approx(
            tls_alpha(0.0, TLS) / 2, rel=1e-12)

    def test_monotonicity_properties(self):
        ps = np.logspace(-19, -11, 40)
        alphas = np.array([tls_alpha(p, TLS) for p in ps])
        assert np.all(np.diff(alphas) < 0)
        more_tls = TlsParams(n0_gamma2=2 * TLS.n0_gamma2, p_c=TLS.p_c,
                             q_rl=TLS.q_rl, rho=TLS.rho, v=TLS.v, f0=TLS.f0,
                             temperature=TLS.temperature)
        assert tls_alpha(1e-16, more_tls) == pytest.approx(
            2 * tls_alpha(1e-16, TLS), rel=1e-12)

    def test_thermal_depolarization(self):
        # at 1 K the 4.449 GHz TLS bath is nearly saturated thermally
        hot = TlsParams(n0_gamma2=TLS.n0_gamma2, p_c=TLS.p_c, q_rl=TLS.q_rl,
                        rho=TLS.rho, v=TLS.v, f0=TLS.f0, temperature=1.0)
        ratio = tls_alpha(0.0, hot) / tls_alpha(0.0, TLS)
        x = mpf('6.62607015e-34') * mpf('4.449e9') / (2 * mpf('1.380649e-23'))
        ref = tanh(x) / tanh(x / mpf('0.01'))
        assert ratio == pytest.approx(float(ref), rel=1e-10)

    def test_low_power_qi_closure(self):
        # quoted TLS strength, critical power and residual Q must land on
        # the observed low-power internal Q within 5%
        qi0 = tls_qi(0.0, TLS)
        assert qi0 == pytest.approx(
            35095.27509760071859161049463723680313, rel=1e-12)
        assert qi0 == pytest.approx(34500.0, rel=0.05)

    def test_qi_monotone_and_saturating(self):
        ps = np.logspace(-19, -9, 60)
        qs = np.array([tls_qi(p, TLS) for p in ps])
        assert np.all(np.diff(qs) > 0)
        assert qs[-1] < TLS.q_rl
        assert tls_qi(1e-3, TLS) == pytest.approx(TLS.q_rl, rel=1e-3)

    def test_fit_recovery_noiseless(self):
        p_dbm = np.linspace(-95.0, -35.0, 13)
        qi = [tls_qi(power_at_sample(p, -67.0), TLS) for p in p_dbm]
        seed = TlsParams(n0_gamma2=1e4, p_c=1e-14, q_rl=1e5, rho=TLS.rho,
                         v=TLS.v, f0=TLS.f0, temperature=TLS.temperature)
        fit = fit_tls(list(zip(p_dbm, qi)), seed, attenuation_db=-67.0)
        assert fit.converged
        assert fit.params.n0_gamma2 == pytest.approx(TLS.n0_gamma2, rel=1e-6)
        assert fit.params.p_c == pytest.approx(TLS.p_c, rel=1e-6)
        assert fit.params.q_rl == pytest.approx(TLS.q_rl, rel=1e-6)

    def test_fit_recovery_noisy(self):
        rng = np.random.default_rng(11)
        p_dbm = np.linspace(-100.0, -30.0, 15)
        qi = np.array([tls_qi(power_at_sample(p, -67.0), TLS)
                       for p in p_dbm])
        qi = qi * (1 + 0.02 * rng.standard_normal(qi.shape))
        seed = TlsParams(n0_gamma2=1e4, p_c=1e-14, q_rl=1e5, rho=TLS.rho,
                         v=TLS.v, f0=TLS.f0, temperature=TLS.temperature)
        fit = fit_tls(list(zip(p_dbm, qi)), seed, attenuation_db=-67.0)
        assert fit.converged
        assert fit.params.n0_gamma2 == pytest.approx(TLS.n0_gamma2, rel=0.2)
        assert fit.params.q_rl == pytest.approx(TLS.q_rl, rel=0.1)

    def test_fit_validation(self):
        seed = TlsParams(n0_gamma2=1e4, p_c=1e-14, q_rl=1e5, rho=TLS.rho,
                         v=TLS.v, f0=TLS.f0, temperature=TLS.temperature)
        with pytest.raises(FitDataError, match="5"):
            fit_tls([(-60.0, 3e4)] * 4, seed)
        narrow = [(-60.0 + i, 3e4) for i in range(8)]
        with pytest.raises(FitDataError, match="span"):
            fit_tls(narrow, seed)


class TestScales:
    def test_phonon_number_reference(self):
        # one-port input-output steady state at Qi=34.5e3, Qe=528e3,
        # f0=4.449 GHz, P=1e-17 W, recomputed at 40 digits
        mode = ModeParams(f0=4.449e9, qi=34500.0, qe=528000.0)
        assert phonon_number(1e-17, mode) == pytest.approx(
            0.9641094531273581492319382902350173, rel=1e-12)

    def test_phonon_number_linear_in_power(self):
        mode = ModeParams(f0=4.449e9, qi=34500.0, qe=528000.0)
        assert phonon_number(2e-17, mode) == pytest.approx(
            2 * phonon_number(1e-17, mode), rel=1e-14)
        assert phonon_number(0.0, mode) == 0.0

    def test_coupling_reference(self):
        # g/2pi = beta e V/h: 0.2 x e x 20 nV -> 0.967 MHz
        assert coupling_estimate(0.2, 20e-9) == pytest.approx(
            967195.6968339672648953165701, rel=1e-12)
        assert coupling_estimate(0.0, 20e-9) == 0.0
        assert coupling_estimate(1.0, 20e-9) == pytest.approx(
            5 * coupling_estimate(0.2, 20e-9), rel=1e-14)

    def test_mean_free_path(self):
        assert mean_free_path(12.5) == pytest.approx(0.08, rel=1e-14)
        with pytest.raises(ValidationError, match="alpha_p"):
            mean_free_path(0.0)

    def test_power_conversions(self):
        assert dbm_to_watts(-30.0) == pytest.approx(1e-6, rel=1e-14)
        assert watts_to_dbm(1e-6) == pytest.approx(-30.0, abs=1e-12)
        assert watts_to_dbm(dbm_to_watts(-67.3)) == pytest.approx(
            -67.3, abs=1e-12)
        assert power_at_sample(-65.7, -67.0) == pytest.approx(
            dbm_to_watts(-132.7), rel=1e-14)
