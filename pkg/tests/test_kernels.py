"""Compiled and pure-python kernel backends must agree."""

import importlib

import numpy as np
import pytest

from sawres import kernels
from sawres._kernels_py import (background, model, model_and_jacobian,
                                reflection, reflection_multi)

try:
    from sawres import _kernels_cy
except ImportError:
    _kernels_cy = None

needs_cython = pytest.mark.skipif(_kernels_cy is None,
                                  reason="compiled kernels not built")


def random_case(rng, n=257):
    f0 = rng.uniform(1e9, 5e9)
    qi = 10 ** rng.uniform(4, 6)
    qe = 10 ** rng.uniform(4, 6)
    span = 20 * f0 * (1 / qi + 1 / qe)
    freqs = np.linspace(f0 - span / 2, f0 + span / 2, n)
    bgp = (rng.uniform(0.5, 1.2), rng.uniform(-1, 1) / span,
           rng.uniform(-3, 3), rng.uniform(-1, 1) * 5 / span)
    return freqs, bgp, f0, qi, qe


class TestPythonKernels:
    def test_model_composition(self):
        rng = np.random.default_rng(0)
        freqs, bgp, f0, qi, qe = random_case(rng)
        f_ref = freqs[freqs.shape[0] // 2]
        composed = background(freqs, *bgp, f_ref) * reflection(freqs, f0,
                                                               qi, qe)
        got = model(freqs, f0, qi, qe, *bgp, f_ref)
        assert np.allclose(got, composed, rtol=1e-14, atol=1e-14)

    def test_multi_is_product_of_singles(self):
        rng = np.random.default_rng(1)
        freqs = np.linspace(1e9, 1.01e9, 301)
        f0s = np.array([1.002e9, 1.005e9, 1.008e9])
        qis = np.array([5e4, 8e4, 1e5])
        qes = np.array([2e5, 3e5, 2.5e5])
        prod = np.ones_like(freqs, dtype=complex)
        for f0, qi, qe in zip(f0s, qis, qes):
            prod *= reflection(freqs, f0, qi, qe)
        assert np.allclose(reflection_multi(freqs, f0s, qis, qes), prod,
                           rtol=1e-13, atol=1e-14)

    def test_jacobian_model_column_consistency(self):
        rng = np.random.default_rng(2)
        freqs, bgp, f0, qi, qe = random_case(rng)
        f_ref = freqs[freqs.shape[0] // 2]
        s, jac = model_and_jacobian(freqs, f0, qi, qe, *bgp, f_ref)
        assert np.allclose(s, model(freqs, f0, qi, qe, *bgp, f_ref),
                           rtol=1e-14)
        assert jac.shape == (freqs.shape[0], 7)


@needs_cython
class TestBackendAgreement:
    def test_all_functions_agree(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            freqs, bgp, f0, qi, qe = random_case(rng)
            f_ref = freqs[freqs.shape[0] // 2]
            r_py = reflection(freqs, f0, qi, qe)
            r_cy = _kernels_cy.reflection(freqs, f0, qi, qe)
            assert np.allclose(r_py, r_cy, rtol=1e-13, atol=1e-15)
            b_py = background(freqs, *bgp, f_ref)
            b_cy = _kernels_cy.background(freqs, *bgp, f_ref)
            assert np.allclose(b_py, b_cy, rtol=1e-13, atol=1e-15)
            s_py, j_py = model_and_jacobian(freqs, f0, qi, qe, *bgp, f_ref)
            s_cy, j_cy = _kernels_cy.model_and_jacobian(freqs, f0, qi, qe,
                                                        *bgp, f_ref)
            assert np.allclose(s_py, s_cy, rtol=1e-13, atol=1e-15)
            assert np.allclose(j_py, j_cy, rtol=1e-12, atol=1e-15)

    def test_multi_agrees(self):
        freqs = np.linspace(4.39e9, 4.45e9, 2001)
        f0s = 4.42e9 + 3.64e6 * (np.arange(18) - 8.5)
        qis = np.full(18, 8e4)
        qes = np.full(18, 4e5)
        assert np.allclose(reflection_multi(freqs, f0s, qis, qes),
                           _kernels_cy.reflection_multi(freqs, f0s, qis,
                                                        qes),
                           rtol=1e-13, atol=1e-15)


class TestDispatch:
    def test_backend_name_is_exported(self):
        assert kernels.BACKEND in ("cython", "python")

    def test_env_override_forces_python(self, monkeypatch):
        monkeypatch.setenv("SAWRES_KERNELS", "python")
        mod = importlib.reload(kernels)
        try:
            assert mod.BACKEND == "python"
        finally:
            monkeypatch.delenv("SAWRES_KERNELS")
            importlib.reload(kernels)

    def test_wrappers_accept_lists(self):
        out = kernels.reflection([1e9, 1.000001e9], 1e9, 1e5, 1e5)
        assert out.dtype == np.complex128 and out.shape == (2,)
