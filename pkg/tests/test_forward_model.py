"""Forward model: phase-history response and the circulant dictionary operator.

The dictionary operators are checked against a dense unitary-DFT oracle built
from explicit exponentials (tests/oracles.py), never against np.fft itself.
"""

import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_dict_matrix, dense_gram_inverse_matrix
from psckit.core import (
    ComplexImage,
    PscSet,
    RadarConfig,
    ScatteringCenter,
    SparseCoeffs,
    ValidationError,
    vectorize,
)
from psckit.forward_model import (
    Dictionary,
    build_dictionary,
    dict_adjoint,
    dict_apply,
    gram_inverse_apply,
    psc_response,
    reconstruct_image,
)


def config_32(**kw):
    base = dict(
        center_freq_hz=1e10,
        bandwidth_hz=6e7,
        num_freq=48,
        center_aspect_rad=0.0,
        aspect_span_rad=6e-3,
        num_aspect=48,
        scene_extent_m=32.0,
        grid_h=32,
        grid_w=32,
    )
    base.update(kw)
    return RadarConfig(**base)


def window_dict(window, epsilon=1e-8):
    h, w = window.shape
    cfg = RadarConfig(1e9, 1e8, 4, 0.0, 1e-3, 4, float(h), h, w)
    return Dictionary(config=cfg, window_spectrum=ComplexImage(h, w, window),
                      epsilon=epsilon)


def coeffs_from(arr):
    arr = np.asarray(arr)
    return SparseCoeffs(arr.shape[0], arr.shape[1], arr)


class TestPscResponse:
    def test_single_center_zero_aspect(self):
        # one unit scatterer at (x0, 0) seen at aspect 0: column exp(-j 4 pi f x0 / c)
        cfg = RadarConfig(1e9, 2e8, 3, 0.0, 0.0, 1, 8.0, 8, 8)
        x0 = 1.0
        pscs = PscSet([ScatteringCenter(1.0, x0, 0.0)], 0, 0.0)
        out = psc_response(pscs, cfg)
        assert (out.height, out.width) == (3, 1)
        freqs = [0.9e9, 1e9, 1.1e9]
        for m, f in enumerate(freqs):
            want = cmath.exp(-1j * 4 * cmath.pi * f * x0 / cfg.c_mps)
            assert out.data[m, 0] == pytest.approx(want, abs=1e-12)

    def test_center_at_origin_constant(self):
        cfg = RadarConfig(1e9, 2e8, 4, 0.1, 0.2, 5, 8.0, 8, 8)
        pscs = PscSet([ScatteringCenter(2.0 + 0j, 0.0, 0.0)], 0, 0.0)
        out = psc_response(pscs, cfg)
        assert np.allclose(out.data, 2.0, atol=1e-14)

    def test_empty_set_is_zero(self):
        cfg = RadarConfig(1e9, 2e8, 4, 0.0, 0.1, 4, 8.0, 8, 8)
        out = psc_response(PscSet([], 0, 0.0), cfg)
        assert np.all(out.data == 0)

    def test_superposition(self):
        cfg = RadarConfig(1e9, 2e8, 6, 0.0, 0.05, 5, 8.0, 8, 8)
        a = PscSet([ScatteringCenter(1 + 1j, 1.0, -2.0)], 0, 0.0)
        b = PscSet([ScatteringCenter(0.5 - 2j, -3.0, 0.5)], 0, 0.0)
        both = PscSet(list(a.centers) + list(b.centers), 0, 0.0)
        assert np.allclose(psc_response(both, cfg).data,
                           psc_response(a, cfg).data + psc_response(b, cfg).data,
                           atol=1e-12)

    def test_center_outside_scene_rejected(self):
        cfg = RadarConfig(1e9, 2e8, 3, 0.0, 0.0, 1, 8.0, 8, 8)
        pscs = PscSet([ScatteringCenter(1.0, 5.0, 0.0)], 0, 0.0)  # |x| > 4
        with pytest.raises(ValidationError):
            psc_response(pscs, cfg)


class TestBuildDictionary:
    def test_known_bins_zero_aspect(self):
        # extent 8 m, bins 1/8 cyc/m; B = 0.25 c puts 5 samples exactly on
        # bins -2..2 of the u axis at aspect 0
        c = RadarConfig(1e9, 1e8, 4, 0.0, 1e-3, 4, 8.0, 8, 8).c_mps
        cfg = RadarConfig(c, 0.25 * c, 5, 0.0, 0.0, 1, 8.0, 8, 8)
        dic = build_dictionary(cfg, real_mode=False)
        win = dic.window_spectrum.data.real
        want = np.zeros((8, 8))
        for k in (-2, -1, 0, 1, 2):
            want[k % 8, 0] = 1.0
        assert np.array_equal(win, want)

    def test_indicator_and_hermitian_symmetry(self):
        cfg = config_32()
        raw = build_dictionary(cfg, real_mode=False).window_spectrum.data
        assert set(np.unique(raw.real)) <= {0.0, 1.0}
        assert np.all(raw.imag == 0)
        sym = build_dictionary(cfg, real_mode=True).window_spectrum.data
        mirrored = np.roll(np.flip(sym, axis=(0, 1)), shift=(1, 1), axis=(0, 1))
        assert np.array_equal(sym, np.conj(mirrored))
        # symmetrized support contains the raw support
        assert np.all(sym.real >= raw.real)

    def test_psf_energy_ratio_matches_support_fraction(self):
        # for an indicator window, ||psf||^2 / psf_peak^2 = 1 / support fraction;
        # psf evaluated through the dense oracle matrix
        c = RadarConfig(1e9, 1e8, 4, 0.0, 1e-3, 4, 8.0, 8, 8).c_mps
        cfg = RadarConfig(c, 0.25 * c, 5, 0.0, 0.0, 1, 8.0, 8, 8)
        dic = build_dictionary(cfg, real_mode=True)
        win = dic.window_spectrum.data
        s = win.real.sum()
        n = win.size
        psi = dense_dict_matrix(win)
        psf = psi[:, 0]
        ratio = float(np.sum(np.abs(psf) ** 2) / np.abs(psf[0]) ** 2)
        assert ratio == pytest.approx(n / s, rel=1e-10)

    def test_band_exceeding_nyquist_rejected(self):
        c = 2.99792458e8
        cfg = RadarConfig(c, 1.5 * c, 9, 0.0, 0.0, 1, 8.0, 8, 8)  # u beyond +-h/2 bins
        with pytest.raises(ValidationError):
            build_dictionary(cfg)

    def test_taper_values(self):
        cfg = config_32()
        plain = build_dictionary(cfg, real_mode=True)
        tapered = build_dictionary(cfg, real_mode=True, taper=True)
        w0 = plain.window_spectrum.data.real
        w1 = tapered.window_spectrum.data.real
        assert np.array_equal(w1 > 0, w0 > 0)  # same support
        assert np.all(w1 <= 1.0 + 1e-12) and np.all(w1 >= 0.0)
        assert np.any(w1 < w0)  # actually tapers
        # taper must keep the window Hermitian so real mode stays real
        mirrored = np.roll(np.flip(w1, axis=(0, 1)), shift=(1, 1), axis=(0, 1))
        assert np.allclose(w1, mirrored, atol=1e-12)


class TestOperators:
    def test_all_ones_window_is_identity(self):
        win = np.ones((6, 6), dtype=complex)
        dic = window_dict(win)
        o = np.zeros((6, 6))
        o[2, 3] = 1.0
        out = dict_apply(dic, coeffs_from(o))
        want = np.zeros(36)
        want[2 * 6 + 3] = 1.0
        assert np.allclose(out, want, atol=1e-12)

    def test_apply_matches_dense_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            win = (rng.random((8, 8)) < 0.4).astype(complex)
            dic = window_dict(win)
            psi = dense_dict_matrix(win)
            o = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
            got = dict_apply(dic, coeffs_from(o))
            want = psi @ o.ravel()
            assert np.linalg.norm(got - want) <= 1e-8 * max(np.linalg.norm(want), 1e-12)

    def test_adjoint_matches_dense_oracle(self):
        rng = np.random.default_rng(8)
        win = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        dic = window_dict(win)
        psi = dense_dict_matrix(win)
        r = rng.normal(size=64) + 1j * rng.normal(size=64)
        got = vectorize(dict_adjoint(dic, r))
        want = psi.conj().T @ r
        assert np.linalg.norm(got - want) <= 1e-8 * np.linalg.norm(want)

    def test_gram_inverse_matches_dense_oracle(self):
        rng = np.random.default_rng(9)
        win = (rng.random((8, 8)) < 0.5).astype(complex)
        eps = 0.5
        dic = window_dict(win, epsilon=eps)
        ginv = dense_gram_inverse_matrix(win, eps)
        v = rng.normal(size=64) + 1j * rng.normal(size=64)
        got = gram_inverse_apply(dic, v)
        want = ginv @ v
        assert np.linalg.norm(got - want) <= 1e-8 * np.linalg.norm(want)

    def test_adjoint_identity(self):
        rng = np.random.default_rng(10)
        win = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        dic = window_dict(win)
        for _ in range(20):
            x = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
            y = rng.normal(size=64) + 1j * rng.normal(size=64)
            lhs = np.vdot(y, dict_apply(dic, coeffs_from(x)))
            rhs = np.vdot(vectorize(dict_adjoint(dic, y)), x.ravel())
            assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)

    def test_real_window_self_adjoint(self):
        rng = np.random.default_rng(11)
        win = rng.normal(size=(8, 8)).astype(complex)
        dic = window_dict(win)
        r = rng.normal(size=64) + 1j * rng.normal(size=64)
        fwd = dict_apply(dic, coeffs_from(r.reshape(8, 8)))
        adj = vectorize(dict_adjoint(dic, r))
        assert np.allclose(fwd, adj, atol=1e-12)

    def test_real_mode_stays_real(self):
        dic = build_dictionary(config_32(), real_mode=True)
        o = np.zeros((32, 32))
        o[10, 12] = 3.0
        out = dict_apply(dic, coeffs_from(o))
        assert not np.iscomplexobj(out)

    def test_gram_inverse_all_ones_eps_zero(self):
        win = np.ones((4, 4), dtype=complex)
        dic = window_dict(win, epsilon=0.0)
        v = np.arange(16, dtype=float)
        assert np.allclose(gram_inverse_apply(dic, v), v, atol=1e-12)

    def test_gram_inverse_zero_window_pure_regularization(self):
        win = np.zeros((4, 4), dtype=complex)
        eps = 0.25
        dic = window_dict(win, epsilon=eps)
        v = np.arange(16, dtype=float)
        assert np.allclose(gram_inverse_apply(dic, v), v / eps, atol=1e-12)

    def test_reconstruct_image_is_magnitude(self):
        dic = build_dictionary(config_32(), real_mode=False)
        o = np.zeros((32, 32))
        o[16, 16] = 2.0
        img = reconstruct_image(dic, coeffs_from(o))
        assert np.allclose(img.data.ravel(), np.abs(dict_apply(dic, coeffs_from(o))))
        assert np.all(img.data >= 0)

    @given(st.integers(0, 2 ** 31), st.floats(0.1, 3.0))
    @settings(max_examples=20, deadline=None)
    def test_energy_bound_property(self, seed, scale):
        # ||psi o|| <= max|d| * ||o||
        rng = np.random.default_rng(seed)
        win = scale * (rng.random((8, 8)) < 0.5).astype(complex)
        dic = window_dict(win)
        o = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        out = dict_apply(dic, coeffs_from(o))
        bound = np.abs(win).max() * np.linalg.norm(o) + 1e-9
        assert np.linalg.norm(out) <= bound

    @given(st.integers(0, 2 ** 31))
    @settings(max_examples=20, deadline=None)
    def test_linearity_property(self, seed):
        rng = np.random.default_rng(seed)
        win = (rng.random((6, 6)) < 0.5).astype(complex)
        dic = window_dict(win)
        a, b = rng.normal(size=(6, 6)), rng.normal(size=(6, 6))
        lhs = dict_apply(dic, coeffs_from(2.0 * a + 3.0 * b))
        rhs = 2.0 * dict_apply(dic, coeffs_from(a)) + 3.0 * dict_apply(dic, coeffs_from(b))
        assert np.allclose(lhs, rhs, atol=1e-10)
