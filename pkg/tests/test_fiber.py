import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import gaussian_linear_propagation, path_average_quadrature
from pdm_nfdm.errors import ConfigurationError, DivergenceError
from pdm_nfdm.fiber import (
    FieldState,
    FiberParams,
    NormalizationScales,
    analytic_osnr_db,
    dbm_to_watt,
    denormalize,
    edfa_amplify,
    gamma_eff,
    measure_osnr,
    noise_loading,
    normalization_scales,
    normalize,
    ssfm_normalized,
    ssfm_propagate,
)
from pdm_nfdm.nft import ContinuousSpectrum, DualPolSignal, TimeGrid, inverse_nft, nft_spectrum, propagate_spectrum
from pdm_nfdm.pmd import sample_pmd_realization


def gaussian_field(n=2048, dt=1e-12, width=10e-12, peak_power=1e-3, pol=(1.0, 0.5j)):
    grid = TimeGrid.centered(n, dt)
    env = math.sqrt(peak_power) * np.exp(-grid.t**2 / (2 * width**2))
    norm = math.sqrt(abs(pol[0]) ** 2 + abs(pol[1]) ** 2)
    return FieldState(pol[0] / norm * env, pol[1] / norm * env, grid)


def bandlimited_field(n, fs, bandwidth, power, rng):
    grid = TimeGrid.centered(n, 1 / fs)
    f = np.fft.fftfreq(n, 1 / fs)
    spec = (rng.standard_normal((2, n)) + 1j * rng.standard_normal((2, n))) * (np.abs(f) < bandwidth / 2)
    a = np.fft.ifft(spec, axis=-1)
    a *= math.sqrt(power / np.mean(np.sum(np.abs(a) ** 2, axis=0)))
    return FieldState(a[0], a[1], grid)


def rel_l2(x, y):
    return np.linalg.norm(x - y) / np.linalg.norm(y)


class TestParams:
    def test_engineering_units(self):
        p = FiberParams.from_engineering_units(pmd_ps_sqrt_km=0.1)
        assert p.alpha * 80e3 == pytest.approx(16 * math.log(10) / 10, rel=1e-14)
        assert p.alpha_db_km == pytest.approx(0.2, rel=1e-14)
        assert p.beta2 == pytest.approx(-2.15e-26)
        assert p.pmd_coeff * math.sqrt(2000e3) == pytest.approx(4.472136e-12, rel=1e-6)
        assert p.total_length == 2000e3

    @pytest.mark.parametrize(
        "kwargs",
        [dict(span_length=0), dict(n_spans=-1), dict(section_length=100e3), dict(pmd_coeff=-1), dict(alpha=-1)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            FiberParams(**kwargs)


class TestGammaEff:
    def test_lossless_limit(self):
        assert gamma_eff(1.3e-3, 0.0, 80e3) == 1.3e-3

    @given(st.floats(0.1, 10))
    def test_linear_in_gamma(self, c):
        alpha = FiberParams().alpha
        assert gamma_eff(c * 1.3e-3, alpha, 80e3) == pytest.approx(c * gamma_eff(1.3e-3, alpha, 80e3), rel=1e-14)

    def test_matches_quadrature(self):
        alpha = FiberParams().alpha
        ratio = gamma_eff(1.0, alpha, 80e3)
        assert abs(ratio - path_average_quadrature(alpha, 80e3)) <= 1e-10
        assert ratio < 1

    def test_transformed_lossless(self):
        p = FiberParams()
        t = p.transformed_lossless()
        assert t.alpha == 0 and t.gamma == pytest.approx(gamma_eff(p.gamma, p.alpha, p.span_length))


class TestNormalization:
    def test_scales_formula(self):
        p = FiberParams()
        s = normalization_scales(p)
        assert s.z0 == 80e3
        assert s.t0 == pytest.approx(math.sqrt(21.5e-27 * 80e3 / 2))
        assert s.a0 == pytest.approx(math.sqrt(2 / (8 / 9 * 1.3e-3 * 80e3)))

    def test_gamma_eff_flag_lossless(self):
        p = FiberParams(alpha=0.0)
        assert normalization_scales(p, True) == normalization_scales(p, False)

    def test_gamma_eff_raises_amplitude(self):
        p = FiberParams()
        assert normalization_scales(p, True).a0 > normalization_scales(p, False).a0

    def test_z0_scaling(self):
        p = FiberParams()
        s1 = normalization_scales(p, z0=50e3)
        s2 = normalization_scales(p, z0=100e3)
        assert s2.a0 == pytest.approx(s1.a0 / math.sqrt(2), rel=1e-14)
        assert s2.t0 == pytest.approx(s1.t0 * math.sqrt(2), rel=1e-14)

    @pytest.mark.parametrize("kwargs", [dict(beta2=0.0), dict(gamma=0.0)])
    def test_degenerate(self, kwargs):
        with pytest.raises(ConfigurationError):
            normalization_scales(FiberParams(**kwargs))

    def test_cw_amplitude(self):
        grid = TimeGrid.centered(16, 1e-12)
        fld = FieldState(np.full(16, math.sqrt(1e-3)), np.zeros(16), grid)
        sig = normalize(fld, NormalizationScales(1e-12, 0.0316227766, 80e3))
        np.testing.assert_allclose(np.abs(sig.q1), 1.0, rtol=1e-9)
        assert sig.grid.dt == pytest.approx(1.0)

    def test_round_trip(self):
        fld = gaussian_field()
        s = normalization_scales(FiberParams())
        back = denormalize(normalize(fld, s), s)
        np.testing.assert_allclose(back.stacked, fld.stacked, rtol=1e-15)
        assert back.grid.dt == pytest.approx(fld.grid.dt, rel=1e-15)

    def test_zero(self):
        grid = TimeGrid.centered(8, 1e-12)
        sig = normalize(FieldState(np.zeros(8), np.zeros(8), grid), normalization_scales(FiberParams()))
        assert not sig.stacked.any()


class TestSsfm:
    def test_linear_gaussian(self):
        params = FiberParams(alpha=0.0, gamma=0.0, span_length=80e3, n_spans=1)
        fld = gaussian_field(n=4096, dt=0.5e-12, width=10e-12)
        out = ssfm_propagate(fld, params, step_size=10e3)
        idx = np.arange(2048 - 600, 2048 + 600, 24)
        expected = gaussian_linear_propagation(fld.grid.t[idx], 10e-12, params.beta2, 80e3, math.sqrt(1e-3))
        pol = np.array([1.0, 0.5j]) / math.sqrt(1.25)
        got = out.stacked[:, idx]
        assert rel_l2(got, np.outer(pol, expected)) <= 1e-6

    def test_self_phase_modulation(self):
        params = FiberParams(alpha=0.0, beta2=0.0, span_length=80e3, n_spans=2)
        fld = gaussian_field(peak_power=0.05)
        out = ssfm_propagate(fld, params, step_size=7e3)
        p = np.abs(fld.a1) ** 2 + np.abs(fld.a2) ** 2
        expected = fld.stacked * np.exp(-1j * 8 / 9 * params.gamma * p * 160e3)
        assert np.max(np.abs(out.stacked - expected)) <= 1e-10

    def test_zero_input(self):
        grid = TimeGrid.centered(64, 1e-12)
        fld = FieldState(np.zeros(64), np.zeros(64), grid)
        out = ssfm_propagate(fld, FiberParams(n_spans=2), step_size=20e3, amplify=True, noise=False)
        assert not out.stacked.any()
        assert out.position == 160e3

    def test_energy_conservation_lossless(self):
        params = FiberParams(alpha=0.0)
        fld = gaussian_field(peak_power=5e-3, width=30e-12, n=4096)
        out = ssfm_propagate(fld, params, step_size=20e3)
        assert abs(out.energy() - fld.energy()) / fld.energy() <= 1e-8

    def test_loss_and_gain(self):
        params = FiberParams(n_spans=1, gamma=0.0)
        fld = gaussian_field()
        lossy = ssfm_propagate(fld, params, step_size=80e3)
        assert lossy.energy() / fld.energy() == pytest.approx(math.exp(-params.alpha * 80e3), rel=1e-12)
        amp = ssfm_propagate(fld, params, step_size=80e3, amplify=True, noise=False)
        assert amp.energy() == pytest.approx(fld.energy(), rel=1e-12)

    def test_second_order_step_convergence(self):
        params = FiberParams(n_spans=1, gamma=5e-3)
        fld = gaussian_field(peak_power=20e-3, width=20e-12)
        ref = ssfm_propagate(fld, params, step_size=80e3 / 1024).stacked
        errs = [rel_l2(ssfm_propagate(fld, params, step_size=80e3 / m).stacked, ref) for m in (16, 32, 64)]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert np.all(orders >= 1.9)

    def test_divergence_reported(self):
        grid = TimeGrid.centered(64, 1e-12)
        fld = FieldState(np.full(64, 1e200), np.zeros(64), grid)
        with pytest.raises(DivergenceError) as info:
            ssfm_propagate(fld, FiberParams(alpha=0.0, n_spans=2), step_size=80e3)
        assert info.value.position == 80e3

    def test_pmd_preserves_energy(self):
        params = FiberParams.from_engineering_units(alpha_db_km=0, gamma_per_w_km=0, n_spans=2, pmd_ps_sqrt_km=0.2)
        pmd = sample_pmd_realization(params, np.random.default_rng(4))
        fld = gaussian_field()
        out = ssfm_propagate(fld, params, pmd=pmd, step_size=1e3)
        assert abs(out.energy() - fld.energy()) / fld.energy() <= 1e-10

    def test_pmd_section_count_checked(self):
        params = FiberParams(n_spans=2)
        pmd = sample_pmd_realization(FiberParams(n_spans=1), np.random.default_rng(0))
        with pytest.raises(ConfigurationError):
            ssfm_propagate(gaussian_field(), params, pmd=pmd, step_size=1e3)

    def test_step_longer_than_section(self):
        params = FiberParams(n_spans=1)
        pmd = sample_pmd_realization(params, np.random.default_rng(0))
        with pytest.raises(ConfigurationError):
            ssfm_propagate(gaussian_field(), params, pmd=pmd, step_size=2e3)

    def test_noise_needs_rng(self):
        with pytest.raises(ConfigurationError):
            ssfm_propagate(gaussian_field(), FiberParams(n_spans=1), step_size=80e3, amplify=True)


class TestNormalizedChannel:
    def test_matches_physical_model(self):
        params = FiberParams(alpha=0.0, n_spans=1)
        s = normalization_scales(params)
        fld = gaussian_field(n=1024, dt=2e-12, width=20e-12, peak_power=20e-3)
        phys = ssfm_propagate(fld, params, step_size=1e3)
        norm = ssfm_normalized(normalize(fld, s), 1.0, 1e3 / 80e3)
        np.testing.assert_allclose(denormalize(norm, s).stacked, phys.stacked, atol=1e-12)

    def test_integrability(self):
        g = TimeGrid.centered(1024, 64 / 1024)
        lam = g.spectral_grid().lambdas
        cs = ContinuousSpectrum(0.3 * np.exp(-((lam - 1) ** 2) / 4), 0.2j * np.exp(-((lam + 1) ** 2) / 4), g.spectral_grid())
        rx = ssfm_normalized(inverse_nft(cs, g), 1.0, 1e-3)
        got = nft_spectrum(rx)
        want = propagate_spectrum(nft_spectrum(inverse_nft(cs, g)), 1.0, -1)
        assert rel_l2(got.stacked, want.stacked) <= 1e-3

    def test_wrong_kerr_sign_breaks_integrability(self):
        g = TimeGrid.centered(1024, 64 / 1024)
        lam = g.spectral_grid().lambdas
        cs = ContinuousSpectrum(0.5 * np.exp(-((lam - 1) ** 2) / 4), 0.4 * np.exp(-((lam + 1) ** 2) / 4), g.spectral_grid())
        rx = ssfm_normalized(inverse_nft(cs, g), 1.0, 1e-3, s=1)
        want = propagate_spectrum(nft_spectrum(inverse_nft(cs, g)), 1.0, 1)
        assert rel_l2(nft_spectrum(rx).stacked, want.stacked) > 1e-2


class TestAmplifier:
    def test_unity_gain(self):
        fld = gaussian_field()
        out = edfa_amplify(fld, 0.0, 6.2, np.random.default_rng(0))
        np.testing.assert_array_equal(out.stacked, fld.stacked)

    def test_noise_free_gain(self):
        fld = gaussian_field()
        out = edfa_amplify(fld, 16.0, 6.2, None, noise=False)
        assert out.power() == pytest.approx(10**1.6 * fld.power(), rel=1e-13)

    def test_negative_gain(self):
        with pytest.raises(ConfigurationError):
            edfa_amplify(gaussian_field(), -1.0, 6.2, None, noise=False)

    def test_noise_variance(self):
        grid = TimeGrid.centered(2**16, 1 / 224e9)
        fld = FieldState(np.zeros(grid.n_samples), np.zeros(grid.n_samples), grid)
        out = edfa_amplify(fld, 16.0, 6.2, np.random.default_rng(1), center_frequency=193.55e12)
        expected = (10**1.6 - 1) * 6.62607015e-34 * 193.55e12 * 10**0.62 / 2 * 224e9 / 2
        assert np.var(out.a1.real) == pytest.approx(expected, rel=0.02)
        assert np.var(out.a2.imag) == pytest.approx(expected, rel=0.02)

    def test_seeded(self):
        fld = gaussian_field()
        a = edfa_amplify(fld, 10.0, 5.0, np.random.default_rng(9))
        b = edfa_amplify(fld, 10.0, 5.0, np.random.default_rng(9))
        np.testing.assert_array_equal(a.stacked, b.stacked)

    def test_link_osnr_matches_budget(self):
        params = FiberParams(gamma=0.0)
        fld = bandlimited_field(2**15, 224e9, 56e9, dbm_to_watt(0.0), np.random.default_rng(2))
        out = ssfm_propagate(fld, params, rng=np.random.default_rng(3), step_size=80e3, amplify=True)
        measured = 10 * math.log10(measure_osnr(out, 56e9))
        expected = analytic_osnr_db(0.0, 16.0, 6.2, 25)
        assert abs(measured - expected) <= 0.2


class TestNoiseLoading:
    def field(self):
        return bandlimited_field(2**15, 224e9, 56e9, dbm_to_watt(-3.1), np.random.default_rng(5))

    def test_infinite_target(self):
        fld = self.field()
        out = noise_loading(fld, math.inf, np.random.default_rng(0))
        np.testing.assert_array_equal(out.stacked, fld.stacked)

    @pytest.mark.parametrize("target", [10.0, 20.0, 30.0])
    def test_target_reached(self, target):
        out = noise_loading(self.field(), target, np.random.default_rng(1), signal_bandwidth=56e9)
        assert abs(10 * math.log10(measure_osnr(out, 56e9)) - target) <= 0.1

    def test_noise_adds(self):
        out = noise_loading(self.field(), 20.0, np.random.default_rng(1), signal_bandwidth=56e9)
        out = noise_loading(out, 20.0, np.random.default_rng(2), signal_bandwidth=56e9)
        assert abs(10 * math.log10(measure_osnr(out, 56e9)) - (20 - 10 * math.log10(2))) <= 0.2

    def test_zero_signal(self):
        grid = TimeGrid.centered(64, 1e-12)
        with pytest.raises(ConfigurationError):
            noise_loading(FieldState(np.zeros(64), np.zeros(64), grid), 10.0, np.random.default_rng(0))
