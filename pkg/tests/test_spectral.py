import numpy as np
import pytest

from excichain.dynamics import RngStream, advance_coupled, advance_langevin, \
    sample_initial_lattice, thermalize
from excichain.model import ExcitonState, LatticeState, ModelParams, SystemState
from excichain.spectral import (SpectrumGrid, log_binned, lorentzian_fit,
                                mode_projection, power_spectrum)


class TestModeProjection:
    def test_cosine_orthogonality(self):
        L, m0 = 64, 5
        n = np.arange(L)
        f = np.cos(2 * np.pi * m0 * n / L)[None, :]
        for m in range(1, 10):
            a = mode_projection(f, m)[0]
            if m == m0:
                assert abs(a) == pytest.approx(L / 2, rel=1e-12)
            else:
                assert abs(a) < 1e-10

    def test_constant_field(self):
        f = np.full((3, 32), 1.7)
        assert abs(mode_projection(f, 0)[0]) == pytest.approx(1.7 * 32)
        for m in (1, 5, 16):
            assert np.all(np.abs(mode_projection(f, m)) < 1e-10)

    def test_conjugate_symmetry_real_field(self):
        rng = np.random.default_rng(0)
        f = rng.normal(size=(10, 24))
        for m in (1, 3, 11):
            a = mode_projection(f, m)
            b = mode_projection(f, 24 - m)
            np.testing.assert_allclose(b, np.conj(a), atol=1e-10)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            mode_projection(np.zeros((2, 8)), 8)


class TestPowerSpectrum:
    def test_pure_tone_peak(self):
        dt = 0.1
        t = np.arange(4096) * dt
        w0 = 1.2
        omega, psd = power_spectrum(np.exp(-1j * w0 * t), dt)
        i_pk = int(np.argmax(psd))
        assert omega[i_pk] == pytest.approx(w0, abs=omega[1])
        # leakage from the off-bin tone stays within a few bins
        assert psd[i_pk - 3:i_pk + 4].sum() / psd.sum() > 0.9

    def test_white_noise_flat(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=65536)
        omega, psd = power_spectrum(x, 0.05)
        smooth = np.array_split(psd[1:], 16)
        means = np.array([s.mean() for s in smooth])
        assert means.max() / means.min() < 1.3

    def test_parseval(self):
        rng = np.random.default_rng(2)
        for n in (4096, 4097):  # even and odd record lengths
            x = rng.normal(size=n) + 1j * rng.normal(size=n)
            omega, psd = power_spectrum(x, 0.1)
            var = np.var(x)
            assert psd.sum() == pytest.approx(var, rel=1e-6)

    def test_variance_scaling_with_realizations(self):
        rng = np.random.default_rng(3)
        flat_var = []
        for n_real in (4, 16):
            psds = [power_spectrum(rng.normal(size=2048), 0.1)[1]
                    for _ in range(n_real)]
            mean_psd = np.mean(psds, axis=0)
            flat_var.append(np.var(mean_psd[1:]))
        assert flat_var[0] / flat_var[1] == pytest.approx(4.0, rel=0.5)

    def test_empty_series(self):
        with pytest.raises(ValueError):
            power_spectrum(np.array([]), 0.1)


class TestLorentzianFit:
    def test_exact_self_consistency(self):
        omega = np.linspace(0, 3, 600)
        center, hw, amp = 1.1, 0.07, 4.2
        power = amp * hw**2 / ((omega - center) ** 2 + hw**2)
        fit = lorentzian_fit(omega, power)
        assert fit.center == pytest.approx(center, abs=1e-6)
        assert fit.half_width == pytest.approx(hw, abs=1e-6)
        assert fit.amplitude == pytest.approx(amp, rel=1e-6)
        assert fit.residual < 1e-9

    def test_ou_process_width(self):
        # Ornstein-Uhlenbeck series has a Lorentzian PSD of half-width lam;
        # average several realizations to tame periodogram noise
        rng = np.random.default_rng(4)
        lam, dt, n = 0.5, 0.05, 2**15
        decay = np.exp(-lam * dt)
        psds = []
        for _ in range(8):
            drv = np.sqrt(1 - decay**2) * rng.normal(size=n)
            x = np.empty(n)
            x[0] = rng.normal()
            for i in range(1, n):
                x[i] = x[i - 1] * decay + drv[i]
            omega, psd = power_spectrum(x, dt)
            psds.append(psd)
        mean_psd = np.mean(psds, axis=0)
        sel = omega < 8 * lam
        fit = lorentzian_fit(omega[sel], mean_psd[sel])
        assert abs(fit.center) < 0.2 * lam
        assert fit.half_width == pytest.approx(lam, rel=0.25)


class TestSpectrumGrid:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            SpectrumGrid(np.array([1]), np.array([0.1]), np.zeros(4),
                         np.zeros((2, 4)), 100.0, 1, 0.1)

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            SpectrumGrid(np.array([1]), np.array([0.1]), np.zeros(4),
                         -np.ones((1, 4)), 100.0, 1, 0.1)

    def test_slice(self):
        grid = SpectrumGrid(np.array([1, 2]), np.array([0.1, 0.2]),
                            np.arange(4.0), np.arange(8.0).reshape(2, 4),
                            100.0, 3, 0.1)
        omega, row = grid.slice(2)
        np.testing.assert_array_equal(row, [4, 5, 6, 7])
        with pytest.raises(KeyError):
            grid.slice(9)


class TestHarmonicChainSpectrum:
    def test_mode_peak_at_dispersion_frequency(self):
        # thermal harmonic ring: PSD of mode m peaks at 2 sin(k/2)
        L, m = 64, 4
        params = ModelParams(L=L, beta=0.0, T=0.5)
        rng = RngStream(11, 0).generator()
        lat = sample_initial_lattice(params, rng)
        thermalize(lat, params, rng)
        state = SystemState(lat, ExcitonState(np.zeros(L, dtype=complex)))
        stride, n_samples = 0.2, 8192
        rec = np.empty((n_samples, L))
        for j in range(n_samples):
            advance_coupled(state, params, 1e-3, 200)
            rec[j] = state.lattice.u
        omega, psd = power_spectrum(mode_projection(rec, m), stride)
        w_peak = omega[np.argmax(psd)]
        w_exact = 2 * np.sin(np.pi * m / L)
        assert w_peak == pytest.approx(w_exact, abs=3 * omega[1])


class TestLogBinned:
    def test_preserves_level_of_flat_psd(self):
        omega = np.linspace(0.01, 10, 5000)
        power = np.full_like(omega, 2.5)
        ob, pb = log_binned(omega, power)
        np.testing.assert_allclose(pb, 2.5, rtol=1e-12)
        assert ob.size < omega.size
