import numpy as np
import pytest

from excichain.dynamics import (IntegrationError, IntegratorConfig,
                                OpenAccumulators, RngStream, advance_coupled,
                                advance_dephasing, advance_langevin,
                                advance_langevin_coupled, advance_open,
                                dephasing_step, langevin_step, rk4_step,
                                sample_exciton_initial, sample_initial_lattice,
                                thermalize)
from excichain.model import (ExcitonState, LatticeState, ModelParams,
                             SystemState, exciton_derivative, lattice_energy,
                             open_exciton_derivative, total_energy)
from excichain.observables import kinetic_temperature, participation_ratio


def coupled_params(L=32, **kw):
    base = dict(L=L, beta=1.0, chi_E=1.0, chi_J=1.0, T=1.0)
    base.update(kw)
    return ModelParams(**base)


def thermal_state(params, seed=0, kind="delta"):
    rng = RngStream(seed, 0).generator()
    lat = sample_initial_lattice(params, rng)
    thermalize(lat, params, rng, t0=float(params.L))
    return SystemState(lat, sample_exciton_initial(kind, params.L, rng)), rng


class TestIntegratorConfig:
    def test_defaults(self):
        cfg = IntegratorConfig()
        assert cfg.dt == 1e-3 and cfg.scheme == "coupled-rk4"

    @pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(record_stride=0),
                                        dict(scheme="euler")])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            IntegratorConfig(**kwargs)


class TestRngStream:
    def test_deterministic(self):
        a = RngStream(5, 3).generator().standard_normal(10)
        b = RngStream(5, 3).generator().standard_normal(10)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = RngStream(5, 0).generator().standard_normal(10)
        b = RngStream(5, 1).generator().standard_normal(10)
        assert not np.allclose(a, b)


class TestRk4Step:
    def test_matches_reference_derivative(self):
        # a single tiny step reduces to the reference right-hand side
        p = coupled_params(L=16)
        st, _ = thermal_state(p, seed=1, kind="random-phase")
        dt = 1e-8
        nxt = rk4_step(st, p, dt)
        db = (nxt.exciton.b - st.exciton.b) / dt
        np.testing.assert_allclose(db, exciton_derivative(st, p),
                                   rtol=0, atol=1e-6)

    def test_open_matches_reference(self):
        p = coupled_params(L=16, gamma_r=1e-3, Gamma=0.2, sink_index=3)
        st, _ = thermal_state(p, seed=2, kind="random-phase")
        dt = 1e-8
        nxt = rk4_step(st, p, dt)
        db = (nxt.exciton.b - st.exciton.b) / dt
        np.testing.assert_allclose(db, open_exciton_derivative(st, p),
                                   rtol=0, atol=1e-6)

    def test_advances_time(self):
        p = coupled_params(L=8)
        st = SystemState(LatticeState.zeros(8),
                         sample_exciton_initial("delta", 8))
        assert rk4_step(st, p, 1e-3).t == pytest.approx(1e-3)

    def test_non_finite_detection(self):
        p = coupled_params(L=8)
        st = SystemState(LatticeState(np.full(8, np.nan), np.zeros(8)),
                         sample_exciton_initial("delta", 8))
        with pytest.raises(IntegrationError):
            rk4_step(st, p, 1e-3)

    def test_norm_conserved_short(self):
        p = coupled_params(L=32)
        st, _ = thermal_state(p, seed=3)
        advance_coupled(st, p, 1e-3, 20_000)
        assert abs(st.exciton.norm - 1.0) < 1e-9

    def test_energy_momentum_conserved_short(self):
        p = coupled_params(L=32)
        st, _ = thermal_state(p, seed=4)
        e0 = total_energy(st, p)
        p0 = st.lattice.p.sum()
        advance_coupled(st, p, 1e-3, 20_000)
        assert abs(total_energy(st, p) - e0) / abs(e0) < 1e-7
        assert abs(st.lattice.p.sum() - p0) < 1e-10

    def test_gauge_property(self):
        # b -> (-1)^n b with J -> -J leaves densities invariant
        L = 8
        p = coupled_params(L=L)
        st, _ = thermal_state(p, seed=5, kind="random-phase")
        pg = p.replace(J0=-p.J0, chi_J=-p.chi_J)
        stg = st.copy()
        stg.exciton.b = st.exciton.b * (-1.0) ** np.arange(L)
        for _ in range(5):
            advance_coupled(st, p, 1e-3, 500)
            advance_coupled(stg, pg, 1e-3, 500)
            np.testing.assert_allclose(stg.exciton.density, st.exciton.density,
                                       atol=1e-12)
            np.testing.assert_allclose(stg.lattice.u, st.lattice.u, atol=1e-12)

    def test_decoupling(self):
        # chi = 0: the lattice trajectory ignores the excitation entirely
        p = coupled_params(L=16, chi_E=0.0, chi_J=0.0)
        st, _ = thermal_state(p, seed=6, kind="random-phase")
        st_no = st.copy()
        st_no.exciton.b[:] = 0.0
        advance_coupled(st, p, 1e-3, 2000)
        advance_coupled(st_no, p, 1e-3, 2000)
        np.testing.assert_array_equal(st.lattice.u, st_no.lattice.u)
        np.testing.assert_array_equal(st.lattice.p, st_no.lattice.p)


class TestOpenEvolution:
    def test_pure_exponential_decay(self):
        p = ModelParams(L=8, E0=0.0, J0=0.0, gamma_r=0.05)
        st = SystemState(LatticeState.zeros(8),
                         sample_exciton_initial("delta", 8))
        acc = OpenAccumulators()
        advance_open(st, p, 1e-3, 10_000, acc)
        assert st.exciton.norm == pytest.approx(np.exp(-2 * 0.05 * 10.0),
                                                rel=1e-9)

    def test_norm_bookkeeping_identity(self):
        p = coupled_params(L=24, gamma_r=1e-3, Gamma=0.1, sink_index=12)
        st, _ = thermal_state(p, seed=7)
        acc = OpenAccumulators()
        advance_open(st, p, 1e-3, 50_000, acc)
        balance = (2 * p.Gamma * acc.sink_time_integral
                   + 2 * p.gamma_r * acc.norm_time_integral
                   + st.exciton.norm)
        assert balance == pytest.approx(1.0, abs=1e-9)

    def test_norm_monotone(self):
        p = coupled_params(L=16, gamma_r=1e-3, Gamma=0.1, sink_index=0)
        st, _ = thermal_state(p, seed=8)
        acc = OpenAccumulators()
        last = st.exciton.norm
        for _ in range(20):
            advance_open(st, p, 1e-3, 500, acc)
            assert st.exciton.norm < last
            last = st.exciton.norm


class TestLangevin:
    def test_alpha_zero_equals_deterministic_rk4(self):
        p = ModelParams(L=16, beta=1.0, T=1.0, alpha=0.0)
        rng = np.random.default_rng(0)
        lat = LatticeState(rng.normal(0, 0.5, 16), rng.normal(0, 0.5, 16))
        stepped = langevin_step(lat, p, 1e-3, RngStream(0, 0).generator())
        st = SystemState(lat.copy(), ExcitonState(np.zeros(16, dtype=complex)))
        advance_coupled(st, p, 1e-3, 1)
        np.testing.assert_array_equal(stepped.u, st.lattice.u)
        np.testing.assert_array_equal(stepped.p, st.lattice.p)

    def test_zero_temperature_damps(self):
        p = ModelParams(L=16, beta=1.0, T=0.0, alpha=1.0)
        rng = np.random.default_rng(1)
        lat = LatticeState(rng.normal(0, 0.5, 16), rng.normal(0, 0.5, 16))
        gen = RngStream(1, 0).generator()
        e = lattice_energy(lat, p)
        for _ in range(10):
            advance_langevin(lat, p, 1e-3, 200, gen)
            e_new = lattice_energy(lat, p)
            assert e_new < e
            e = e_new

    def test_thermalize_determinism(self):
        p = ModelParams(L=32, beta=1.0, T=2.0)
        out = []
        for _ in range(2):
            rng = RngStream(9, 4).generator()
            lat = sample_initial_lattice(p, rng)
            thermalize(lat, p, rng)
            out.append((lat.u.copy(), lat.p.copy()))
        np.testing.assert_array_equal(out[0][0], out[1][0])
        np.testing.assert_array_equal(out[0][1], out[1][1])

    def test_chunking_invariance(self):
        # noise blocks are fixed, so caller chunking cannot change paths
        p = ModelParams(L=16, beta=1.0, T=1.5)
        lat1 = LatticeState.zeros(16)
        advance_langevin(lat1, p, 1e-3, 3000, RngStream(3, 0).generator())
        lat2 = LatticeState.zeros(16)
        gen = RngStream(3, 0).generator()
        for n in (1000, 500, 1500):
            advance_langevin(lat2, p, 1e-3, n, gen)
        np.testing.assert_array_equal(lat1.u, lat2.u)
        np.testing.assert_array_equal(lat1.p, lat2.p)

    @pytest.mark.slow
    def test_stationary_temperature(self):
        p = ModelParams(L=64, beta=1.0, T=1.0)
        snaps = []
        n_traj = 24
        for i in range(n_traj):
            rng = RngStream(17, i).generator()
            lat = sample_initial_lattice(p, rng)
            thermalize(lat, p, rng)
            rec = []
            for _ in range(10):
                advance_langevin(lat, p, 1e-3, 2000, rng)
                rec.append(lat.p.copy())
            snaps.append(rec)
        tk = np.mean([kinetic_temperature(
            np.asarray([snaps[i][j] for i in range(n_traj)]), p.M)
            for j in range(10)])
        assert tk == pytest.approx(1.0, rel=0.05)


class TestSamplers:
    def test_lattice_zero_temperature(self):
        p = ModelParams(L=16, T=0.0)
        lat = sample_initial_lattice(p, RngStream(0, 0).generator())
        np.testing.assert_array_equal(lat.u, 0.0)
        np.testing.assert_array_equal(lat.p, 0.0)

    def test_lattice_momentum_variance(self):
        p = ModelParams(L=10_000, T=2.5, M=2.0)
        lat = sample_initial_lattice(p, RngStream(1, 0).generator())
        np.testing.assert_array_equal(lat.u, 0.0)
        var = lat.p.var()
        # 3 sigma of the chi^2 sampling error
        assert abs(var - 5.0) < 3 * 5.0 * np.sqrt(2 / 10_000)

    def test_delta_state(self):
        exc = sample_exciton_initial("delta", 11)
        assert participation_ratio(exc) == pytest.approx(0.0)
        assert exc.norm == pytest.approx(1.0, abs=1e-12)
        assert abs(exc.b[5]) == 1.0

    def test_random_phase_state(self):
        exc = sample_exciton_initial("random-phase", 64,
                                     RngStream(2, 0).generator())
        assert exc.norm == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(exc.density, 1 / 64, atol=1e-15)
        assert participation_ratio(exc) == pytest.approx(63.0)

    def test_custom_state_normalized(self):
        exc = sample_exciton_initial("custom", 4,
                                     amplitudes=np.array([3.0, 0, 0, 4.0]))
        assert exc.norm == pytest.approx(1.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            sample_exciton_initial("plane-wave", 8)


class TestDephasing:
    def test_zero_temperature_is_deterministic(self):
        p = ModelParams(L=12, T=0.0, chi_E=0.0, chi_J=0.0)
        exc = sample_exciton_initial("delta", 12)
        a = exc.copy()
        advance_dephasing(a, p, 1e-3, 1000, RngStream(0, 0).generator())
        b = exc.copy()
        advance_dephasing(b, p, 1e-3, 1000, RngStream(99, 5).generator())
        np.testing.assert_array_equal(a.b, b.b)

    def test_single_site_phase_variance(self):
        # J = 0: each site accumulates a Wiener phase of variance 2 T t;
        # phases wrap, so compare through the circular coherence
        # |E exp(i phi)| = exp(-var/2) over many independent sites.
        p = ModelParams(L=4096, T=0.4, J0=0.0, E0=0.0, chi_E=0.0, chi_J=0.0)
        exc = ExcitonState(np.full(4096, 1 / 64.0, dtype=complex))
        t_end = 2.0
        advance_dephasing(exc, p, 1e-3, 2000, RngStream(4, 0).generator())
        r = np.abs(np.mean(np.exp(1j * np.angle(exc.b))))
        assert -2 * np.log(r) == pytest.approx(2 * p.T * t_end, rel=0.1)

    def test_norm_conserved_closed(self):
        p = ModelParams(L=16, T=2.0, chi_E=0.0, chi_J=0.0)
        exc = sample_exciton_initial("delta", 16)
        advance_dephasing(exc, p, 1e-3, 20_000, RngStream(5, 0).generator())
        assert exc.norm == pytest.approx(1.0, abs=1e-9)

    def test_open_bookkeeping(self):
        p = ModelParams(L=16, T=1.0, chi_E=0.0, chi_J=0.0, gamma_r=1e-3,
                        Gamma=0.1, sink_index=8)
        exc = sample_exciton_initial("delta", 16, site=0)
        acc = OpenAccumulators()
        advance_dephasing(exc, p, 1e-3, 50_000, RngStream(6, 0).generator(),
                          acc)
        balance = (2 * p.Gamma * acc.sink_time_integral
                   + 2 * p.gamma_r * acc.norm_time_integral + exc.norm)
        assert balance == pytest.approx(1.0, abs=1e-8)

    def test_requires_zero_coupling(self):
        p = ModelParams(L=8, T=1.0, chi_E=1.0)
        exc = sample_exciton_initial("delta", 8)
        with pytest.raises(ValueError):
            dephasing_step(exc, p, 1e-3, RngStream(0, 0).generator())


class TestCoupledThermalization:
    def test_prepares_thermal_lattice(self):
        p = ModelParams(L=64, beta=1.0, chi_E=1.0, chi_J=1.0, T=1.0)
        kin = []
        for i in range(12):
            rng = RngStream(31, i).generator()
            lat = sample_initial_lattice(p, rng)
            st = SystemState(lat, sample_exciton_initial("random-phase",
                                                         p.L, rng))
            advance_langevin_coupled(st, p, 1e-3, 64_000, rng)
            assert st.exciton.norm == pytest.approx(1.0, abs=1e-12)
            kin.append(st.lattice.p)
        tk = kinetic_temperature(np.asarray(kin), p.M)
        assert tk == pytest.approx(1.0, rel=0.30)
