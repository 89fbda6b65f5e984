import numpy as np
import pytest

from machlab.compressible import (
    TAYLOR_GREEN,
    CFLError,
    CompressibleModel,
    CompressibleState,
    acoustic_propagate,
    cfl_dt,
    default_stream_modes,
    h_eps,
    ill_prepared_init,
    rhs,
    step,
    well_prepared_init,
)
from machlab.diagnostics import energies, lin_op, lin_op_coeffs
from machlab.leray import Q
from machlab.pressure import PressureLaw, VacuumError
from machlab.spectral import (
    EVEN,
    ScalarField,
    VectorField,
    gradient,
    make_grid,
    random_scalar,
    random_vector,
    sobolev_norm,
    spectral_norm,
)

LAW = PressureLaw.gamma_law(1.4)


def _state(grid, rho_f, v, eps=0.1):
    par = EVEN if grid.is_channel else None
    rho = ScalarField.from_function(grid, rho_f, par) if callable(rho_f) else rho_f
    return CompressibleState(rho, v, eps)


def _random_state(grid, rng, eps=0.1, amp=0.3):
    rho = amp * random_scalar(grid, rng)
    return CompressibleState(rho, amp * random_vector(grid, rng), eps)


class TestState:
    @pytest.mark.parametrize("eps", [0.0, -0.1, 0.51])
    def test_eps_range(self, torus, eps):
        with pytest.raises(ValueError):
            _state(torus, lambda X, Y: 0 * X, VectorField.zeros(torus), eps)

    def test_positive_density(self, torus):
        with pytest.raises(VacuumError):
            _state(torus, lambda X, Y: -20 + 0 * X, VectorField.zeros(torus), 0.1)

    def test_array_round_trip(self, grid, rng):
        s = _random_state(grid, rng)
        back = CompressibleState.from_array(grid, s.to_array(), s.epsilon)
        assert np.array_equal(back.to_array(), s.to_array())


class TestHeps:
    def test_field_evaluation(self, torus):
        rho = ScalarField.from_function(torus, lambda X, Y: np.cos(X))
        h = h_eps(rho, 0.1, LAW)
        X, _ = torus.mesh
        exact = LAW.h_eps(np.cos(X), 0.1)
        assert np.max(np.abs(h.values - exact)) < 1e-10

    def test_gamma_two(self, grid, rng):
        rho = random_scalar(grid, rng)
        assert sobolev_norm(h_eps(rho, 0.2, PressureLaw.gamma_law(2.0))) < 1e-13


class TestRhs:
    def test_well_prepared_cancellation(self, torus):
        st = well_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, 0.05)
        d_rho, d_v = rhs(st, LAW)
        assert sobolev_norm(d_rho) < 1e-13
        # sin x sin y: v.grad v = (sin 2x, sin 2y)/2
        X, Y = torus.mesh
        assert np.max(np.abs(d_v.u.values + 0.5 * np.sin(2 * X))) < 1e-13
        assert np.max(np.abs(d_v.w.values + 0.5 * np.sin(2 * Y))) < 1e-13

    def test_density_cosine(self, torus):
        eps = 0.1
        st = _state(torus, lambda X, Y: np.cos(X), VectorField.zeros(torus), eps)
        d_rho, d_v = rhs(st, LAW)
        X, _ = torus.mesh
        expected = (LAW.h_eps(np.cos(X), eps) + 1 / eps) * np.sin(X)
        assert sobolev_norm(d_rho) < 1e-13
        assert np.max(np.abs(d_v.u.values - expected)) < 1e-9
        assert sobolev_norm(d_v.w) < 1e-13

    def test_potential_flow(self, torus):
        eps = 0.1
        v = gradient(ScalarField.from_function(torus, lambda X, Y: np.cos(X)))
        st = _state(torus, lambda X, Y: 0 * X, v, eps)
        d_rho, _ = rhs(st, LAW)
        X, _ = torus.mesh
        # -div(v)/eps with div grad cos x = -cos x
        assert np.max(np.abs(d_rho.values - np.cos(X) / eps)) < 1e-11

    def test_scaling_relation(self, torus, rng):
        """|eps ||d_t U|| - ||L U||| <= C eps ||U|| ||(h, v)|| with C stable in eps."""
        rho0 = 0.5 * random_scalar(torus, rng, kmax=4)
        v0 = 0.5 * random_vector(torus, rng, kmax=4)
        consts = []
        for eps in (0.08, 0.04, 0.02, 0.01):
            m = CompressibleModel(torus, LAW, eps)
            y = CompressibleState(rho0, v0, eps).to_array()
            worst = 0.0
            for _ in range(10):
                lhs = abs(eps * spectral_norm(torus, m.rhs(y), 2)
                          - spectral_norm(torus, lin_op_coeffs(torus, y), 2))
                h = torus.from_padded(LAW.h_eps(torus.to_padded(y[0]), eps))
                scale = eps * spectral_norm(torus, y, 2) * spectral_norm(torus, np.stack([h, y[1], y[2]]), 2)
                worst = max(worst, lhs / scale)
                y = m.step(y, eps / 4)
            consts.append(worst)
        assert max(consts) / min(consts) < 2.0


class TestAcoustic:
    def test_zero_dt(self, grid, rng):
        s = _random_state(grid, rng)
        assert np.array_equal(acoustic_propagate(s, 0.0).to_array(), s.to_array())

    @pytest.mark.parametrize("kx,ky", [(1, 0), (2, 3), (0, 4)])
    def test_full_period(self, torus, kx, ky):
        eps = 0.07
        rho = ScalarField.from_function(torus, lambda X, Y: np.cos(kx * X + ky * Y))
        v = VectorField.from_functions(torus, lambda X, Y: 0.3 * np.sin(kx * X + ky * Y),
                                       lambda X, Y: 0.2 * np.cos(kx * X + ky * Y))
        s = CompressibleState(rho, v, eps)
        out = acoustic_propagate(s, 2 * np.pi * eps / np.hypot(kx, ky))
        assert np.max(np.abs(out.to_array() - s.to_array())) < 1e-12

    def test_channel_full_period(self, channel):
        eps = 0.1
        rho = ScalarField.from_function(channel, lambda X, Y: np.cos(X) * np.cos(Y), EVEN)
        s = CompressibleState(rho, VectorField.zeros(channel), eps)
        out = acoustic_propagate(s, 2 * np.pi * eps / np.sqrt(2))
        assert np.max(np.abs(out.to_array() - s.to_array())) < 1e-12
        assert out.v.wall_flux() < 1e-12

    def test_per_mode_isometry(self, grid, rng):
        s = _random_state(grid, rng, eps=0.03)
        out = acoustic_propagate(s, 0.37)
        a, b = s.to_array(), out.to_array()
        ea = np.sum(np.abs(a) ** 2, axis=0)
        eb = np.sum(np.abs(b) ** 2, axis=0)
        assert np.max(np.abs(ea - eb)) <= 1e-13 * np.max(ea)
        # the transverse (Leray) velocity is untouched
        assert sobolev_norm((s.v - Q(s.v)) - (out.v - Q(out.v))) < 1e-13


class TestStep:
    def test_zero_fixed_point(self, grid):
        par = EVEN if grid.is_channel else None
        s = CompressibleState(ScalarField.zeros(grid, par), VectorField.zeros(grid), 0.1)
        assert np.max(np.abs(step(s, 0.01, LAW).to_array())) == 0.0

    def test_time_advances(self, torus):
        s = well_prepared_init(torus, LAW, TAYLOR_GREEN, 0.5, 0.1)
        assert step(s, 0.01, LAW).time == pytest.approx(0.01)

    def test_cfl_violation(self, torus):
        s = well_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, 0.1)
        with pytest.raises(CFLError):
            step(s, 10 * cfl_dt(s, LAW, dt_max=1.0), LAW, dt_max=1.0)

    def test_second_order(self, grid):
        eps = 0.05
        s = ill_prepared_init(grid, LAW, default_stream_modes(3), 0.5, eps, amplitude=0.5)
        m = CompressibleModel(grid, LAW, eps)
        T = 0.2

        def run(n):
            y = s.to_array()
            for _ in range(n):
                y = m.step(y, T / n)
            return y

        ref = run(8 * 64)
        errs = [spectral_norm(grid, run(n) - ref) for n in (16, 32, 64)]
        slope = np.polyfit(np.log([T / 16, T / 32, T / 64]), np.log(errs), 1)[0]
        assert slope >= 1.9

    def test_mass_and_walls(self, grid, rng):
        s = _random_state(grid, rng, eps=0.05, amp=0.3)
        m = CompressibleModel(grid, LAW, s.epsilon)
        y = s.to_array()
        mass0 = y[0][0, 0].real
        n, dt = 50, 0.02
        for _ in range(n):
            y = m.step(y, dt)
        assert abs(y[0][0, 0].real - mass0) * grid.area <= 1e-11 * n * dt * max(1.0, sobolev_norm(s.rho))
        end = CompressibleState.from_array(grid, y, s.epsilon)
        assert end.v.wall_flux() <= 1e-9


class TestCFL:
    def test_rest_state_hits_cap(self, torus):
        s = CompressibleState(ScalarField.zeros(torus), VectorField.zeros(torus), 0.1)
        assert cfl_dt(s, LAW, dt_max=0.07) == 0.07

    def test_velocity_doubling(self, torus):
        s1 = well_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, 0.1)
        s2 = well_prepared_init(torus, LAW, TAYLOR_GREEN, 2.0, 0.1)
        assert cfl_dt(s2, LAW, 1.0) == pytest.approx(cfl_dt(s1, LAW, 1.0) / 2, rel=1e-12)

    def test_independent_of_eps(self, torus):
        a = well_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, 0.1)
        b = well_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, 0.05)
        assert cfl_dt(a, LAW, 1.0) == cfl_dt(b, LAW, 1.0)


class TestInitialData:
    def test_taylor_green_velocity(self, torus):
        s = well_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, 0.1)
        X, Y = torus.mesh
        assert np.max(np.abs(s.v.u.values - np.sin(X) * np.cos(Y))) < 1e-13
        assert np.max(np.abs(s.v.w.values + np.cos(X) * np.sin(Y))) < 1e-13
        div, grad = lin_op(s)
        assert sobolev_norm(div) < 1e-12 and sobolev_norm(grad) < 1e-11

    def test_channel_well_prepared(self, channel):
        s = well_prepared_init(channel, LAW, default_stream_modes(0), 1.0, 0.1)
        assert s.v.wall_flux() < 1e-12
        assert sobolev_norm(lin_op(s)[0]) < 1e-11

    def test_well_prepared_et0_eps_independent(self, torus):
        vals = [energies(well_prepared_init(torus, LAW, default_stream_modes(0), 1.0, e), LAW)
                for e in (0.08, 0.04, 0.02, 0.01)]
        et0 = [v.et0 for v in vals]
        assert max(et0) / min(et0) < 1.01
        assert max(v.et0 / v.e0**2 for v in vals) / min(v.et0 / v.e0**2 for v in vals) < 1.01

    def test_ill_prepared_lin_norm(self, torus):
        s = ill_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, 0.1)
        div, grad = lin_op(s)
        total = np.hypot(sobolev_norm(div), sobolev_norm(grad))
        assert total == pytest.approx(np.pi * np.sqrt(2), rel=1e-12)

    def test_ill_prepared_a_zero(self, grid):
        a = ill_prepared_init(grid, LAW, TAYLOR_GREEN, 0.0, 0.1)
        b = well_prepared_init(grid, LAW, TAYLOR_GREEN, 1.0, 0.1)
        assert np.array_equal(a.to_array(), b.to_array())

    def test_ill_prepared_et0_scales(self, torus):
        prods = [e * energies(ill_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, e, rho_modes=((0, 1, 1.0, 0.0),)), LAW).et0
                 for e in (0.08, 0.04, 0.02, 0.01)]
        assert max(prods) / min(prods) < 1.2

    def test_default_modes_reproducible(self):
        assert default_stream_modes(5) == default_stream_modes(5)
        assert default_stream_modes(5) != default_stream_modes(6)
        assert len(default_stream_modes(0, n_modes=3)) == 4
        with pytest.raises(ValueError):
            default_stream_modes(0, n_modes=99)
