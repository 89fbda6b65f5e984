import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from machlab.compressible import (
    TAYLOR_GREEN,
    CompressibleModel,
    CompressibleState,
    default_stream_modes,
    stream_function,
    well_prepared_init,
)
from machlab.diagnostics import (
    CadenceWarning,
    EnergyPair,
    TimeAverageAccumulator,
    averaged_fast,
    averaged_slow_fast,
    bilinear_B,
    energies,
    inverse_r_transform,
    lin_op,
    r_transform,
    sigma_bounded_radius,
    sigma_entries,
    sigma_matrix,
    sigma_radius,
    slow_fast_terms,
    vorticity_residual,
)
from machlab.incompressible import IncompressibleModel
from machlab.leray import P
from machlab.pressure import PressureLaw, VacuumError
from machlab.spectral import (
    EVEN,
    ScalarField,
    VectorField,
    gradient,
    make_grid,
    perp_gradient,
    random_scalar,
    random_vector,
    sobolev_norm,
    spectral_inner,
)

LAW = PressureLaw.gamma_law(1.4)


def _rho_par(grid):
    return EVEN if grid.is_channel else None


def _smooth_v(grid, amplitude=1.0):
    return perp_gradient(amplitude * stream_function(grid, default_stream_modes(0)))


class TestLinOp:
    def test_divergence_free_zero_density(self, grid):
        s = CompressibleState(ScalarField.zeros(grid, _rho_par(grid)), _smooth_v(grid), 0.1)
        d, gr = lin_op(s)
        assert sobolev_norm(d) < 1e-13 and sobolev_norm(gr) == 0.0

    def test_cosine_density(self, torus):
        rho = ScalarField.from_function(torus, lambda X, Y: np.cos(X))
        d, gr = lin_op(CompressibleState(rho, VectorField.zeros(torus), 0.1))
        X, _ = torus.mesh
        assert sobolev_norm(d) == 0.0
        assert np.max(np.abs(gr.u.values + np.sin(X))) < 1e-13
        assert np.max(np.abs(gr.w.values)) < 1e-13

    def test_skew(self, grid, rng):
        for _ in range(5):
            rho = random_scalar(grid, rng, _rho_par(grid)) * 0.1
            s = CompressibleState(rho, random_vector(grid, rng), 0.1)
            d, gr = lin_op(s)
            y = s.to_array()
            ly = np.stack([d.coefficients, gr.u.coefficients, gr.w.coefficients])
            assert abs(spectral_inner(grid, y, ly)) <= 1e-11


class TestEnergies:
    def test_well_prepared_eps_independent(self, torus):
        et = [energies(well_prepared_init(torus, LAW, default_stream_modes(0), 0.5, e), LAW).et0
              for e in (0.08, 0.04, 0.02, 0.01)]
        assert (max(et) - min(et)) / max(et) < 0.01

    def test_zero_state(self, grid):
        s = CompressibleState(ScalarField.zeros(grid, _rho_par(grid)), VectorField.zeros(grid), 0.1)
        e = energies(s, LAW)
        assert (e.e0, e.et0, e.m) == (0.0, 0.0, 3)

    def test_low_order_rejected(self, torus):
        s = well_prepared_init(torus, LAW)
        with pytest.raises(ValueError):
            energies(s, LAW, m=2)

    def test_pair_validation(self):
        with pytest.raises(ValueError):
            EnergyPair(-1.0, 0.0)
        with pytest.raises(ValueError):
            EnergyPair(1.0, float("nan"))


class TestBilinear:
    def test_diagonal(self, grid, rng):
        v = random_vector(grid, rng)
        from machlab.leray import advection
        adv = advection(v, v)
        assert sobolev_norm(bilinear_B(v, v) - adv * 2.0) <= 1e-12 * sobolev_norm(adv)

    def test_zero_argument(self, grid, rng):
        assert sobolev_norm(bilinear_B(random_vector(grid, rng), VectorField.zeros(grid))) == 0.0

    def test_symmetry(self, grid, rng):
        a, b = random_vector(grid, rng), random_vector(grid, rng)
        assert sobolev_norm(bilinear_B(a, b) - bilinear_B(b, a)) <= 1e-13

    def test_grid_mismatch(self, torus):
        other = make_grid("torus", 16, 16)
        with pytest.raises(ValueError):
            bilinear_B(VectorField.zeros(torus), VectorField.zeros(other))


class TestSlowFast:
    @given(seed=st.integers(0, 10_000))
    def test_identity_and_fast_fast(self, seed):
        for g in (make_grid("torus", 32, 32), make_grid("channel", 32, 16)):
            v = random_vector(g, np.random.default_rng(seed))
            t = slow_fast_terms(v)
            assert t["identity_residual"] <= 1e-11
            assert t["fast_fast"] <= 1e-10

    def test_accepts_state(self, torus):
        s = well_prepared_init(torus, LAW, default_stream_modes(0), 0.1, 0.1)
        assert slow_fast_terms(s)["slow_fast"] < 1e-14

    def test_eps_scaling_along_trajectory(self, torus):
        peaks = []
        for eps in (0.1, 0.05, 0.025):
            s = well_prepared_init(torus, LAW, default_stream_modes(0), 0.1, eps)
            m = CompressibleModel(torus, LAW, eps)
            y, dt, best = s.to_array(), eps / 8, 0.0
            for _ in range(round(0.4 / dt)):
                y = m.step(y, dt)
                best = max(best, slow_fast_terms(CompressibleState.from_array(torus, y, eps))["slow_fast"])
            peaks.append(best)
        slope = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(peaks), 1)[0]
        assert 0.9 <= slope <= 1.1


class TestAccumulator:
    def test_constant(self, torus):
        f = ScalarField.from_function(torus, lambda X, Y: 3.0 + 0 * X)
        acc = TimeAverageAccumulator()
        for t in np.linspace(0, 0.7, 11):
            acc.add(f, t)
        assert np.array_equal(acc.value().coefficients, (f * 0.7).coefficients) or \
            sobolev_norm(acc.value() - f * 0.7) <= 1e-15
        assert acc.elapsed == pytest.approx(0.7)

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3))
    def test_linear(self, a, b):
        g = make_grid("torus", 16, 16)
        rng = np.random.default_rng(7)
        fs = [random_scalar(g, rng) for _ in range(6)]
        hs = [random_scalar(g, rng) for _ in range(6)]
        times = np.sort(rng.uniform(0, 1, 6))
        accs = [TimeAverageAccumulator() for _ in range(3)]
        for t, f, h in zip(times, fs, hs):
            accs[0].add(f, t)
            accs[1].add(h, t)
            accs[2].add(f * a + h * b, t)
        lhs = accs[2].value()
        rhs = accs[0].value() * a + accs[1].value() * b
        assert sobolev_norm(lhs - rhs) <= 1e-12 * (1 + sobolev_norm(lhs))

    @pytest.mark.parametrize("eps", [0.1, 0.03, 0.01])
    def test_oscillation_suppressed(self, torus, eps):
        gfield = ScalarField.from_function(torus, lambda X, Y: np.cos(X) * np.sin(2 * Y))
        acc = TimeAverageAccumulator()
        T = 1.0
        times = np.arange(0, T + 1e-12, eps / 8)
        for t in times:
            acc.add(gfield * np.sin(t / eps), t)
        assert sobolev_norm(acc.value()) <= 2 * eps * sobolev_norm(gfield)

    def test_trapezoid_second_order(self):
        def integral(n):
            acc = TimeAverageAccumulator()
            for t in np.linspace(0, 1, n + 1):
                acc.add(np.array([np.exp(t)]), t)
            return abs(acc.value()[0] - (np.e - 1))
        assert integral(20) / integral(40) == pytest.approx(4, rel=0.01)

    def test_vector_and_order(self, torus, rng):
        v = random_vector(torus, rng)
        acc = TimeAverageAccumulator()
        acc.add(v, 0.0)
        acc.add(v, 0.5)
        assert isinstance(acc.value(), VectorField)
        with pytest.raises(ValueError):
            acc.add(v, 0.5)
        with pytest.raises(ValueError):
            TimeAverageAccumulator().value()


class TestAveraged:
    def test_zero_data(self, torus):
        traj = [(t, VectorField.zeros(torus)) for t in np.linspace(0, 1, 5)]
        assert averaged_slow_fast(traj) == 0.0
        assert averaged_fast(traj) == 0.0

    def test_divergence_free_trajectory(self, torus):
        v = _smooth_v(torus)
        traj = [(t, v) for t in np.linspace(0, 1, 5)]
        assert averaged_fast(traj) <= 1e-12

    def test_cadence_warning(self, torus):
        v = gradient(ScalarField.from_function(torus, lambda X, Y: np.cos(X)))
        traj = [(t, v) for t in np.linspace(0, 1, 5)]
        with pytest.warns(CadenceWarning):
            averaged_fast(traj, epsilon=0.1)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert averaged_fast(traj, epsilon=1.0) > 0

    def test_accepts_states(self, torus):
        s = well_prepared_init(torus, LAW, TAYLOR_GREEN, 1.0, 0.1)
        states = [CompressibleState(s.rho, s.v, 0.1, t) for t in (0.0, 0.02, 0.04)]
        assert averaged_slow_fast(states) <= 1e-12


class TestVorticityResidual:
    def test_zero(self, torus):
        z = VectorField.zeros(torus)
        assert vorticity_residual((0.0, z), (0.1, z)) == 0.0

    def test_steady(self, grid):
        v = perp_gradient(stream_function(grid, TAYLOR_GREEN))
        assert vorticity_residual((0.0, v), (0.3, v)) <= 1e-9

    def test_second_order(self, torus):
        v0 = _smooth_v(torus)
        m = IncompressibleModel(torus)
        dt = 0.0025
        y = v0.coefficients
        traj = [y]
        for _ in range(32):
            y = m.step(y, dt)
            traj.append(y)

        def res(stride):
            a, b = traj[0], traj[stride]
            return vorticity_residual((0.0, VectorField.from_arrays(torus, a[0], a[1])),
                                      (stride * dt, VectorField.from_arrays(torus, b[0], b[1])))

        ratio = res(32) / res(16)
        assert 3.5 <= ratio <= 4.5

    def test_order_check(self, torus):
        z = VectorField.zeros(torus)
        with pytest.raises(ValueError):
            vorticity_residual((1.0, z), (0.5, z))


class TestRTransform:
    def test_zero(self, grid):
        r = r_transform(ScalarField.zeros(grid, _rho_par(grid)), 0.1, LAW)
        assert sobolev_norm(r) == 0.0

    def test_gamma_two(self, torus):
        law = PressureLaw.gamma_law(2.0)
        rho = ScalarField.from_function(torus, lambda X, Y: 1.0 + 0 * X)
        r = r_transform(rho, 0.1, law)
        assert np.allclose(r.values, 1.05, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("eps", [0.08, 0.04, 0.02, 0.01])
    def test_round_trip_and_expansion(self, grid, eps):
        rho = ScalarField.from_function(grid, lambda X, Y: 2 * np.cos(X) + np.cos(Y), _rho_par(grid))
        r = r_transform(rho, eps, LAW)
        back = inverse_r_transform(r, eps, LAW)
        assert np.max(np.abs(back.values - rho.values)) <= 1e-10
        x = rho.values
        defect = np.abs(r.values - x)
        # r = rho + eps (gamma - 1)/2 rho^2 + O(eps^2 rho^3)
        assert np.all(defect <= 0.5 * eps * x ** 2 + 1e-12)

    def test_vacuum(self, torus):
        rho = ScalarField.from_function(torus, lambda X, Y: -20 + 0 * X)
        with pytest.raises(VacuumError):
            r_transform(rho, 0.1, LAW)


class TestSigma:
    def test_identity_at_zero(self):
        for law in (LAW, PressureLaw.gamma_law(2.0), PressureLaw.gamma_law(1.0)):
            assert np.allclose(sigma_entries(0.0, law), 1.0, atol=1e-14)

    def test_gamma_two_closed_form(self):
        e = sigma_entries(0.2, PressureLaw.gamma_law(2.0))
        assert float(e[0]) == pytest.approx(1.4, abs=1e-12)
        assert float(e[1]) == pytest.approx(1 / np.sqrt(1.4), abs=1e-12)
        assert float(e[2]) == pytest.approx(1 / np.sqrt(1.4), abs=1e-12)

    @pytest.mark.parametrize("gamma", [1.2, 1.4, 2.0, 3.0])
    def test_quoted_radius_edge(self, gamma):
        law = PressureLaw.gamma_law(gamma)
        R = sigma_radius(law)
        first, second, third = (float(e) for e in sigma_entries(-R, law))
        assert second == pytest.approx(2.0, abs=1e-10) and third == pytest.approx(2.0, abs=1e-10)
        # the first entry is s^gamma at s = 1/2, which leaves [1/2, 2] once gamma > 1
        assert first == pytest.approx(2.0 ** (-gamma), abs=1e-10)
        assert all(0.5 <= float(e) <= 2.0 for e in sigma_entries(R, law))

    def test_isothermal_radius_is_sharp(self):
        law = PressureLaw.gamma_law(1.0)
        R = sigma_radius(law)
        assert R == pytest.approx(0.5)
        for r in np.linspace(-R, R, 41):
            assert all(0.5 - 1e-12 <= float(e) <= 2.0 + 1e-12 for e in sigma_entries(r, law))
        assert sigma_bounded_radius(law) == pytest.approx(0.5, abs=1e-10)

    @pytest.mark.parametrize("gamma", [1.0, 1.4, 2.0])
    def test_bounded_radius(self, gamma):
        law = PressureLaw.gamma_law(gamma)
        R = sigma_bounded_radius(law)
        assert R == pytest.approx(1 / (2 * gamma), abs=1e-10)
        for r in np.linspace(-R, R, 51):
            assert all(0.5 - 1e-12 <= float(e) <= 2.0 + 1e-12 for e in sigma_entries(r, law))

    def test_fields_and_errors(self, torus):
        r = ScalarField.from_function(torus, lambda X, Y: 0.1 * np.cos(X))
        ents = sigma_matrix(r, LAW)
        assert len(ents) == 3 and all(isinstance(e, ScalarField) for e in ents)
        with pytest.raises(VacuumError):
            sigma_entries(-1 / 1.4, LAW)
        with pytest.raises(ValueError):
            sigma_radius(PressureLaw.custom(lambda s: s, lambda s: 1.0 + 0 * s, lambda s: 0 * s))
