import numpy as np
import pytest

from machlab.compressible import CFLError
from machlab.spectral import ScalarField, VectorField, perp_gradient, sobolev_norm
from machlab.transport import (
    ScalarTrajectory,
    VelocitySource,
    advect_step,
    default_theta0,
)


class TestAdvectStep:
    def test_zero_velocity(self, grid):
        th = default_theta0(grid)
        out = advect_step(th, VectorField.zeros(grid), 0.1)
        assert sobolev_norm(out - th) <= 1e-14

    def test_translation(self, torus):
        th = ScalarField.from_function(torus, lambda X, Y: np.sin(X))
        v = VectorField.from_functions(torus, lambda X, Y: 1.0 + 0 * X, lambda X, Y: 0 * X)
        n = 200
        for _ in range(n):
            th = advect_step(th, v, np.pi / n)
        X, _ = torus.mesh
        assert np.max(np.abs(th.values + np.sin(X))) < 1e-8  # RK4 phase error ~ 2e-9

    def test_l2_conserved_for_divergence_free(self, grid):
        psi = ScalarField.from_function(
            grid, lambda X, Y: np.sin(X) * np.sin(Y) + 0.3 * np.cos(2 * X) * np.sin(Y),
            "odd" if grid.is_channel else None)
        v = perp_gradient(psi)
        th = default_theta0(grid)
        n0 = sobolev_norm(th)
        dt, n = 0.01, 100
        for _ in range(n):
            th = advect_step(th, v, dt)
        assert abs(sobolev_norm(th) - n0) / n0 <= 1e-9 * n * dt
        assert abs(th.mean() - default_theta0(grid).mean()) < 1e-13

    def test_cfl(self, torus):
        v = VectorField.from_functions(torus, lambda X, Y: 1.0 + 0 * X, lambda X, Y: 0 * X)
        with pytest.raises(CFLError):
            advect_step(default_theta0(torus), v, 1.0)

    def test_default_profile(self, torus, channel):
        X, Y = torus.mesh
        assert np.max(np.abs(default_theta0(torus).values - np.cos(X) - np.sin(Y))) < 1e-14
        assert default_theta0(channel).parity == "even"


def test_trajectory_record(torus):
    t = ScalarTrajectory(default_theta0(torus), VelocitySource.LERAY_OF_COMPRESSIBLE, 0.5)
    assert t.velocity_source.value == "leray_of_compressible"
