"""Incompressible Euler in projected form, d_t v = -P(v.grad v).

Solving the projected form (rather than a pressure Poisson equation) yields
exactly the reference field of the low-Mach comparison; the pressure is
recovered a posteriori from Q(v.grad v) = grad(phi), q = -phi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .leray import apply_p, leray_project, project_coeffs
from .spectral import EVEN, ODD, Grid, ScalarField, VectorField, spectral_norm

DIV_TOL = 1e-8
C_CFL = 0.4


class DivergenceError(ValueError):
    """Velocity handed to the projected solver is not divergence-free."""


@dataclass(frozen=True)
class IncompressibleState:
    v: VectorField
    time: float = 0.0

    def __post_init__(self):
        div = divergence_norm(self.v)
        if div > DIV_TOL:
            raise DivergenceError(f"||div v|| = {div:.3e} exceeds {DIV_TOL:g}")


def divergence_norm(v: VectorField) -> float:
    g = v.grid
    div = 1j * (g.kx_d * v.u.coefficients + g.ky_d * v.w.coefficients)
    return spectral_norm(g, div)


class IncompressibleModel:
    """Raw-array engine: state ``(2 + n, ...)`` = u, w and n scalars advected by v."""

    def __init__(self, grid: Grid, n_scalars: int = 0):
        self.grid = grid
        self.n_scalars = n_scalars
        self._parities = ([EVEN, ODD] + [EVEN] * n_scalars) if grid.is_channel else None

    def advection(self, y: np.ndarray) -> np.ndarray:
        """Dealiased v.grad of every component, velocity not yet projected."""
        g = self.grid
        u, w = y[0], y[1]
        batch = [u, w]
        for c in y:
            batch += [g.ddx(c), g.ddy(c)]
        phys = g.to_padded(np.stack(batch))
        up, wp = phys[0], phys[1]
        prods = [up * phys[2 + 2 * j] + wp * phys[3 + 2 * j] for j in range(len(y))]
        return g.from_padded(np.stack(prods))

    def rhs(self, y: np.ndarray) -> np.ndarray:
        adv = self.advection(y)
        out = -adv
        out[0], out[1] = apply_p(self.grid, -adv[0], -adv[1])
        return out

    def _project(self, y: np.ndarray) -> np.ndarray:
        y = y.copy()
        y[0], y[1] = apply_p(self.grid, y[0], y[1])
        return y

    def step(self, y: np.ndarray, dt: float) -> np.ndarray:
        """Classical RK4, re-projecting the velocity after every stage."""
        k1 = self.rhs(y)
        k2 = self.rhs(self._project(y + 0.5 * dt * k1))
        k3 = self.rhs(self._project(y + 0.5 * dt * k2))
        k4 = self.rhs(self._project(y + dt * k3))
        y = self._project(y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        if self._parities is not None:
            y = np.stack([self.grid.symmetrize(c, p) for c, p in zip(y, self._parities)])
        return y

    def cfl_dt(self, y: np.ndarray, dt_max: float = 0.05, c_cfl: float = C_CFL) -> float:
        phys = self.grid.inverse(y[:2])
        vmax = float(np.max(np.hypot(phys[0], phys[1])))
        if vmax == 0:
            return dt_max
        return min(dt_max, c_cfl * self.grid.dx_min / vmax)


def rhs_incompressible(v: VectorField) -> VectorField:
    """-P(v.grad v)."""
    div = divergence_norm(v)
    if div > DIV_TOL:
        raise DivergenceError(f"||div v|| = {div:.3e} exceeds {DIV_TOL:g}")
    m = IncompressibleModel(v.grid)
    d = m.rhs(v.coefficients)
    return VectorField.from_arrays(v.grid, d[0], d[1])


def step_incompressible(v: VectorField, dt: float, dt_max: float = 0.05) -> VectorField:
    from .compressible import CFLError

    m = IncompressibleModel(v.grid)
    y = v.coefficients
    limit = m.cfl_dt(y, dt_max)
    if dt > limit * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.4g} exceeds CFL limit {limit:.4g}")
    y = m.step(y, dt)
    return VectorField.from_arrays(v.grid, y[0], y[1])


def pressure_from_velocity(v: VectorField) -> ScalarField:
    """q = -phi with Q(v.grad v) = grad(phi), zero mean."""
    m = IncompressibleModel(v.grid)
    adv = m.advection(v.coefficients)
    split = leray_project(VectorField.from_arrays(v.grid, adv[0], adv[1]))
    return -split.potential


def _time_derivatives(coeffs: list, times: np.ndarray):
    """Centred differences: five-point on uniform spacing, else three-point."""
    n = len(coeffs)
    h = np.diff(times)
    if n >= 5 and np.allclose(h, h[0], rtol=1e-10, atol=0):
        dt = h[0]
        idx = range(2, n - 2)
        der = [(-coeffs[i + 2] + 8 * coeffs[i + 1] - 8 * coeffs[i - 1] + coeffs[i - 2]) / (12 * dt)
               for i in idx]
    else:
        idx = range(1, n - 1)
        der = [(coeffs[i + 1] - coeffs[i - 1]) / (times[i + 1] - times[i - 1]) for i in idx]
    return list(idx), der


def equivalence_check(trajectory: Sequence[VectorField], times: Sequence[float]) -> dict:
    """Check d_t v + v.grad v + grad q = 0 along a projected-form trajectory.

    q = -phi with Q(v.grad v) = grad(phi).  d_t v is a centred difference of
    the samples (fourth order when they are uniformly spaced), so only
    interior samples are checked and the residual includes the differencing
    error.
    """
    if len(trajectory) != len(times) or len(trajectory) < 3:
        raise ValueError("need at least three samples with matching times")
    times = np.asarray(times, dtype=float)
    g = trajectory[0].grid
    m = IncompressibleModel(g)
    idx, ders = _time_derivatives([v.coefficients for v in trajectory], times)
    residuals = []
    for i, dvdt in zip(idx, ders):
        adv = m.advection(trajectory[i].coefficients)
        _, _, qu, qw = project_coeffs(g, adv[0], adv[1])
        # grad q = -Q(v.grad v)
        res = dvdt + adv - np.stack([qu, qw])
        residuals.append(spectral_norm(g, res))
    return {"times": [float(times[i]) for i in idx], "residuals": residuals,
            "max_residual": max(residuals) if residuals else 0.0}
