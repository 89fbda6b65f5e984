"""Isentropic compressible Euler in the density-perturbation form.

    d_t rho + div(rho v)          = -div(v) / eps
    d_t v + v.grad v + h(rho) grad rho = -grad(rho) / eps

The stiff linear part is integrated exactly per Fourier mode (a rotation
between rho and the longitudinal velocity), and the nonlinear remainder with
classical RK4, combined by Strang splitting.  Passive scalars can ride along
in the nonlinear substep so they share the velocity's time levels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .leray import apply_p
from .pressure import PressureLaw, VacuumError
from .spectral import EVEN, ODD, Grid, ScalarField, VectorField, gradient, perp_gradient

C_CFL = 0.4
DT_MAX = 0.05


class CFLError(ValueError):
    """Requested time step exceeds the advective stability limit."""


@dataclass(frozen=True)
class CompressibleState:
    rho: ScalarField
    v: VectorField
    epsilon: float
    time: float = 0.0

    def __post_init__(self):
        if not 0 < self.epsilon <= 0.5:
            raise ValueError(f"epsilon must lie in (0, 1/2], got {self.epsilon}")
        if self.rho.grid != self.v.grid:
            raise ValueError("rho and v live on different grids")
        if self.rho.grid.is_channel and self.rho.parity != EVEN:
            raise ValueError("channel density must be even in y")
        x = self.epsilon * self.rho.extended_values
        if np.min(1 + x) <= 0:
            raise VacuumError("total density is not positive")
        flux = self.v.wall_flux()
        if flux > 1e-10:
            raise ValueError(f"wall flux {flux:.3e} violates v.n = 0")

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def to_array(self) -> np.ndarray:
        return np.stack([self.rho.coefficients, self.v.u.coefficients, self.v.w.coefficients])

    @classmethod
    def from_array(cls, grid: Grid, arr: np.ndarray, epsilon: float, time: float = 0.0):
        rp = EVEN if grid.is_channel else None
        return cls(ScalarField(grid, arr[0], rp),
                   VectorField.from_arrays(grid, arr[1], arr[2]), epsilon, time)


def _parities(grid: Grid, n_scalars: int):
    if not grid.is_channel:
        return [None] * (3 + n_scalars)
    return [EVEN, EVEN, ODD] + [EVEN] * n_scalars


@dataclass
class CompressibleModel:
    """Raw-array engine for one (grid, law, eps).

    State arrays have shape ``(3 + n, *grid.spectral_shape)``: rho, u, w and
    ``n`` passive scalars advected by the sources in ``scalar_sources``
    (``"v"`` for the compressible velocity, ``"pv"`` for its Leray part).
    """

    grid: Grid
    law: PressureLaw
    epsilon: float
    scalar_sources: Sequence[str] = ()
    _rot_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for s in self.scalar_sources:
            if s not in ("v", "pv"):
                raise ValueError(f"unknown scalar source {s!r}")
        g = self.grid
        self._kmag = np.sqrt(g.k2_d)
        nz = self._kmag > 0
        self._khat_x = np.where(nz, g.kx_d / np.where(nz, self._kmag, 1), 0.0)
        self._khat_y = np.where(nz, g.ky_d / np.where(nz, self._kmag, 1), 0.0)
        self._parities = _parities(g, len(self.scalar_sources))

    # stiff linear part
    def linear(self, y: np.ndarray) -> np.ndarray:
        """L(rho, v) = (div v, grad rho) on the first three components."""
        g = self.grid
        out = np.zeros_like(y)
        out[0] = 1j * (g.kx_d * y[1] + g.ky_d * y[2])
        out[1] = 1j * g.kx_d * y[0]
        out[2] = 1j * g.ky_d * y[0]
        return out

    def _rotation(self, dt: float):
        key = float(dt)
        rot = self._rot_cache.get(key)
        if rot is None:
            theta = self._kmag * (dt / self.epsilon)
            rot = (np.cos(theta), np.sin(theta))
            if len(self._rot_cache) > 8:
                self._rot_cache.clear()
            self._rot_cache[key] = rot
        return rot

    def acoustic(self, y: np.ndarray, dt: float) -> np.ndarray:
        """Exact flow of d_t(rho, v) = -L(rho, v)/eps over ``dt``."""
        if dt == 0:
            return y.copy()
        c, s = self._rotation(dt)
        rho, u, w = y[0], y[1], y[2]
        vl = self._khat_x * u + self._khat_y * w
        rho_new = c * rho - 1j * s * vl
        vl_new = -1j * s * rho + c * vl
        out = y.copy()
        out[0] = rho_new
        out[1] = u + self._khat_x * (vl_new - vl)
        out[2] = w + self._khat_y * (vl_new - vl)
        return out

    # nonlinear remainder
    def nonlinear(self, y: np.ndarray) -> np.ndarray:
        g = self.grid
        eps = self.epsilon
        rho, u, w = y[0], y[1], y[2]
        ddx, ddy = g.ddx, g.ddy
        batch = [rho, u, w, ddx(u), ddy(u), ddx(w), ddy(w), ddx(rho), ddy(rho)]
        scal = y[3:]
        need_p = "pv" in self.scalar_sources
        if need_p:
            pu, pw = apply_p(g, u, w)
            batch += [pu, pw]
        for th in scal:
            batch += [ddx(th), ddy(th)]
        phys = g.to_padded(np.stack(batch))
        r, up, wp, ux, uy, wx, wy, rx, ry = phys[:9]
        h = self.law.h_eps(r, eps)
        prods = [r * up, r * wp,
                 -(up * ux + wp * uy) - h * rx,
                 -(up * wx + wp * wy) - h * ry]
        base = 11 if need_p else 9
        for j, src in enumerate(self.scalar_sources):
            tx, ty = phys[base + 2 * j], phys[base + 2 * j + 1]
            if src == "v":
                prods.append(-(up * tx + wp * ty))
            else:
                prods.append(-(phys[9] * tx + phys[10] * ty))
        coef = g.from_padded(np.stack(prods))
        out = np.empty_like(y)
        out[0] = -(ddx(coef[0]) + ddy(coef[1]))
        out[1] = coef[2]
        out[2] = coef[3]
        out[3:] = coef[4:]
        return out

    def rhs(self, y: np.ndarray) -> np.ndarray:
        """Full time derivative including the stiff -L/eps term."""
        out = self.nonlinear(y)
        out[:3] -= self.linear(y)[:3] / self.epsilon
        return out

    def _rk4(self, y: np.ndarray, dt: float) -> np.ndarray:
        k1 = self.nonlinear(y)
        k2 = self.nonlinear(y + 0.5 * dt * k1)
        k3 = self.nonlinear(y + 0.5 * dt * k2)
        k4 = self.nonlinear(y + dt * k3)
        return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    def step(self, y: np.ndarray, dt: float) -> np.ndarray:
        """Strang step: half acoustic, RK4 nonlinear, half acoustic."""
        y = self.acoustic(y, 0.5 * dt)
        y = self._rk4(y, dt)
        y = self.acoustic(y, 0.5 * dt)
        if self.grid.is_channel:
            y = np.stack([self.grid.symmetrize(c, p) for c, p in zip(y, self._parities)])
        return y

    def cfl_dt(self, y: np.ndarray, dt_max: float = DT_MAX, c_cfl: float = C_CFL) -> float:
        g = self.grid
        phys = g.inverse(y[:3])
        vmax = float(np.max(np.sqrt(phys[1] ** 2 + phys[2] ** 2)))
        h = self.law.h_eps(phys[0], self.epsilon)
        c_nl = float(np.sqrt(np.max(np.abs(phys[0] * h))))
        speed = vmax + c_nl
        if speed == 0:
            return dt_max
        return min(dt_max, c_cfl * g.dx_min / speed)


def h_eps(rho: ScalarField, epsilon: float, law: PressureLaw) -> ScalarField:
    """h_eps(rho) evaluated on the padded grid and truncated."""
    g = rho.grid
    r = g.to_padded(rho.coefficients)
    return ScalarField(g, g.from_padded(law.h_eps(r, epsilon)), rho.parity)


def _model(state: CompressibleState, law: PressureLaw) -> CompressibleModel:
    return CompressibleModel(state.grid, law, state.epsilon)


def rhs(state: CompressibleState, law: PressureLaw):
    """(d_t rho, d_t v) of the full system, products dealiased."""
    d = _model(state, law).rhs(state.to_array())
    g = state.grid
    return (ScalarField(g, d[0], state.rho.parity), VectorField.from_arrays(g, d[1], d[2]))


def acoustic_propagate(state: CompressibleState, dt: float) -> CompressibleState:
    m = CompressibleModel(state.grid, PressureLaw.gamma_law(2.0), state.epsilon)
    y = m.acoustic(state.to_array(), dt)
    return CompressibleState.from_array(state.grid, y, state.epsilon, state.time + dt)


def cfl_dt(state: CompressibleState, law: Optional[PressureLaw] = None,
           dt_max: float = DT_MAX) -> float:
    law = law or PressureLaw.gamma_law()
    return _model(state, law).cfl_dt(state.to_array(), dt_max)


def step(state: CompressibleState, dt: float, law: PressureLaw,
         dt_max: float = DT_MAX) -> CompressibleState:
    m = _model(state, law)
    y = state.to_array()
    limit = m.cfl_dt(y, dt_max)
    if dt > limit * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.4g} exceeds CFL limit {limit:.4g}")
    y = m.step(y, dt)
    return CompressibleState.from_array(state.grid, y, state.epsilon, state.time + dt)


# initial data

def stream_function(grid: Grid, modes) -> ScalarField:
    """psi = sum a cos(kx x + phase) sin(ky y); odd in y, so psi = 0 on walls."""
    par = ODD if grid.is_channel else None

    def f(X, Y):
        out = np.zeros_like(X)
        for kx, ky, a, ph in modes:
            out += a * np.cos(kx * X + ph) * np.sin(ky * Y)
        return out

    return ScalarField.from_function(grid, f, par)


def cosine_profile(grid: Grid, modes) -> ScalarField:
    """sum a cos(kx x + phase) cos(ky y); even in y, zero wall-normal gradient."""
    par = EVEN if grid.is_channel else None

    def f(X, Y):
        out = np.zeros_like(X)
        for kx, ky, a, ph in modes:
            out += a * np.cos(kx * X + ph) * np.cos(ky * Y)
        return out

    return ScalarField.from_function(grid, f, par)


PERTURBATION_WAVES = ((2, 1), (1, 2), (2, 2), (3, 1), (1, 3), (3, 2), (2, 3))


def default_stream_modes(seed: int = 0, perturbation: float = 0.6, n_modes: int = 6):
    """sin x sin y plus ``n_modes`` seeded low-wavenumber perturbations.

    Each perturbation has amplitude ``perturbation * U(0.5, 1)`` and a uniform
    random phase.  Several incommensurate acoustic frequencies keep the
    pointwise acoustic error from being dominated by a single phase.
    """
    if not 0 <= n_modes <= len(PERTURBATION_WAVES):
        raise ValueError(f"n_modes must lie in [0, {len(PERTURBATION_WAVES)}]")
    rng = np.random.default_rng(seed)
    modes = [(1, 1, 1.0, -np.pi / 2)]
    for kx, ky in PERTURBATION_WAVES[:n_modes]:
        modes.append((kx, ky, float(perturbation * rng.uniform(0.5, 1)),
                      float(rng.uniform(0, 2 * np.pi))))
    return modes


TAYLOR_GREEN = [(1, 1, 1.0, -np.pi / 2)]


def well_prepared_init(grid: Grid, law: PressureLaw, modes=None, amplitude: float = 1.0,
                       epsilon: float = 0.1) -> CompressibleState:
    """rho0 = 0 and v0 = perp-grad(psi): no O(1/eps) content in d_t at t = 0."""
    modes = TAYLOR_GREEN if modes is None else modes
    psi = amplitude * stream_function(grid, modes)
    rp = EVEN if grid.is_channel else None
    return CompressibleState(ScalarField.zeros(grid, rp), perp_gradient(psi), epsilon)


def ill_prepared_init(grid: Grid, law: PressureLaw, modes=None, acoustic_amplitude: float = 1.0,
                      epsilon: float = 0.1, amplitude: float = 1.0,
                      chi_modes=((1, 0, 1.0, 0.0),), rho_modes=()) -> CompressibleState:
    """Well-prepared data plus an acoustic part a grad(chi) and a rho-profile.

    The acoustic part is measured relative to ``amplitude``, so the data are
    ``amplitude * (perp-grad psi + a grad chi)``; a = O(1) keeps the acoustic
    content comparable to the vortical one at every overall scale.
    """
    base = well_prepared_init(grid, law, modes, amplitude, epsilon)
    a = acoustic_amplitude * amplitude
    if a == 0:
        return base
    chi = cosine_profile(grid, list(chi_modes))
    v = base.v + a * gradient(chi)
    rho = base.rho
    if rho_modes:
        rho = rho + a * cosine_profile(grid, list(rho_modes))
    return CompressibleState(rho, v, epsilon)
