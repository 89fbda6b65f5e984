"""Measured quantities of the low-Mach comparison.

Time derivatives are taken from the model right-hand side, never from
finite differences; the one exception is :func:`vorticity_residual`, which
differences samples on purpose so that it checks the integrator
independently of the model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .compressible import CompressibleModel, CompressibleState
from .incompressible import IncompressibleModel, IncompressibleState
from .leray import project_coeffs
from .pressure import VACUUM_GUARD, PressureLaw, VacuumError, guard
from .spectral import (
    Grid,
    ScalarField,
    VectorField,
    divergence,
    gradient,
    spectral_norm,
)

M_DEFAULT = 3


class CadenceWarning(UserWarning):
    """Samples too sparse to resolve the acoustic oscillation."""


@dataclass(frozen=True)
class EnergyPair:
    e0: float
    et0: float
    m: int = M_DEFAULT

    def __post_init__(self):
        for name in ("e0", "et0"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {val}")


# raw-array helpers shared with the harness

def lin_op_coeffs(grid: Grid, y: np.ndarray) -> np.ndarray:
    """L(rho, v) = (div v, grad rho) on stacked coefficients ``(rho, u, w)``."""
    out = np.empty((3,) + y.shape[1:], dtype=complex)
    out[0] = 1j * (grid.kx_d * y[1] + grid.ky_d * y[2])
    out[1] = 1j * grid.kx_d * y[0]
    out[2] = 1j * grid.ky_d * y[0]
    return out


def _advect(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dealiased (a.grad) b for stacked velocity coefficients."""
    batch = np.stack([a[0], a[1], grid.ddx(b[0]), grid.ddy(b[0]), grid.ddx(b[1]), grid.ddy(b[1])])
    ph = grid.to_padded(batch)
    prods = np.stack([ph[0] * ph[2] + ph[1] * ph[3], ph[0] * ph[4] + ph[1] * ph[5]])
    return grid.from_padded(prods)


def bilinear_coeffs(grid: Grid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _advect(grid, a, b) + _advect(grid, b, a)


def _proj(grid: Grid, v: np.ndarray) -> np.ndarray:
    pu, pw, _, _ = project_coeffs(grid, v[0], v[1])
    return np.stack([pu, pw])


def split_velocity(grid: Grid, v: np.ndarray):
    pu, pw, qu, qw = project_coeffs(grid, v[0], v[1])
    return np.stack([pu, pw]), np.stack([qu, qw])


# field-level operations

def lin_op(state: CompressibleState):
    """(div v, grad rho) as fields."""
    return divergence(state.v), gradient(state.rho)


def energies(state: CompressibleState, law: PressureLaw, m: int = M_DEFAULT) -> EnergyPair:
    """E0 = ||(rho, v)||_{H^m} and Et0 = ||d_t(rho, v)||_{H^{m-1}} from the rhs."""
    if m < 3:
        raise ValueError("energies need m >= 3")
    g = state.grid
    y = state.to_array()
    guard(state.epsilon * state.rho.extended_values)
    model = CompressibleModel(g, law, state.epsilon)
    return EnergyPair(spectral_norm(g, y, m), spectral_norm(g, model.rhs(y), m - 1), m)


def bilinear_B(v1: VectorField, v2: VectorField) -> VectorField:
    """B[v1, v2] = v1.grad v2 + v2.grad v1, dealiased."""
    if v1.grid != v2.grid:
        raise ValueError("fields live on different grids")
    g = v1.grid
    b = bilinear_coeffs(g, v1.coefficients, v2.coefficients)
    return VectorField.from_arrays(g, b[0], b[1])


def slow_fast_terms(v: Union[VectorField, CompressibleState]) -> dict:
    """L2 norms of the three pieces of P(v.grad v) and of their sum's defect."""
    if isinstance(v, CompressibleState):
        v = v.v
    g = v.grid
    vp, vq = split_velocity(g, v.coefficients)
    ss = _proj(g, _advect(g, vp, vp))
    sf = _proj(g, bilinear_coeffs(g, vp, vq))
    ff = _proj(g, _advect(g, vq, vq))
    total = _proj(g, _advect(g, v.coefficients, v.coefficients))
    return {
        "slow_slow": spectral_norm(g, ss),
        "slow_fast": spectral_norm(g, sf),
        "fast_fast": spectral_norm(g, ff),
        "total": spectral_norm(g, total),
        "identity_residual": spectral_norm(g, ss + sf + ff - total),
    }


class TimeAverageAccumulator:
    """Running trapezoidal integral of a sampled field over [t0, T].

    Samples may be ScalarField, VectorField or raw coefficient arrays; the
    value comes back in the form of the first sample.
    """

    def __init__(self, grid: Optional[Grid] = None):
        self.grid = grid
        self.integral: Optional[np.ndarray] = None
        self.last: Optional[np.ndarray] = None
        self.t0: Optional[float] = None
        self.t_last: Optional[float] = None
        self._kind = None
        self._parity = None
        self.max_gap = 0.0

    def _unwrap(self, sample) -> np.ndarray:
        if isinstance(sample, ScalarField):
            self._kind, self._parity = "scalar", sample.parity
            self.grid = self.grid or sample.grid
            return sample.coefficients
        if isinstance(sample, VectorField):
            self._kind = "vector"
            self.grid = self.grid or sample.grid
            return sample.coefficients
        self._kind = "array"
        return np.asarray(sample)

    def add(self, sample, t: float) -> None:
        arr = self._unwrap(sample)
        if self.last is None:
            self.integral = np.zeros_like(arr, dtype=np.result_type(arr, float))
            self.t0 = self.t_last = float(t)
        else:
            dt = float(t) - self.t_last
            if dt <= 0:
                raise ValueError("samples must arrive in increasing time order")
            self.integral = self.integral + 0.5 * dt * (arr + self.last)
            self.max_gap = max(self.max_gap, dt)
            self.t_last = float(t)
        self.last = np.array(arr, copy=True)

    @property
    def elapsed(self) -> float:
        return 0.0 if self.t0 is None else self.t_last - self.t0

    def value(self):
        if self.integral is None:
            raise ValueError("no samples accumulated")
        if self._kind == "scalar":
            return ScalarField(self.grid, self.integral, self._parity)
        if self._kind == "vector":
            return VectorField.from_arrays(self.grid, self.integral[0], self.integral[1])
        return self.integral.copy()


Sample = Union[CompressibleState, IncompressibleState, tuple]


def _samples(trajectory: Iterable[Sample]):
    """Yield ``(t, velocity coefficients, epsilon or None)``."""
    for s in trajectory:
        if isinstance(s, CompressibleState):
            yield s.time, s.v.coefficients, s.epsilon
        elif isinstance(s, IncompressibleState):
            yield s.time, s.v.coefficients, None
        else:
            t, v = s
            yield float(t), v.coefficients, None


def _check_cadence(gap: float, eps: Optional[float], limit: float = 0.25) -> bool:
    if eps is None or gap <= limit * eps * (1 + 1e-12):
        return True
    warnings.warn(f"sample spacing {gap:.3g} exceeds eps/4 = {eps / 4:.3g}", CadenceWarning)
    return False


def averaged_slow_fast(trajectory: Sequence[Sample], grid: Optional[Grid] = None,
                       m: int = M_DEFAULT, epsilon: Optional[float] = None) -> float:
    """sup over T of ||<B[vP, vQ]>(T)||_{H^{m-2}} along the samples."""
    acc = TimeAverageAccumulator()
    best = 0.0
    eps = epsilon
    g = grid or _grid_of(trajectory)
    for t, v, e in _samples(trajectory):
        eps = eps if eps is not None else e
        vp, vq = split_velocity(g, v)
        acc.add(bilinear_coeffs(g, vp, vq), t)
        best = max(best, spectral_norm(g, acc.integral, m - 2))
    _check_cadence(acc.max_gap, eps)
    return best


def averaged_fast(trajectory: Sequence[Sample], grid: Optional[Grid] = None,
                  m: int = M_DEFAULT, epsilon: Optional[float] = None) -> float:
    """||<vQ>(T)||_{H^m} at the last sample."""
    acc = TimeAverageAccumulator()
    eps = epsilon
    g = grid or _grid_of(trajectory)
    for t, v, e in _samples(trajectory):
        eps = eps if eps is not None else e
        _, vq = split_velocity(g, v)
        acc.add(vq, t)
    _check_cadence(acc.max_gap, eps)
    return spectral_norm(g, acc.integral, m)


def _grid_of(trajectory) -> Grid:
    s = trajectory[0]
    if isinstance(s, (CompressibleState, IncompressibleState)):
        return s.v.grid
    return s[1].grid


def _vorticity_terms(grid: Grid, v: np.ndarray):
    om = 1j * (grid.kx_d * v[1] - grid.ky_d * v[0])
    div = 1j * (grid.kx_d * v[0] + grid.ky_d * v[1])
    ph = grid.to_padded(np.stack([v[0], v[1], grid.ddx(om), grid.ddy(om), div, om]))
    flux = grid.from_padded(ph[0] * ph[2] + ph[1] * ph[3] + ph[4] * ph[5])
    return om, flux


def vorticity_residual(sample0: Sample, sample1: Sample) -> float:
    """L2 residual of d_t w + v.grad w + div(v) w = 0 between two samples.

    d_t w is the forward difference of the samples and the advective terms
    are averaged over the two ends, so the residual is centred at the
    midpoint and falls like the square of the spacing.
    """
    (t0, v0, _), (t1, v1, _) = list(_samples([sample0, sample1]))
    g = _grid_of([sample0])
    dt = t1 - t0
    if dt <= 0:
        raise ValueError("samples must be in increasing time order")
    om0, f0 = _vorticity_terms(g, v0)
    om1, f1 = _vorticity_terms(g, v1)
    res = (om1 - om0) / dt + 0.5 * (f0 + f1)
    return spectral_norm(g, res)


# density transform and the symmetrizer

def r_transform(rho: ScalarField, epsilon: float, law: PressureLaw) -> ScalarField:
    """r with p(1 + eps rho) = 1 + eps r, pointwise on the grid."""
    x = epsilon * rho.extended_values
    guard(x)
    r = law.excess(x) / epsilon
    return ScalarField(rho.grid, rho.grid.forward(r), rho.parity)


def inverse_r_transform(r: ScalarField, epsilon: float, law: PressureLaw) -> ScalarField:
    y = epsilon * r.extended_values
    x = law.inverse_excess(y)
    guard(x)
    return ScalarField(r.grid, r.grid.forward(x / epsilon), r.parity)


def sigma_radius(law: PressureLaw) -> float:
    """The radius (1 - 2^-gamma)/gamma quoted for the gamma law.

    It is exactly the radius that keeps p_inv(1 + r) >= 1/2; see
    :func:`sigma_bounded_radius` for the radius that keeps every entry in
    [1/2, 2].
    """
    if law.kind != "gamma":
        raise ValueError("closed-form radius only for the gamma law")
    g = law.gamma
    return (1 - 2.0 ** (-g)) / g


def sigma_entries(r_breve, law: PressureLaw):
    """Diagonal of sigma: (p_inv p'(p_inv), 1/p_inv, 1/p_inv) at 1 + r_breve."""
    r = np.asarray(r_breve, dtype=float)
    if law.kind == "gamma" and np.any(law.gamma * r <= -1):
        raise VacuumError("r_breve outside the domain of p_inv")
    s = law.pinv(1 + r)
    if np.any(s <= VACUUM_GUARD):
        raise VacuumError("r_breve maps to a density below the vacuum guard")
    inv = 1.0 / s
    return s * law.dpressure(s), inv, inv.copy()


def sigma_matrix(r_breve: Union[ScalarField, np.ndarray, float], law: PressureLaw):
    """sigma entries as fields (or arrays when given arrays)."""
    if isinstance(r_breve, ScalarField):
        g = r_breve.grid
        ents = sigma_entries(r_breve.extended_values, law)
        return tuple(ScalarField(g, g.forward(e), r_breve.parity) for e in ents)
    return sigma_entries(r_breve, law)


def sigma_bounded_radius(law: PressureLaw, lo: float = 0.5, hi: float = 2.0,
                         r_max: float = 1e3) -> float:
    """Largest R with every sigma entry in [lo, hi] for |r| <= R.

    Bisection on the admissibility predicate along each half-line; entries
    are monotone in r for the laws shipped here.
    """

    def ok(r):
        try:
            return all(lo <= float(e) <= hi for e in sigma_entries(r, law))
        except VacuumError:
            return False

    def edge(sign):
        if ok(sign * r_max):
            return r_max
        a, b = 0.0, r_max
        for _ in range(200):
            mid = 0.5 * (a + b)
            if ok(sign * mid):
                a = mid
            else:
                b = mid
            if b - a < 1e-15:
                break
        return a

    return min(edge(1.0), edge(-1.0))


# trajectory-level monitors used by the sweep

def time_derivative_norm(model: CompressibleModel, y: np.ndarray, s: int = 2) -> float:
    return spectral_norm(model.grid, model.rhs(y)[:3], s)


def lin_op_norm(grid: Grid, y: np.ndarray, s: int = 2) -> float:
    return spectral_norm(grid, lin_op_coeffs(grid, y), s)


def incompressible_energy(model: IncompressibleModel, y: np.ndarray) -> float:
    return 0.5 * spectral_norm(model.grid, y[:2]) ** 2


__all__ = [
    "CadenceWarning",
    "EnergyPair",
    "TimeAverageAccumulator",
    "averaged_fast",
    "averaged_slow_fast",
    "bilinear_B",
    "energies",
    "inverse_r_transform",
    "lin_op",
    "r_transform",
    "sigma_bounded_radius",
    "sigma_entries",
    "sigma_matrix",
    "sigma_radius",
    "slow_fast_terms",
    "vorticity_residual",
]
