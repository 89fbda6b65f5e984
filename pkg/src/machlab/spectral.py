"""Grids, trigonometric transforms, spectral derivatives and dealiased products.

Two geometries are supported:

* ``torus``: the doubly periodic square [0, 2pi)^2.
* ``channel``: [0, 2pi) x [0, pi] with slip walls at y = 0 and y = pi.

Channel fields are stored as their even (cosine) or odd (sine) reflection onto
the doubled periodic domain [0, 2pi)^2.  Every operation is then an ordinary
periodic FFT operation, and the parity of a field (and hence v.n = 0 for the
wall-normal velocity, which is odd) is preserved structurally.

Spectral coefficients use the ``norm="forward"`` convention, so a field is
``f(x) = sum_k fhat_k exp(i k.x)`` with integer wavenumbers ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import cached_property, lru_cache
from typing import Callable, Optional, Union

import numpy as np
import scipy.fft as sfft


class Geometry(str, Enum):
    TORUS = "torus"
    CHANNEL = "channel"


EVEN = "even"
ODD = "odd"


def flip_parity(parity: Optional[str]) -> Optional[str]:
    if parity is None:
        return None
    return ODD if parity == EVEN else EVEN


def product_parity(p: Optional[str], q: Optional[str]) -> Optional[str]:
    if p is None or q is None:
        return None
    return EVEN if p == q else ODD


class Grid:
    """Discretization of a torus or channel with its wavenumber tables.

    ``nx`` and ``ny`` count grid intervals per axis.  For the channel the
    physical y-grid holds ``ny + 1`` points including both walls, and the
    half-range y-modes run over ``0..ny``.
    """

    def __init__(self, geometry: Union[Geometry, str], nx: int, ny: int):
        geometry = Geometry(geometry)
        for n, name in ((nx, "nx"), (ny, "ny")):
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 8, got {n}")
        self.geometry = geometry
        self.nx = int(nx)
        self.ny = int(ny)
        self.lx = 2 * np.pi
        self.ly = 2 * np.pi if geometry is Geometry.TORUS else np.pi
        # extended periodic storage shape
        self.my = self.ny if geometry is Geometry.TORUS else 2 * self.ny
        self.shape = (self.nx, self.my)
        self.spectral_shape = (self.nx, self.my // 2 + 1)
        self.pad_shape = (3 * self.nx // 2, 3 * self.my // 2)

        kx = np.fft.fftfreq(self.nx, 1.0 / self.nx).round().astype(int)
        ky = np.arange(self.my // 2 + 1)
        self.kx = kx[:, None]
        self.ky = ky[None, :]
        # odd-derivative symbols have their Nyquist entries removed
        kx_d = kx.astype(float)
        kx_d[self.nx // 2] = 0.0
        ky_d = ky.astype(float)
        ky_d[-1] = 0.0
        self.kx_d = kx_d[:, None]
        self.ky_d = ky_d[None, :]
        self.k2 = (self.kx**2 + self.ky**2).astype(float)
        self.k2_d = self.kx_d**2 + self.ky_d**2

        # rfft half-plane multiplicity for sums over the full spectrum
        weight = np.full(self.spectral_shape, 2.0)
        weight[:, 0] = 1.0
        weight[:, -1] = 1.0
        self.weight = weight
        self.area = self.lx * self.ly

        # retained (non-Nyquist) modes
        keep = np.ones(self.spectral_shape, dtype=bool)
        keep[self.nx // 2, :] = False
        keep[:, -1] = False
        self.nyquist_free = keep

    def __repr__(self) -> str:
        return f"Grid({self.geometry.value!r}, {self.nx}, {self.ny})"

    def __eq__(self, other) -> bool:
        return (isinstance(other, Grid) and self.geometry is other.geometry
                and self.nx == other.nx and self.ny == other.ny)

    def __hash__(self) -> int:
        return hash((self.geometry, self.nx, self.ny))

    def __reduce__(self):
        return (make_grid, (self.geometry.value, self.nx, self.ny))

    @property
    def is_channel(self) -> bool:
        return self.geometry is Geometry.CHANNEL

    @cached_property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.lx / self.nx

    @cached_property
    def y(self) -> np.ndarray:
        """Physical y-coordinates (walls included for the channel)."""
        if self.is_channel:
            return np.arange(self.ny + 1) * np.pi / self.ny
        return np.arange(self.ny) * self.ly / self.ny

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates of the extended periodic storage grid."""
        y = np.arange(self.my) * 2 * np.pi / self.my
        return np.meshgrid(self.x, y, indexing="ij")

    @property
    def dx_min(self) -> float:
        return min(self.lx / self.nx, 2 * np.pi / self.my)

    # transforms on raw arrays; the leading axes are batch axes
    def forward(self, values: np.ndarray) -> np.ndarray:
        return sfft.rfft2(values, norm="forward")

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return sfft.irfft2(coeffs, s=self.shape, norm="forward")

    def to_padded(self, coeffs: np.ndarray) -> np.ndarray:
        """Evaluate Nyquist-free coefficients on the 3/2-refined grid."""
        nx, nyh = self.nx, self.my // 2
        px, py = self.pad_shape
        out = np.zeros(coeffs.shape[:-2] + (px, py // 2 + 1), dtype=complex)
        h = nx // 2
        out[..., :h, :nyh] = coeffs[..., :h, :nyh]
        out[..., px - h + 1:, :nyh] = coeffs[..., h + 1:, :nyh]
        return sfft.irfft2(out, s=self.pad_shape, norm="forward")

    def from_padded(self, values: np.ndarray) -> np.ndarray:
        """Transform padded-grid values and truncate to the retained modes."""
        nx, nyh = self.nx, self.my // 2
        px = self.pad_shape[0]
        full = sfft.rfft2(values, norm="forward")
        out = np.zeros(values.shape[:-2] + self.spectral_shape, dtype=complex)
        h = nx // 2
        out[..., :h, :nyh] = full[..., :h, :nyh]
        out[..., h + 1:, :nyh] = full[..., px - h + 1:, :nyh]
        return out

    def ddx(self, coeffs: np.ndarray) -> np.ndarray:
        return 1j * self.kx_d * coeffs

    def ddy(self, coeffs: np.ndarray) -> np.ndarray:
        return 1j * self.ky_d * coeffs

    def symmetrize(self, coeffs: np.ndarray, parity: Optional[str]) -> np.ndarray:
        """Project extended-grid coefficients onto the given y-parity."""
        if parity is None:
            return coeffs
        reflected = np.conj(np.roll(coeffs[..., ::-1, :], 1, axis=-2))
        if parity == EVEN:
            return 0.5 * (coeffs + reflected)
        return 0.5 * (coeffs - reflected)

    def physical_view(self, ext_values: np.ndarray) -> np.ndarray:
        if self.is_channel:
            return ext_values[..., : self.ny + 1]
        return ext_values

    def extend(self, values: np.ndarray, parity: Optional[str]) -> np.ndarray:
        """Reflect physical channel values onto the doubled periodic grid."""
        values = np.asarray(values, dtype=float)
        if not self.is_channel:
            if values.shape != self.shape:
                raise ValueError(f"expected shape {self.shape}, got {values.shape}")
            return values.copy()
        if values.shape == self.shape:
            return values.copy()
        expected = (self.nx, self.ny + 1)
        if values.shape != expected:
            raise ValueError(f"expected shape {expected}, got {values.shape}")
        sign = 1.0 if parity == EVEN else -1.0
        ext = np.empty(self.shape)
        ext[:, : self.ny + 1] = values
        ext[:, self.ny + 1:] = sign * values[:, self.ny - 1:0:-1]
        return ext


@lru_cache(maxsize=None)
def _cached_grid(geometry: Geometry, nx: int, ny: int) -> Grid:
    return Grid(geometry, nx, ny)


def make_grid(geometry: Union[Geometry, str], nx: int, ny: int) -> Grid:
    """Build (or fetch the cached) grid; rejects odd or undersized resolutions."""
    if int(nx) != nx or int(ny) != ny:
        raise ValueError(f"resolutions must be integers, got {nx}, {ny}")
    return _cached_grid(Geometry(geometry), int(nx), int(ny))


def _check_parity(grid: Grid, parity: Optional[str]) -> Optional[str]:
    if not grid.is_channel:
        return None
    if parity not in (EVEN, ODD):
        raise ValueError("channel fields need parity 'even' or 'odd'")
    return parity


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A scalar field held by its spectral coefficients.

    Physical values are computed lazily.  ``parity`` is ``None`` on the torus
    and ``"even"``/``"odd"`` (cosine/sine in y) on the channel.
    """

    grid: Grid
    coefficients: np.ndarray
    parity: Optional[str] = None

    def __post_init__(self):
        coeffs = np.array(self.coefficients, dtype=complex)
        if coeffs.shape != self.grid.spectral_shape:
            raise ValueError(
                f"coefficient shape {coeffs.shape} != {self.grid.spectral_shape}")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "parity", _check_parity(self.grid, self.parity))

    @classmethod
    def from_values(cls, grid: Grid, values: np.ndarray,
                    parity: Optional[str] = None) -> "ScalarField":
        parity = _check_parity(grid, parity)
        return cls(grid, grid.forward(grid.extend(values, parity)), parity)

    @classmethod
    def from_function(cls, grid: Grid, func: Callable, parity: Optional[str] = None) -> "ScalarField":
        """Sample ``func(x, y)`` on the (extended) grid."""
        parity = _check_parity(grid, parity)
        X, Y = grid.mesh
        values = np.broadcast_to(np.asarray(func(X, Y), dtype=float), grid.shape)
        return cls(grid, grid.forward(values), parity)

    @classmethod
    def zeros(cls, grid: Grid, parity: Optional[str] = None) -> "ScalarField":
        return cls(grid, np.zeros(grid.spectral_shape, complex), parity)

    @cached_property
    def extended_values(self) -> np.ndarray:
        return self.grid.inverse(self.coefficients)

    @property
    def values(self) -> np.ndarray:
        """Physical values; for the channel the walls are included."""
        return self.grid.physical_view(self.extended_values)

    def mean(self) -> float:
        return float(self.coefficients[0, 0].real)

    def integral(self) -> float:
        return self.mean() * self.grid.area

    def parity_defect(self) -> float:
        """Sup-norm of the opposite-parity part (0 on the torus)."""
        if self.parity is None:
            return 0.0
        wrong = self.coefficients - self.grid.symmetrize(self.coefficients, self.parity)
        return float(np.max(np.abs(self.grid.inverse(wrong))))

    def _same(self, other: "ScalarField") -> None:
        if self.grid != other.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other: "ScalarField") -> "ScalarField":
        self._same(other)
        return ScalarField(self.grid, self.coefficients + other.coefficients, self.parity)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        self._same(other)
        return ScalarField(self.grid, self.coefficients - other.coefficients, self.parity)

    def __neg__(self) -> "ScalarField":
        return ScalarField(self.grid, -self.coefficients, self.parity)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, c * self.coefficients, self.parity)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    """Planar vector field (u along x, w along y).

    On the channel u is even and w odd in y, so w vanishes on the walls.
    """

    u: ScalarField
    w: ScalarField

    def __post_init__(self):
        if self.u.grid != self.w.grid:
            raise ValueError("components live on different grids")
        if self.u.grid.is_channel and (self.u.parity, self.w.parity) != (EVEN, ODD):
            raise ValueError("channel velocity needs u even and w odd in y")

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @classmethod
    def from_arrays(cls, grid: Grid, u_coeffs: np.ndarray, w_coeffs: np.ndarray) -> "VectorField":
        pu, pw = (EVEN, ODD) if grid.is_channel else (None, None)
        return cls(ScalarField(grid, u_coeffs, pu), ScalarField(grid, w_coeffs, pw))

    @classmethod
    def from_values(cls, grid: Grid, u: np.ndarray, w: np.ndarray) -> "VectorField":
        pu, pw = (EVEN, ODD) if grid.is_channel else (None, None)
        return cls(ScalarField.from_values(grid, u, pu), ScalarField.from_values(grid, w, pw))

    @classmethod
    def from_functions(cls, grid: Grid, fu: Callable, fw: Callable) -> "VectorField":
        pu, pw = (EVEN, ODD) if grid.is_channel else (None, None)
        return cls(ScalarField.from_function(grid, fu, pu), ScalarField.from_function(grid, fw, pw))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        z = np.zeros(grid.spectral_shape, complex)
        return cls.from_arrays(grid, z, z)

    @property
    def coefficients(self) -> np.ndarray:
        return np.stack([self.u.coefficients, self.w.coefficients])

    def wall_flux(self) -> float:
        """max |v.n| over both walls (0 on the torus)."""
        if not self.grid.is_channel:
            return 0.0
        w = self.w.values
        return float(max(np.max(np.abs(w[:, 0])), np.max(np.abs(w[:, -1]))))

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u + other.u, self.w + other.w)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u - other.u, self.w - other.w)

    def __neg__(self) -> "VectorField":
        return VectorField(-self.u, -self.w)

    def __mul__(self, c: float) -> "VectorField":
        return VectorField(c * self.u, c * self.w)

    __rmul__ = __mul__


Field = Union[ScalarField, VectorField]


def derivative(f: ScalarField, axis: str, order: int = 1) -> ScalarField:
    """Spectral derivative along ``axis`` ("x" or "y").

    Odd orders drop the Nyquist mode.  A y-derivative of odd order flips the
    channel parity.
    """
    if order < 0:
        raise ValueError("order must be non-negative")
    grid = f.grid
    if axis == "x":
        k = grid.kx_d if order % 2 else grid.kx
        parity = f.parity
    elif axis == "y":
        k = grid.ky_d if order % 2 else grid.ky
        parity = flip_parity(f.parity) if order % 2 else f.parity
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return ScalarField(grid, (1j * k) ** order * f.coefficients, parity)


def gradient(f: ScalarField) -> VectorField:
    return VectorField(derivative(f, "x"), derivative(f, "y"))


def divergence(v: VectorField) -> ScalarField:
    return derivative(v.u, "x") + derivative(v.w, "y")


def curl(v: VectorField) -> ScalarField:
    """Scalar vorticity dw/dx - du/dy."""
    return derivative(v.w, "x") - derivative(v.u, "y")


def perp_gradient(psi: ScalarField) -> VectorField:
    """(dpsi/dy, -dpsi/dx), divergence-free by construction."""
    return VectorField(derivative(psi, "y"), -derivative(psi, "x"))


def dealiased_product(f: ScalarField, g: ScalarField) -> ScalarField:
    """Pointwise product on the 3/2-padded grid, truncated back.

    Exact for Nyquist-free inputs; Nyquist modes are dropped.
    """
    if f.grid != g.grid:
        raise ValueError("fields live on different grids")
    grid = f.grid
    pf, pg = grid.to_padded(np.stack([f.coefficients, g.coefficients]))
    return ScalarField(grid, grid.from_padded(pf * pg), product_parity(f.parity, g.parity))


def sobolev_norm(f: Field, s: int = 0) -> float:
    """Fourier-multiplier H^s norm over the physical domain."""
    if s < 0 or s > 6 or int(s) != s:
        raise ValueError("s must be an integer in [0, 6]")
    grid = f.grid
    coeffs = f.coefficients
    return spectral_norm(grid, coeffs, s)


def spectral_norm(grid: Grid, coeffs: np.ndarray, s: int = 0) -> float:
    """H^s norm of raw coefficients; leading axes are summed as components."""
    power = np.abs(coeffs) ** 2
    if power.ndim > 2:
        power = power.reshape((-1,) + grid.spectral_shape).sum(axis=0)
    total = np.sum(grid.weight * (1.0 + grid.k2) ** s * power)
    return float(np.sqrt(grid.area * total))


def spectral_inner(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """L2 inner product of two (stacks of) real fields from coefficients."""
    prod = (np.conj(a) * b).real
    if prod.ndim > 2:
        prod = prod.reshape((-1,) + grid.spectral_shape).sum(axis=0)
    return float(grid.area * np.sum(grid.weight * prod))


def quadrature_l2(f: ScalarField) -> float:
    """Physical-space L2 norm by the trapezoidal rule (Parseval cross-check)."""
    grid = f.grid
    v = f.values
    if grid.is_channel:
        wy = np.full(grid.ny + 1, 1.0)
        wy[[0, -1]] = 0.5
        dy = np.pi / grid.ny
    else:
        wy = np.ones(grid.ny)
        dy = grid.ly / grid.ny
    dx = grid.lx / grid.nx
    return float(np.sqrt(np.sum(v**2 * wy[None, :]) * dx * dy))


def random_scalar(grid: Grid, rng: np.random.Generator, parity: Optional[str] = None,
                  kmax: Optional[int] = None, decay: float = 2.0) -> ScalarField:
    """Random real field with spectral decay |k|^-decay, modes |k| <= kmax.

    ``kmax`` defaults to a third of the grid so products stay resolved.
    """
    kmax = grid.nx // 3 if kmax is None else kmax
    shape = grid.spectral_shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    kk = np.sqrt(grid.k2)
    c *= np.where((kk <= kmax) & (kk > 0), (1.0 + kk) ** (-decay), 0.0)
    # round trip through physical space enforces Hermitian symmetry
    c = grid.forward(grid.inverse(c))
    if grid.is_channel:
        parity = parity or EVEN
        c = grid.symmetrize(c, parity)
    return ScalarField(grid, c, parity if grid.is_channel else None)


def random_vector(grid: Grid, rng: np.random.Generator, kmax: Optional[int] = None,
                  decay: float = 2.0) -> VectorField:
    """Random wall-respecting velocity (u even, w odd on the channel)."""
    u = random_scalar(grid, rng, EVEN, kmax, decay)
    w = random_scalar(grid, rng, ODD, kmax, decay)
    return VectorField(u, w)
