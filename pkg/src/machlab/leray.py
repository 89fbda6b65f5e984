"""Leray projection onto wall-respecting divergence-free fields.

``Q v = grad(phi)`` where phi solves the Neumann problem
``lap(phi) = div(v)``, ``d(phi)/dn = v.n``; ``P = I - Q``.  On both geometries
the Laplacian is diagonal in the (extended) trigonometric basis, so the
solve is an exact division per mode.  Mean (harmonic) modes go to P.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import (
    EVEN,
    Grid,
    ScalarField,
    VectorField,
    curl,
    dealiased_product,
    derivative,
    divergence,
    spectral_inner,
    spectral_norm,
)

WALL_TOL = 1e-8
COMPAT_TOL = 1e-10


class WallConditionError(ValueError):
    """Raised when a channel velocity violates v.n = 0 on the walls."""


@dataclass(frozen=True)
class HelmholtzSplit:
    p_part: VectorField
    q_part: VectorField
    potential: ScalarField


def _inv_k2(grid: Grid, k2: np.ndarray) -> np.ndarray:
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    return inv


def project_coeffs(grid: Grid, u: np.ndarray, w: np.ndarray):
    """Raw-array projection: returns ``(pu, pw, qu, qw)``.

    Uses the odd-derivative symbols in both the divergence and the gradient,
    so the discrete P is an exact orthogonal projector.
    """
    kx, ky = grid.kx_d, grid.ky_d
    s = (kx * u + ky * w) * _inv_k2(grid, grid.k2_d)
    qu = kx * s
    qw = ky * s
    return u - qu, w - qw, qu, qw


def apply_p(grid: Grid, u: np.ndarray, w: np.ndarray):
    pu, pw, _, _ = project_coeffs(grid, u, w)
    return pu, pw


def solve_neumann_poisson(rhs: ScalarField, boundary_flux: float | np.ndarray = 0.0) -> ScalarField:
    """Zero-mean solution of ``lap(phi) = rhs`` with ``dphi/dn = flux``.

    Only homogeneous wall flux is representable in the cosine basis, so a
    nonzero ``boundary_flux`` is rejected.  The compatibility condition then
    requires ``rhs`` to have zero mean.
    """
    grid = rhs.grid
    if np.any(np.abs(np.asarray(boundary_flux)) > COMPAT_TOL):
        raise ValueError("only homogeneous Neumann data is supported on these geometries")
    scale = max(1.0, float(np.max(np.abs(rhs.coefficients))))
    if abs(rhs.mean()) > COMPAT_TOL * scale:
        raise ValueError(f"incompatible Neumann data: mean(rhs) = {rhs.mean():.3e}")
    if grid.is_channel and rhs.parity != EVEN:
        raise ValueError("Neumann potential on the channel must be even (cosine) in y")
    phi = -rhs.coefficients * _inv_k2(grid, grid.k2)
    return ScalarField(grid, phi, rhs.parity)


def leray_project(v: VectorField) -> HelmholtzSplit:
    grid = v.grid
    flux = v.wall_flux()
    if flux > WALL_TOL:
        raise WallConditionError(f"wall flux {flux:.3e} exceeds {WALL_TOL:g}")
    u, w = v.u.coefficients, v.w.coefficients
    pu, pw, qu, qw = project_coeffs(grid, u, w)
    div = 1j * (grid.kx_d * u + grid.ky_d * w)
    phi = -div * _inv_k2(grid, grid.k2_d)
    return HelmholtzSplit(
        p_part=VectorField.from_arrays(grid, pu, pw),
        q_part=VectorField.from_arrays(grid, qu, qw),
        potential=ScalarField(grid, phi, v.u.parity),
    )


def P(v: VectorField) -> VectorField:
    return leray_project(v).p_part


def Q(v: VectorField) -> VectorField:
    return leray_project(v).q_part


def advection(a: VectorField, b: VectorField) -> VectorField:
    """Dealiased (a.grad) b."""

    def comp(f):
        return (dealiased_product(a.u, derivative(f, "x"))
                + dealiased_product(a.w, derivative(f, "y")))

    return VectorField(comp(b.u), comp(b.w))


def check_projection_identities(v: VectorField) -> dict:
    """Residuals of idempotence, orthogonality, curl and divergence identities."""
    grid = v.grid
    split = leray_project(v)
    pv, qv = split.p_part, split.q_part
    ppv = P(pv)
    return {
        "idempotence": spectral_norm(grid, (ppv - pv).coefficients),
        "orthogonality": abs(spectral_inner(grid, pv.coefficients, qv.coefficients)),
        "curl": spectral_norm(grid, (curl(pv) - curl(v)).coefficients),
        "divergence": spectral_norm(grid, divergence(pv).coefficients),
    }


def decoupling_residual(v: VectorField) -> float:
    """L2 norm of P(vQ . grad vQ), zero by the fast-fast decoupling identity."""
    vq = Q(v)
    return spectral_norm(v.grid, P(advection(vq, vq)).coefficients)
