"""Passive scalar transport d_t theta + v.grad theta = 0.

Scalars driven by a compressible run are advanced inside that run's
nonlinear substep (see ``CompressibleModel.scalar_sources``) so that they
share its time levels exactly; :func:`advect_step` is the standalone
version for a frozen velocity.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .compressible import CFLError
from .spectral import EVEN, Grid, ScalarField, VectorField

C_CFL = 0.4


class VelocitySource(str, Enum):
    COMPRESSIBLE = "compressible"
    INCOMPRESSIBLE = "incompressible"
    LERAY_OF_COMPRESSIBLE = "leray_of_compressible"


@dataclass(frozen=True)
class ScalarTrajectory:
    theta: ScalarField
    velocity_source: VelocitySource
    time: float = 0.0


def default_theta0(grid: Grid) -> ScalarField:
    """cos x + sin y on the torus; cos x + cos y on the channel (even in y)."""
    if grid.is_channel:
        return ScalarField.from_function(grid, lambda X, Y: np.cos(X) + np.cos(Y), EVEN)
    return ScalarField.from_function(grid, lambda X, Y: np.cos(X) + np.sin(Y))


def _advection_rate(grid: Grid, v: np.ndarray, th: np.ndarray) -> np.ndarray:
    ph = grid.to_padded(np.stack([v[0], v[1], grid.ddx(th), grid.ddy(th)]))
    return -grid.from_padded(ph[0] * ph[2] + ph[1] * ph[3])


def advect_step(theta: ScalarField, velocity: VectorField, dt: float,
                dt_max: Optional[float] = None) -> ScalarField:
    """One RK4 step of d_t theta = -v.grad theta with v frozen over the step."""
    g = theta.grid
    if velocity.grid != g:
        raise ValueError("theta and velocity live on different grids")
    vmax = float(np.max(np.hypot(velocity.u.extended_values, velocity.w.extended_values)))
    if vmax > 0 and dt > C_CFL * g.dx_min / vmax * (1 + 1e-12):
        raise CFLError(f"dt = {dt:.4g} exceeds CFL limit {C_CFL * g.dx_min / vmax:.4g}")
    if dt_max is not None and dt > dt_max:
        raise CFLError(f"dt = {dt:.4g} exceeds dt_max = {dt_max:.4g}")
    v = velocity.coefficients
    y = theta.coefficients
    k1 = _advection_rate(g, v, y)
    k2 = _advection_rate(g, v, y + 0.5 * dt * k1)
    k3 = _advection_rate(g, v, y + 0.5 * dt * k2)
    k4 = _advection_rate(g, v, y + dt * k3)
    y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if g.is_channel:
        y = g.symmetrize(y, theta.parity)
    return ScalarField(g, y, theta.parity)


def scalar_error_experiment(config) -> dict:
    """Per-eps sup_t ||theta - theta~|| for the v- and Pv-driven scalars.

    Runs the harness sweep (scalars are advanced in lockstep with the
    velocities that drive them) and returns the scalar columns with fits.
    """
    from .harness import fit_rate, run_convergence_sweep

    report = run_convergence_sweep(config)
    rows = [r for r in report.rows if r.get("valid")]
    eps = [r["eps"] for r in rows]
    out = {"eps": eps,
           "theta_v": [r["sup_theta_err"] for r in rows],
           "theta_pv": [r["sup_theta_p_err"] for r in rows]}
    if len(eps) >= 3 and all(e > 0 for e in out["theta_v"] + out["theta_pv"]):
        out["slope_v"] = fit_rate(eps, out["theta_v"])["slope"]
        out["slope_pv"] = fit_rate(eps, out["theta_pv"])["slope"]
    return out
