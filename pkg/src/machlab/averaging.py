"""Finite-dimensional bilinear systems d_t u + b(v, u) = gamma.

Two solutions driven by the same v and forcings gamma_1, gamma_2 differ by
an amount controlled by the time integral of gamma_1 - gamma_2, so a
forcing oscillating at frequency 1/eps moves the solution only by O(eps)
however large its amplitude.  This module integrates such systems and
measures that sensitivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

MIN_SAMPLES_PER_PERIOD = 8


class UnderResolvedError(ValueError):
    """Time step too coarse for the forcing frequency."""


def _zero(n):
    return lambda t: np.zeros(n)


@dataclass
class BilinearODE:
    """``b(v, u)_i = sum_jk tensor[i, j, k] v_j u_k``.

    ``frequency`` is the largest angular frequency present in ``gamma``; it
    sets the resolution requirement of :func:`integrate`.
    """

    tensor: np.ndarray
    v: Callable[[float], np.ndarray]
    gamma: Optional[Callable[[float], np.ndarray]] = None
    frequency: float = 0.0
    n: int = field(init=False)

    def __post_init__(self):
        self.tensor = np.asarray(self.tensor, dtype=float)
        if self.tensor.ndim != 3 or len(set(self.tensor.shape)) != 1:
            raise ValueError("tensor must have shape (n, n, n)")
        self.n = self.tensor.shape[0]
        if self.gamma is None:
            self.gamma = _zero(self.n)

    def b(self, v: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.einsum("ijk,j,k->i", self.tensor, v, u)

    def rhs(self, t: float, u: np.ndarray) -> np.ndarray:
        return self.gamma(t) - self.b(self.v(t), u)

    def dissipativity_constant(self) -> float:
        """C with |<u, b(v, u)>| <= C |v| |u|^2: only the symmetric part counts."""
        sym = 0.5 * (self.tensor + self.tensor.transpose(2, 1, 0))
        norms = [np.linalg.norm(sym[:, j, :], 2) for j in range(self.n)]
        return float(np.sqrt(np.sum(np.square(norms))))

    def with_forcing(self, gamma: Callable[[float], np.ndarray], frequency: float) -> "BilinearODE":
        return BilinearODE(self.tensor, self.v, gamma, frequency)


def skew_tensor(n: int = 4, seed: int = 0) -> np.ndarray:
    """b(v, .) = sum_j v_j S_j with every S_j skew: <u, b(v, u)> = 0."""
    rng = np.random.default_rng(seed)
    t = np.empty((n, n, n))
    for j in range(n):
        a = rng.standard_normal((n, n))
        t[:, j, :] = 0.5 * (a - a.T)
    return t


def nonskew_tensor(n: int = 4, seed: int = 0, strength: float = 0.3) -> np.ndarray:
    """A skew tensor plus a symmetric part of the given strength."""
    rng = np.random.default_rng(seed + 1)
    t = skew_tensor(n, seed)
    for j in range(n):
        a = rng.standard_normal((n, n))
        t[:, j, :] += strength * 0.5 * (a + a.T) / n
    return t


def default_coefficient(t: float) -> np.ndarray:
    """A bounded, slowly varying v(t) in R^4."""
    return np.array([np.cos(t), np.sin(t), 0.5, 0.25 * np.cos(2 * t)])


def example_system(kind: str = "skew", seed: int = 0) -> BilinearODE:
    if kind == "skew":
        tensor = skew_tensor(4, seed)
    elif kind == "nonskew":
        tensor = nonskew_tensor(4, seed)
    else:
        raise ValueError(f"unknown example {kind!r}")
    return BilinearODE(tensor, default_coefficient)


def integrate(system: BilinearODE, u0, T: float, dt: float):
    """Classical RK4 from t = 0 to T; returns ``(times, trajectory)``."""
    if system.frequency > 0:
        period = 2 * np.pi / system.frequency
        if dt > period / MIN_SAMPLES_PER_PERIOD * (1 + 1e-12):
            raise UnderResolvedError(
                f"dt = {dt:.3g} gives fewer than {MIN_SAMPLES_PER_PERIOD} steps per forcing period")
    n = max(1, int(np.ceil(T / dt - 1e-9)))
    h = T / n
    u = np.array(u0, dtype=float)
    traj = np.empty((n + 1, u.size))
    traj[0] = u
    f = system.rhs
    for i in range(n):
        t = i * h
        k1 = f(t, u)
        k2 = f(t + 0.5 * h, u + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, u + 0.5 * h * k2)
        k4 = f(t + h, u + h * k3)
        u = u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        traj[i + 1] = u
    return np.linspace(0.0, T, n + 1), traj


def a_priori_bound(system: BilinearODE, times: np.ndarray, xi: np.ndarray) -> float:
    """sup|xi| + (exp(C M T) - 1)/(C M) sup|b(v, xi)| along the samples."""
    C = system.dissipativity_constant()
    vs = np.array([system.v(t) for t in times])
    M = float(np.max(np.linalg.norm(vs, axis=1)))
    T = float(times[-1] - times[0])
    growth = T if C * M == 0 else np.expm1(C * M * T) / (C * M)
    bxi = max(np.linalg.norm(system.b(v, x)) for v, x in zip(vs, xi))
    return float(np.max(np.linalg.norm(xi, axis=1)) + growth * bxi)


def _sup_difference(system: BilinearODE, gamma2, freq: float, u0, T, dt):
    s1 = system.with_forcing(_zero(system.n), 0.0)
    s2 = system.with_forcing(gamma2, freq)
    times, a = integrate(s1, u0, T, dt)
    _, b = integrate(s2, u0, T, dt)
    return times, float(np.max(np.linalg.norm(a - b, axis=1)))


def forcing_sensitivity_experiment(system: Optional[BilinearODE] = None,
                                   eps_list: Sequence[float] = (0.1, 0.05, 0.025, 0.0125),
                                   amplitude: float = 1.0, direction=None, T: float = 1.0,
                                   samples_per_period: int = 32, u0=None) -> dict:
    """sup_t |u1 - u2| for gamma_1 = 0 against gamma_2 = A sin(t/eps) g.

    Also runs the zero-frequency control gamma_2 = A g, where time averaging
    offers no gain, and evaluates the a-priori bound for every run.
    """
    from .harness import fit_rate

    if samples_per_period < MIN_SAMPLES_PER_PERIOD:
        raise UnderResolvedError(f"need at least {MIN_SAMPLES_PER_PERIOD} samples per period")
    system = system or example_system("nonskew")
    n = system.n
    g = np.zeros(n) if direction is None else np.asarray(direction, dtype=float)
    if direction is None:
        g[0] = 1.0
    u0 = np.ones(n) / np.sqrt(n) if u0 is None else np.asarray(u0, dtype=float)

    errors, control, bounds = [], [], []
    for eps in eps_list:
        dt = 2 * np.pi * eps / samples_per_period
        times, err = _sup_difference(
            system, lambda t, e=eps: amplitude * np.sin(t / e) * g, 1.0 / eps, u0, T, dt)
        xi = np.outer(amplitude * eps * (1 - np.cos(times / eps)), g)
        errors.append(err)
        bounds.append(a_priori_bound(system, times, xi))
        _, cerr = _sup_difference(system, lambda t: amplitude * g, 0.0, u0, T, dt)
        control.append(cerr)

    out = {"eps": list(eps_list), "errors": errors, "control_errors": control,
           "bounds": bounds, "bound_ok": bool(all(e <= b * (1 + 1e-9) for e, b in zip(errors, bounds)))}
    if amplitude != 0 and len(eps_list) >= 3:
        out["slope"] = fit_rate(eps_list, errors)["slope"]
        out["control_slope"] = fit_rate(eps_list, control)["slope"]
    return out
