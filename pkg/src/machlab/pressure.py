"""Barotropic pressure laws normalized so that p(1) = p'(1) = 1."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

VACUUM_GUARD = 0.1


class VacuumError(ValueError):
    """Total density 1 + eps*rho dropped to the vacuum guard."""


@dataclass(frozen=True)
class PressureLaw:
    kind: str
    gamma: Optional[float] = None
    p: Optional[Callable] = None
    dp: Optional[Callable] = None
    d2p: Optional[Callable] = None

    def __post_init__(self):
        if self.kind == "gamma":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("gamma law needs gamma > 0")
        elif self.kind == "custom":
            if self.p is None or self.dp is None:
                raise ValueError("custom law needs p and dp callables")
        else:
            raise ValueError(f"unknown pressure law kind {self.kind!r}")
        p1, dp1 = float(self.pressure(1.0)), float(self.dpressure(1.0))
        if abs(p1 - 1) > 1e-12 or abs(dp1 - 1) > 1e-12:
            raise ValueError(f"pressure law must satisfy p(1)=p'(1)=1, got {p1}, {dp1}")

    @classmethod
    def gamma_law(cls, gamma: float = 1.4) -> "PressureLaw":
        return cls("gamma", gamma=float(gamma))

    @classmethod
    def custom(cls, p: Callable, dp: Callable, d2p: Optional[Callable] = None) -> "PressureLaw":
        return cls("custom", p=p, dp=dp, d2p=d2p)

    def pressure(self, s):
        if self.kind == "gamma":
            g = self.gamma
            return (g - 1 + np.power(s, g)) / g
        return self.p(s)

    def dpressure(self, s):
        if self.kind == "gamma":
            return np.power(s, self.gamma - 1)
        return self.dp(s)

    def d2pressure(self, s):
        if self.kind == "gamma":
            return (self.gamma - 1) * np.power(s, self.gamma - 2)
        if self.d2p is None:
            raise ValueError("custom law without p''")
        return self.d2p(s)

    def h_eps(self, rho, eps: float):
        """(p'(1+eps*rho)/(1+eps*rho) - 1)/eps, pointwise on arrays."""
        rho = np.asarray(rho, dtype=float)
        x = eps * rho
        guard(x)
        if self.kind == "gamma":
            return np.expm1((self.gamma - 2) * np.log1p(x)) / eps
        s = 1 + x
        return (self.dp(s) / s - 1) / eps

    def excess(self, x):
        """p(1 + x) - 1, accurate for small x."""
        x = np.asarray(x, dtype=float)
        if self.kind == "gamma":
            return np.expm1(self.gamma * np.log1p(x)) / self.gamma
        return self.p(1 + x) - 1

    def inverse_excess(self, y):
        """The x with p(1 + x) = 1 + y, i.e. p_inv(1 + y) - 1."""
        y = np.asarray(y, dtype=float)
        if self.kind == "gamma":
            arg = self.gamma * y
            if np.any(arg <= -1):
                raise VacuumError("p_inv undefined: 1 + gamma*y <= 0")
            return np.expm1(np.log1p(arg) / self.gamma)
        flat = [brentq(lambda x, t=t: self.p(1 + x) - 1 - t, -1 + 1e-12, 1e3) for t in y.ravel()]
        return np.array(flat).reshape(y.shape)

    def pinv(self, s):
        return 1 + self.inverse_excess(np.asarray(s, dtype=float) - 1)


def guard(x) -> None:
    """Raise if the total density 1 + x falls to the vacuum guard."""
    m = float(np.min(x)) if np.size(x) else 0.0
    if 1 + m <= VACUUM_GUARD:
        raise VacuumError(f"total density {1 + m:.3g} at or below guard {VACUUM_GUARD}")
