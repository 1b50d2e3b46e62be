"""Closed-form heteroclinic director profiles in the strong-field limit.

For a unit starting director at angle ``varphi`` from e3, the minimizing
connection to e3 lies in their common plane and admits the explicit form

    n3(t) = (A - exp(-kappa t)) / (A + exp(-kappa t)),
    A     = (1 + cos(varphi)) / (1 - cos(varphi)),

with the universal rate kappa = 24**(1/4).  The resulting energy density
is kappa * (1 - v3).  These profiles serve as the independent oracle for
the numerical profile minimizers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .qtensor import SQRT_3_2, unit_director

#: One-dimensional transition energy scale, 24**(1/4) = 2 * (3/2)**(1/4).
KAPPA = 24.0 ** 0.25


@dataclass(frozen=True)
class InfProfileParams:
    """Angle between the starting director and e3, plus the rate constant."""

    varphi: float
    kappa: float = KAPPA

    def __post_init__(self) -> None:
        if not 0.0 <= self.varphi <= math.pi:
            raise ValueError(f"varphi must lie in [0, pi], got {self.varphi}")

    @property
    def A(self) -> float:
        c = math.cos(self.varphi)
        if self.varphi >= math.pi:
            raise ValueError("varphi = pi excluded: the antipodal start has no connection of this form")
        return (1.0 + c) / (1.0 - c)


def n_exact(t: np.ndarray, params: InfProfileParams) -> np.ndarray:
    """Evaluate the closed-form profile; returns shape ``t.shape + (3,)``.

    The director is (-sqrt(1 - n3^2), 0, n3); varphi = 0 degenerates to the
    constant path e3, varphi = pi is rejected.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    if params.varphi == 0.0:
        out = np.zeros(t.shape + (3,))
        out[..., 2] = 1.0
        return out
    A = params.A  # raises on varphi = pi
    u = np.exp(-params.kappa * t)
    n3 = (A - u) / (A + u)
    n1 = -np.sqrt(np.clip(1.0 - n3 * n3, 0.0, None))
    out = np.zeros(t.shape + (3,))
    out[..., 0] = n1
    out[..., 2] = n3
    return out


def _A_and_dA(varphi: float) -> tuple[float, float]:
    c = math.cos(varphi)
    s = math.sin(varphi)
    A = (1.0 + c) / (1.0 - c)
    dA = -2.0 * s / (1.0 - c) ** 2
    return A, dA


def dn_dt_squared(t: np.ndarray, varphi: float) -> np.ndarray:
    """|dn/dt|^2 along the profile, analytically: kappa^2 A u / (A + u)^2."""
    A, _ = _A_and_dA(varphi)
    u = np.exp(-KAPPA * np.asarray(t, dtype=float))
    return KAPPA**2 * A * u / (A + u) ** 2


def dn_dvarphi_squared(t: np.ndarray, varphi: float) -> np.ndarray:
    """|dn/dvarphi|^2 along the profile (derivative at fixed t)."""
    A, dA = _A_and_dA(varphi)
    u = np.exp(-KAPPA * np.asarray(t, dtype=float))
    dn3 = 2.0 * u * dA / (A + u) ** 2
    one_minus_n32 = 4.0 * A * u / (A + u) ** 2
    return dn3**2 / one_minus_n32


def n1_squared(t: np.ndarray, varphi: float) -> np.ndarray:
    """|n1|^2 = 1 - n3^2 along the profile."""
    A, _ = _A_and_dA(varphi)
    u = np.exp(-KAPPA * np.asarray(t, dtype=float))
    return 4.0 * A * u / (A + u) ** 2


def D_inf_exact(v: np.ndarray) -> float:
    """Exact strong-field energy density kappa * (1 - |v3|).

    The absolute value implements the identification of v with -v (both give
    the same uniaxial boundary tensor).
    """
    v = unit_director(v)
    return KAPPA * (1.0 - abs(float(v[2])))


@lru_cache(maxsize=1)
def _decay_constant() -> float:
    """Calibrate the envelope constant once over a (t, varphi) sample grid.

    The profile satisfies |dn/dt|^2, |dn/dvarphi|^2, |n1|^2 <= C exp(-kappa t)
    uniformly for starting angles in (0, pi/2] (v3 in [0, 1)); the constant is
    frozen as 4 * max(1, sup of the three quantities times exp(kappa t)).
    """
    ts = np.linspace(0.0, 25.0, 501)
    sup = 1.0
    for varphi in np.linspace(1e-3, math.pi / 2, 200):
        w = np.exp(KAPPA * ts)
        sup = max(
            sup,
            float(np.max(dn_dt_squared(ts, varphi) * w)),
            float(np.max(dn_dvarphi_squared(ts, varphi) * w)),
            float(np.max(n1_squared(ts, varphi) * w)),
        )
    return 4.0 * sup


def decay_envelope(t: np.ndarray) -> np.ndarray:
    """Envelope C exp(-kappa t) dominating the profile's decay quantities."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    return _decay_constant() * np.exp(-KAPPA * t)


def g_director(n: np.ndarray) -> np.ndarray:
    """Field potential of a unit director: sqrt(3/2) (1 - n3^2)."""
    n = np.asarray(n, dtype=float)
    return SQRT_3_2 * (1.0 - n[..., 2] ** 2)
