"""Traceless symmetric 3x3 tensor algebra and the two potentials.

Q-tensors live in the five-dimensional space of traceless symmetric real
3x3 matrices.  Internally most heavy lifting happens in a fixed orthonormal
basis of that space ("coefficient" representation, shape ``(..., 5)``), so
symmetry and tracelessness hold structurally; matrices are materialized only
where traces or products are needed.  The public contract of every operation
is stated on the 3x3 matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT_2_3 = math.sqrt(2.0 / 3.0)
SQRT_3_2 = math.sqrt(1.5)

# |Q| threshold below which the field potential is declared degenerate.
EPS_G = 1e-9
# Directors farther than this from unit length are rejected instead of
# being silently renormalized.
UNIT_TOL = 1e-6

_r2 = 1.0 / math.sqrt(2.0)
_r6 = 1.0 / math.sqrt(6.0)

#: Orthonormal basis of the traceless symmetric matrices, shape (5, 3, 3).
#: The last element is the uniaxial e3 direction: Q_inf = sqrt(2/3) * E5.
S0_BASIS = np.array(
    [
        [[_r2, 0.0, 0.0], [0.0, -_r2, 0.0], [0.0, 0.0, 0.0]],
        [[0.0, _r2, 0.0], [_r2, 0.0, 0.0], [0.0, 0.0, 0.0]],
        [[0.0, 0.0, _r2], [0.0, 0.0, 0.0], [_r2, 0.0, 0.0]],
        [[0.0, 0.0, 0.0], [0.0, 0.0, _r2], [0.0, _r2, 0.0]],
        [[-_r6, 0.0, 0.0], [0.0, -_r6, 0.0], [0.0, 0.0, 2.0 * _r6]],
    ]
)

E3 = np.array([0.0, 0.0, 1.0])


def to_matrix(coeffs: np.ndarray) -> np.ndarray:
    """Materialize basis coefficients ``(..., 5)`` as matrices ``(..., 3, 3)``."""
    return np.einsum("...k,kij->...ij", np.asarray(coeffs, dtype=float), S0_BASIS)


def to_coeffs(Q: np.ndarray) -> np.ndarray:
    """Project matrices ``(..., 3, 3)`` onto the orthonormal basis ``(..., 5)``."""
    return np.einsum("...ij,kij->...k", np.asarray(Q, dtype=float), S0_BASIS)


def is_traceless_symmetric(Q: np.ndarray, tol: float = 1e-12) -> bool:
    Q = np.asarray(Q, dtype=float)
    return bool(
        np.all(np.abs(Q - np.swapaxes(Q, -1, -2)) <= tol)
        and np.all(np.abs(np.trace(Q, axis1=-2, axis2=-1)) <= tol)
    )


def unit_director(v: np.ndarray) -> np.ndarray:
    """Return ``v`` renormalized to unit length; reject clearly non-unit input."""
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > UNIT_TOL:
        raise ValueError(f"director must be unit length, got |v| = {norm:.8g}")
    return v / norm


@dataclass(frozen=True)
class PotentialParams:
    """Coefficients of the bulk potential; the additive constant is chosen
    so that the minimum value is exactly zero.

    ``s_star`` is the uniaxial amplitude of the minimizers,
    (b + sqrt(b^2 + 24ac)) / (4c).
    """

    a: float = 1.0
    b: float = 3.0
    c: float = 3.0
    C: float = None  # type: ignore[assignment]  # derived in __post_init__ when None
    s_star: float = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0 or self.c <= 0:
            raise ValueError("need a, b >= 0 and c > 0")
        if self.s_star is None:
            s = (self.b + math.sqrt(self.b**2 + 24.0 * self.a * self.c)) / (4.0 * self.c)
            object.__setattr__(self, "s_star", s)
        if self.C is None:
            s = self.s_star
            # f(s * (n x n - I/3)) = C - a s^2/3 - 2 b s^3/27 + c s^4/9 = 0
            C = self.a * s**2 / 3.0 + 2.0 * self.b * s**3 / 27.0 - self.c * s**4 / 9.0
            object.__setattr__(self, "C", C)


DEFAULT_PARAMS = PotentialParams()


def uniaxial(v: np.ndarray, s: float) -> np.ndarray:
    """Uniaxial tensor s (v x v - I/3) for a unit director v."""
    v = unit_director(v)
    return s * (np.outer(v, v) - np.eye(3) / 3.0)


Q_INF = uniaxial(E3, 1.0)
Q_INF_COEFFS = to_coeffs(Q_INF)


def frob_inner(A: np.ndarray, B: np.ndarray) -> float:
    """Frobenius inner product sum_ij A_ij B_ij."""
    return float(np.sum(np.asarray(A, dtype=float) * np.asarray(B, dtype=float)))


def trace_cubed(Q: np.ndarray) -> float:
    """tr(Q^3) by direct matrix products."""
    Q = np.asarray(Q, dtype=float)
    return float(np.einsum("ij,jk,ki->", Q, Q, Q))


def bulk_f(Q: np.ndarray, params: PotentialParams = DEFAULT_PARAMS) -> float:
    """Bulk potential C - (a/2)|Q|^2 - (b/3)tr(Q^3) + (c/4)|Q|^4.

    Nonnegative, vanishing exactly on the uniaxial minimizers of amplitude
    ``params.s_star``.
    """
    Q = np.asarray(Q, dtype=float)
    n2 = float(np.sum(Q * Q))
    return (
        params.C
        - 0.5 * params.a * n2
        - params.b / 3.0 * trace_cubed(Q)
        + 0.25 * params.c * n2 * n2
    )


def field_g_flagged(Q: np.ndarray) -> tuple[float, bool]:
    """Field potential sqrt(2/3) - Q_33/|Q| and a degeneracy flag.

    The potential is scale invariant and undefined at Q = 0; below ``EPS_G``
    we return the supremum-compatible value sqrt(2/3) and flag the
    evaluation so callers can assert their constructions stay away from the
    isotropic state.
    """
    Q = np.asarray(Q, dtype=float)
    norm = float(np.linalg.norm(Q))
    if norm <= EPS_G:
        return SQRT_2_3, True
    return SQRT_2_3 - float(Q[2, 2]) / norm, False


def field_g(Q: np.ndarray) -> float:
    """Field potential; degenerate evaluations silently map to sqrt(2/3)."""
    return field_g_flagged(Q)[0]


# ---------------------------------------------------------------------------
# Vectorized coefficient-space kernels (used by the profile solvers).
# In this basis Q_33 = sqrt(2/3) * c5 and |Q|^2 = |c|^2.
# ---------------------------------------------------------------------------


def coeff_norm(C: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(C, dtype=float), axis=-1)


def trace_cubed_coeffs(C: np.ndarray) -> np.ndarray:
    Q = to_matrix(C)
    return np.einsum("...ij,...jk,...ki->...", Q, Q, Q)


def bulk_f_coeffs(C: np.ndarray, params: PotentialParams = DEFAULT_PARAMS) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    n2 = np.sum(C * C, axis=-1)
    return (
        params.C
        - 0.5 * params.a * n2
        - params.b / 3.0 * trace_cubed_coeffs(C)
        + 0.25 * params.c * n2 * n2
    )


def bulk_f_grad_coeffs(C: np.ndarray, params: PotentialParams = DEFAULT_PARAMS) -> np.ndarray:
    """Gradient of ``bulk_f_coeffs`` with respect to the coefficients."""
    C = np.asarray(C, dtype=float)
    n2 = np.sum(C * C, axis=-1, keepdims=True)
    Q = to_matrix(C)
    Q2 = np.einsum("...ij,...jk->...ik", Q, Q)
    # d tr(Q^3)/dc_k = 3 <Q^2, E_k>; the basis projection drops the trace part.
    grad_tr3 = 3.0 * to_coeffs(Q2)
    return -params.a * C - params.b / 3.0 * grad_tr3 + params.c * n2 * C


def field_g_coeffs(C: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized field potential; returns values and the degeneracy mask."""
    C = np.asarray(C, dtype=float)
    norm = np.linalg.norm(C, axis=-1)
    degenerate = norm <= EPS_G
    safe = np.where(degenerate, 1.0, norm)
    g = SQRT_2_3 * (1.0 - C[..., 4] / safe)
    return np.where(degenerate, SQRT_2_3, g), degenerate


def field_g_grad_coeffs(C: np.ndarray) -> np.ndarray:
    """Gradient of the field potential; zero on degenerate rows."""
    C = np.asarray(C, dtype=float)
    norm = np.linalg.norm(C, axis=-1, keepdims=True)
    degenerate = norm <= EPS_G
    safe = np.where(degenerate, 1.0, norm)
    grad = -SQRT_2_3 * (-C[..., 4:5] * C / safe**3)
    grad[..., 4] -= SQRT_2_3 / safe[..., 0]
    return np.where(degenerate, 0.0, grad)
