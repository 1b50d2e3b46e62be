"""Reduced description of transition profiles: frame, angles, trace polynomial.

Profiles starting from a uniaxial boundary tensor stay inside the span of an
orthonormal triple (Q_v_bar, Q_inf_bar, Q_mix_bar); in that frame the unit
part of the tensor is parameterized by two angles,

    Q* = cos(a) cos(b) Q_v_bar + sin(a) cos(b) Q_inf_bar + sin(b) Q_mix_bar,

and tr((Q*)^3) reduces to an eight-term trigonometric polynomial whose
coefficients depend only on v3.  The coefficients below were regenerated
symbolically from the frame definition and are validated against the direct
3x3 matrix trace in the test suite; the same goes for the tensor identity
implemented by :func:`identity_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import qtensor as qt
from .errors import DegenerateFrameError, SolverError
from .profile1d import (
    Grid1D,
    Profile,
    TENSOR,
    _apply_diff,
    energy_F_lambda,
)

SQRT_2_3 = qt.SQRT_2_3


@dataclass(frozen=True)
class Frame:
    """Orthonormal triple spanning the reduction subspace for director v."""

    q_v_bar: np.ndarray
    q_inf_bar: np.ndarray
    q_mix_bar: np.ndarray
    v: np.ndarray

    def coeff_rows(self) -> np.ndarray:
        """Basis coefficients of the triple, shape (3, 5)."""
        return np.stack(
            [qt.to_coeffs(self.q_v_bar), qt.to_coeffs(self.q_inf_bar), qt.to_coeffs(self.q_mix_bar)]
        )

    def gram(self) -> np.ndarray:
        rows = self.coeff_rows()
        return rows @ rows.T


def build_frame(v: np.ndarray) -> Frame:
    """Gram-Schmidt the pair (Q_v, Q_mix) against the far-field direction."""
    v = qt.unit_director(v)
    if float(np.hypot(v[0], v[1])) < 1e-8:
        raise DegenerateFrameError("frame undefined for v parallel to e3")
    q_inf_bar = qt.SQRT_3_2 * qt.Q_INF
    Qv = np.outer(v, v) - np.eye(3) / 3.0
    num = Qv - qt.frob_inner(Qv, q_inf_bar) * q_inf_bar
    q_v_bar = num / np.linalg.norm(num)
    Qmix = np.outer(v, qt.E3) + np.outer(qt.E3, v) - (2.0 / 3.0) * v[2] * np.eye(3)
    num2 = (
        Qmix
        - qt.frob_inner(Qmix, q_v_bar) * q_v_bar
        - qt.frob_inner(Qmix, q_inf_bar) * q_inf_bar
    )
    q_mix_bar = num2 / np.linalg.norm(num2)
    return Frame(q_v_bar, q_inf_bar, q_mix_bar, v)


def canonical_director(v3: float) -> np.ndarray:
    """The in-plane representative (-sqrt(1 - v3^2), 0, v3)."""
    if not -1.0 < v3 < 1.0:
        raise ValueError("need |v3| < 1")
    return np.array([-math.sqrt(1.0 - v3 * v3), 0.0, v3])


def frame_from_v3(v3: float) -> Frame:
    return build_frame(canonical_director(v3))


def alpha_boundary(v3: float) -> float:
    """Initial angle arcsin((3 v3^2 - 1) / 2) of the uniaxial boundary state."""
    return math.asin((3.0 * v3 * v3 - 1.0) / 2.0)


def q_star(alpha: float, beta: float, frame: Frame) -> np.ndarray:
    """Unit-norm tensor at angles (alpha, beta) in the reduction frame."""
    return (
        math.cos(alpha) * math.cos(beta) * frame.q_v_bar
        + math.sin(alpha) * math.cos(beta) * frame.q_inf_bar
        + math.sin(beta) * frame.q_mix_bar
    )


# ---------------------------------------------------------------------------
# Trace polynomial T(alpha, beta, v3) = tr((Q*)^3) and its derivatives.
# ---------------------------------------------------------------------------


def _trace_coeffs(v3):
    """The eight coefficient functions of v3 (broadcasting over arrays)."""
    v3 = np.asarray(v3, dtype=float)
    w = v3 * v3
    if np.any(w >= 1.0):
        raise ValueError("need |v3| < 1")
    r6 = 1.0 / math.sqrt(6.0)
    t13 = w + 1.0 / 3.0
    t13_32 = t13 ** 1.5
    root = np.sqrt(1.0 - w)
    c1 = np.full_like(w, r6)
    c2 = 1.5 / math.sqrt(2.0) * (w - 1.0) * (9.0 * w - 1.0) / (root * (3.0 * w + 1.0) ** 1.5)
    c3 = math.sqrt(1.5) * (w - 1.0 / 3.0) / t13
    c4 = -r6 * v3 * (1.0 - w) / t13_32
    c5 = -3.0 * v3 * SQRT_2_3 * (w - 1.0 / 3.0) / t13_32
    c6 = 3.0 / (2.0 * math.sqrt(6.0)) * (1.0 - 9.0 * w) / (3.0 * w + 1.0)
    c7 = SQRT_2_3 * w * root / t13_32
    c8 = 3.0 * v3 * np.sqrt(6.0 - 6.0 * w) / (3.0 * w + 1.0)
    return c1, c2, c3, c4, c5, c6, c7, c8


def _monomials(alpha, beta):
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    return (
        sa**3 * cb**3,
        ca * sb**2 * cb,
        ca**2 * sa * cb**3,
        sb**3,
        ca**2 * sb * cb**2,
        sa * sb**2 * cb,
        ca**3 * cb**3,
        sa * ca * sb * cb**2,
    )


def _monomials_dalpha(alpha, beta):
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    return (
        3.0 * sa**2 * ca * cb**3,
        -sa * sb**2 * cb,
        (ca**3 - 2.0 * ca * sa**2) * cb**3,
        np.zeros_like(sa * sb),
        -2.0 * ca * sa * sb * cb**2,
        ca * sb**2 * cb,
        -3.0 * ca**2 * sa * cb**3,
        (ca**2 - sa**2) * sb * cb**2,
    )


def _monomials_dbeta(alpha, beta):
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    return (
        -3.0 * sa**3 * cb**2 * sb,
        ca * (2.0 * sb * cb**2 - sb**3),
        -3.0 * ca**2 * sa * cb**2 * sb,
        3.0 * sb**2 * cb,
        ca**2 * (cb**3 - 2.0 * sb**2 * cb),
        sa * (2.0 * sb * cb**2 - sb**3),
        -3.0 * ca**3 * cb**2 * sb,
        sa * ca * (cb**3 - 2.0 * sb**2 * cb),
    )


def trace_T(alpha, beta, v3):
    """tr((Q*)^3) as a function of the two angles and v3 (broadcasts)."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    cs = _trace_coeffs(v3)
    ms = _monomials(alpha, beta)
    out = sum(c * m for c, m in zip(cs, ms))
    return float(out) if out.ndim == 0 else out


def trace_T_dalpha(alpha, beta, v3):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    cs = _trace_coeffs(v3)
    ms = _monomials_dalpha(alpha, beta)
    out = sum(c * m for c, m in zip(cs, ms))
    return float(out) if out.ndim == 0 else out


def trace_T_dbeta(alpha, beta, v3):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    cs = _trace_coeffs(v3)
    ms = _monomials_dbeta(alpha, beta)
    out = sum(c * m for c, m in zip(cs, ms))
    return float(out) if out.ndim == 0 else out


def identity_check(alpha: float, beta: float, v3: float) -> float:
    """Residual norm of the tensor identity satisfied by the reduced states.

    The identity couples the angle-derivatives of the trace polynomial with
    the algebra of Q*:

        (cos b)^{-1} dT/da (sin a Q_v_bar - cos a Q_inf_bar)
        + dT/db (sin b (cos a Q_v_bar + sin a Q_inf_bar) - cos b Q_mix_bar)
        + 3 (Q*)^2 - 3 T Q* - I = 0.

    Note the relative signs: they follow from the Euler-Lagrange computation
    and are what actually makes the expression vanish.
    """
    if abs(math.cos(beta)) < 1e-8:
        raise ValueError("identity evaluation requires |cos(beta)| >= 1e-8")
    frame = frame_from_v3(v3)
    Qs = q_star(alpha, beta, frame)
    T = trace_T(alpha, beta, v3)
    Ta = trace_T_dalpha(alpha, beta, v3)
    Tb = trace_T_dbeta(alpha, beta, v3)
    sa, ca = math.sin(alpha), math.cos(alpha)
    sb, cb = math.sin(beta), math.cos(beta)
    term_a = (Ta / cb) * (sa * frame.q_v_bar - ca * frame.q_inf_bar)
    term_b = Tb * (sb * (ca * frame.q_v_bar + sa * frame.q_inf_bar) - cb * frame.q_mix_bar)
    R = term_a + term_b + 3.0 * Qs @ Qs - 3.0 * T * Qs - np.eye(3)
    return float(np.linalg.norm(R))


# ---------------------------------------------------------------------------
# Angle paths, Euler-Lagrange residuals and the lambda = 0 solver
# ---------------------------------------------------------------------------


@dataclass
class AnglePath:
    """Discretized (alpha, beta) angles plus the amplitude N along the ray."""

    grid: Grid1D
    alpha: np.ndarray
    beta: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self) -> None:
        n = self.grid.n_nodes
        for name in ("alpha", "beta", "amplitude"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name} must have shape ({n},)")
            setattr(self, name, arr)

    def to_csv(self, path=None) -> str:
        import io

        buf = io.StringIO()
        buf.write('# {"schema_version": 1, "columns": ["t", "alpha", "beta", "N"]}\n')
        buf.write("t,alpha,beta,N\n")
        for row in zip(self.grid.nodes, self.alpha, self.beta, self.amplitude):
            buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _midpoint_average(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a[:-1] + a[1:])


def _flux_divergence(a_nodes: np.ndarray, u: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Conservative discretization of d/dr(a du/dr) at the interior nodes."""
    h = np.diff(t)
    flux = _midpoint_average(a_nodes) * np.diff(u) / h
    hbar = 0.5 * (t[2:] - t[:-2])
    out = np.zeros_like(u)
    out[1:-1] = np.diff(flux) / hbar
    return out


def el_residuals(
    path: AnglePath,
    frame: Frame,
    lam: float,
    params: qt.PotentialParams = qt.DEFAULT_PARAMS,
) -> tuple[np.ndarray, np.ndarray]:
    """Node-wise residuals of the coupled angle equations at finite lambda.

    Interior nodes carry the discrete residuals; the endpoint entries are
    zero (they hold the boundary conditions).
    """
    if math.isinf(lam):
        raise ValueError("Euler-Lagrange residuals are defined for finite lambda")
    N = path.amplitude
    if np.any(N <= 0):
        raise ValueError("amplitude must be positive node-wise")
    t = path.grid.nodes
    alpha, beta = path.alpha, path.beta
    v3 = float(frame.v[2])
    coeffs = path.grid.diff_coeffs()
    dalpha = _apply_diff(coeffs, alpha[:, None])[:, 0]
    coupling = lam**2 * (params.b / 3.0) * N**3
    res_a = _flux_divergence(N**2 * np.cos(beta) ** 2, alpha, t)
    res_a[1:-1] += (
        coupling[1:-1] * trace_T_dalpha(alpha[1:-1], beta[1:-1], v3)
        + SQRT_2_3 * np.cos(alpha[1:-1]) * np.cos(beta[1:-1])
    )
    res_b = _flux_divergence(N**2, beta, t)
    res_b[1:-1] += (
        (N**2 * dalpha**2 * np.sin(beta) * np.cos(beta))[1:-1]
        + coupling[1:-1] * trace_T_dbeta(alpha[1:-1], beta[1:-1], v3)
        - SQRT_2_3 * np.sin(alpha[1:-1]) * np.sin(beta[1:-1])
    )
    res_a[0] = res_a[-1] = 0.0
    res_b[0] = res_b[-1] = 0.0
    return res_a, res_b


def _alpha_residual(alpha, N, grid, coupling, v3):
    t = grid.nodes
    res = _flux_divergence(N**2, alpha, t)
    res[1:-1] += SQRT_2_3 * np.cos(alpha[1:-1])
    if coupling is not None:
        res[1:-1] += coupling[1:-1] * trace_T_dalpha(alpha[1:-1], 0.0, v3)
    res[0] = res[-1] = 0.0
    return res


def solve_alpha(
    N: np.ndarray,
    alpha0: float,
    grid: Grid1D,
    lam: float = 0.0,
    params: qt.PotentialParams = qt.DEFAULT_PARAMS,
    v3: float | None = None,
    tol: float = 1e-11,
    max_newton: int = 80,
) -> AnglePath:
    """Damped-Newton solve of the planar (beta = 0) angle equation.

    With ``lam = 0`` this is the two-point problem
    d/dr(N^2 da/dr) = -sqrt(2/3) cos(a); a finite ``lam`` adds the trace
    coupling (which vanishes identically when ``params.b = 0``).
    """
    N = np.asarray(N, dtype=float)
    if N.shape != (grid.n_nodes,):
        raise ValueError("N must be a per-node array")
    if np.any(N <= 0):
        raise ValueError("amplitude must be positive node-wise")
    if not -math.pi / 2 <= alpha0 <= math.pi / 2:
        raise ValueError("alpha0 must lie in [-pi/2, pi/2]")
    coupling = None
    if lam != 0.0 and params.b != 0.0:
        if v3 is None:
            raise ValueError("v3 is required when the trace coupling is active")
        coupling = lam**2 * (params.b / 3.0) * N**3
    t = grid.nodes
    # initial guess: exponential approach to pi/2 on the linearized rate
    rate = (2.0 / 3.0) ** 0.25 / max(float(np.max(N)), 1e-9)
    alpha = math.pi / 2 - (math.pi / 2 - alpha0) * np.exp(-rate * t)
    alpha[0] = alpha0
    alpha[-1] = math.pi / 2

    def norm(F):
        return float(np.max(np.abs(F)))

    F = _alpha_residual(alpha, N, grid, coupling, v3)
    fnorm = norm(F)
    h = np.diff(t)
    hbar = 0.5 * (t[2:] - t[:-2])
    a_mid = _midpoint_average(N**2)
    for _ in range(max_newton):
        if fnorm <= tol:
            break
        # tridiagonal Jacobian of the interior residuals
        m = grid.n_nodes - 2
        lower = np.zeros(m)
        upper = np.zeros(m)
        diag = -(a_mid[:-1] / h[:-1] + a_mid[1:] / h[1:]) / hbar
        lower[1:] = (a_mid[1:-1] / h[1:-1]) / hbar[1:]
        upper[:-1] = (a_mid[1:-1] / h[1:-1]) / hbar[:-1]
        diag += -SQRT_2_3 * np.sin(alpha[1:-1])
        if coupling is not None:
            d = 1e-6
            Taa = (
                trace_T_dalpha(alpha[1:-1] + d, 0.0, v3)
                - trace_T_dalpha(alpha[1:-1] - d, 0.0, v3)
            ) / (2 * d)
            diag += coupling[1:-1] * Taa
        ab = np.zeros((3, m))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag
        ab[2, :-1] = lower[1:]
        delta = solve_banded((1, 1), ab, -F[1:-1])
        step = 1.0
        for _ in range(40):
            trial = alpha.copy()
            trial[1:-1] += step * delta
            F_trial = _alpha_residual(trial, N, grid, coupling, v3)
            if norm(F_trial) < fnorm:
                alpha, F, fnorm = trial, F_trial, norm(F_trial)
                break
            step *= 0.5
        else:
            raise SolverError(
                f"Newton damping exhausted at residual {fnorm:.3e}",
                residual_norm=fnorm,
                iterate=alpha,
            )
    else:
        raise SolverError(
            f"Newton did not converge: residual {fnorm:.3e}",
            residual_norm=fnorm,
            iterate=alpha,
        )
    return AnglePath(grid, alpha, np.zeros_like(alpha), N.copy())


def solve_alpha_lambda0(N: np.ndarray, alpha0: float, grid: Grid1D) -> AnglePath:
    """The lambda = 0 angle equation d/dr(N^2 da/dr) = -sqrt(2/3) cos(a)."""
    path = solve_alpha(N, alpha0, grid, lam=0.0)
    if float(np.min(np.diff(path.alpha))) < -1e-9:
        raise SolverError("solved alpha is not monotone", iterate=path.alpha)
    return path


def _solve_amplitude(alpha: np.ndarray, grid: Grid1D, n_bc: float) -> np.ndarray:
    """Exact minimization of the reduced energy over N at fixed alpha."""
    t = grid.nodes
    h = np.diff(t)
    s2 = (np.diff(alpha) / h) ** 2
    m = grid.n_nodes - 2
    diag = 1.0 / h[:-1] + 1.0 / h[1:] + 0.5 * (h[:-1] * s2[:-1] + h[1:] * s2[1:])
    lower = -1.0 / h[1:-1]
    upper = -1.0 / h[1:-1]
    rhs = np.zeros(m)
    rhs[0] += n_bc / h[0]
    rhs[-1] += n_bc / h[-1]
    ab = np.zeros((3, m))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    N = np.empty(grid.n_nodes)
    N[0] = N[-1] = n_bc
    N[1:-1] = solve_banded((1, 1), ab, rhs)
    return N


def _reduced_energy(alpha: np.ndarray, N: np.ndarray, grid: Grid1D) -> float:
    t = grid.nodes
    h = np.diff(t)
    w = grid.trapezoid_weights()
    grad = np.sum(h * (0.5 * (np.diff(N) / h) ** 2 + 0.25 * (N[:-1] ** 2 + N[1:] ** 2) * (np.diff(alpha) / h) ** 2))
    pot = np.sum(w * SQRT_2_3 * (1.0 - np.sin(alpha)))
    return float(grad + pot)


def angle_path_to_profile(
    path: AnglePath, frame: Frame, params: qt.PotentialParams = qt.DEFAULT_PARAMS
) -> Profile:
    """Push an angle path to a full tensor profile in the frame."""
    rows = frame.coeff_rows()
    ca, sa = np.cos(path.alpha), np.sin(path.alpha)
    cb, sb = np.cos(path.beta), np.sin(path.beta)
    coeffs = (
        (path.amplitude * ca * cb)[:, None] * rows[0]
        + (path.amplitude * sa * cb)[:, None] * rows[1]
        + (path.amplitude * sb)[:, None] * rows[2]
    )
    # pin the endpoints exactly
    coeffs[0] = qt.to_coeffs(params.s_star * (np.outer(frame.v, frame.v) - np.eye(3) / 3.0))
    coeffs[-1] = qt.Q_INF_COEFFS * params.s_star
    return Profile(path.grid, TENSOR, coeffs)


def minimize_lambda0(
    v: np.ndarray,
    grid: Grid1D = None,
    params: qt.PotentialParams = qt.DEFAULT_PARAMS,
    max_outer: int = 200,
    energy_rtol: float = 1e-10,
) -> tuple[AnglePath, float]:
    """Alternating minimization of the reduced lambda = 0 energy.

    Alternates exact amplitude solves with angle solves until the reduced
    energy stabilizes, then reports the energy of the path pushed to a full
    tensor profile (so values are directly comparable with the full solver).
    """
    grid = grid or Grid1D()
    frame = build_frame(v)
    v3 = float(frame.v[2])
    alpha0 = alpha_boundary(v3)
    n_bc = params.s_star * SQRT_2_3
    N = np.full(grid.n_nodes, n_bc)
    energy_prev = math.inf
    path = None
    for _ in range(max_outer):
        path = solve_alpha_lambda0(N, alpha0, grid)
        N = _solve_amplitude(path.alpha, grid, n_bc)
        energy = _reduced_energy(path.alpha, N, grid)
        if abs(energy_prev - energy) <= energy_rtol * max(1.0, abs(energy)):
            break
        energy_prev = energy
    path = AnglePath(grid, path.alpha, np.zeros(grid.n_nodes), N)
    profile = angle_path_to_profile(path, frame, params)
    return path, energy_F_lambda(profile, 0.0, params)


def lambda0_ansatz_coeffs(
    v: np.ndarray, grid: Grid1D, params: qt.PotentialParams = qt.DEFAULT_PARAMS
) -> np.ndarray:
    """Tensor coefficients of a few alternating sweeps; used as a warm start."""
    path, _ = minimize_lambda0(v, grid, params, max_outer=3, energy_rtol=1e-6)
    frame = build_frame(v)
    return angle_path_to_profile(path, frame, params).values


def angles_from_profile(profile: Profile, frame: Frame) -> AnglePath:
    """Diagnostic (alpha, beta, N) extraction from a full tensor profile."""
    coeffs = profile.coefficients()
    rows = frame.coeff_rows()
    comps = coeffs @ rows.T  # (n, 3): components along the frame
    N = np.linalg.norm(coeffs, axis=1)
    beta = np.arcsin(np.clip(comps[:, 2] / np.where(N > 0, N, 1.0), -1.0, 1.0))
    alpha = np.arctan2(comps[:, 1], comps[:, 0])
    return AnglePath(profile.grid, alpha, beta, N)
