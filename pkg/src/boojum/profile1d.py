"""Discretized half-line transition energies and their minimization.

A profile is a map from a truncated half-line [0, T] into the traceless
symmetric tensors, pinned to a prescribed boundary tensor at 0 and to the
far-field uniaxial state at T.  The energy is the trapezoid rule applied to

    1/2 |dQ/dt|^2 + lambda^2 f(Q) + g(Q)

with central differences (one-sided at the endpoints).  In the strong-field
limit (lambda = inf) profiles are director-valued with fixed uniaxial
amplitude, which enforces the vanishing of the bulk potential structurally.
Minimization is nonlinear conjugate gradient with a Barzilai-Borwein
fallback; director paths are renormalized node-wise after every step.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import qtensor as qt
from .closedform_inf import KAPPA, InfProfileParams, n_exact
from .errors import SolverError

DEFAULT_TRUNCATION = 12.0
DEFAULT_N_NODES = 1537

TENSOR = "tensor"
DIRECTOR = "director"


@dataclass(frozen=True)
class Grid1D:
    """Uniform (default) or graded grid on [0, T]."""

    length: float = DEFAULT_TRUNCATION
    n_nodes: int = DEFAULT_N_NODES
    nodes: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.n_nodes < 16:
            raise ValueError("need at least 16 nodes")
        if self.length < 6.0 / KAPPA:
            raise ValueError(f"truncation length must be >= 6/kappa = {6.0 / KAPPA:.4f}")
        if self.nodes is None:
            object.__setattr__(self, "nodes", np.linspace(0.0, self.length, self.n_nodes))
        else:
            nodes = np.asarray(self.nodes, dtype=float)
            if nodes.shape != (self.n_nodes,):
                raise ValueError("nodes shape does not match n_nodes")
            if nodes[0] != 0.0 or abs(nodes[-1] - self.length) > 1e-12 or np.any(np.diff(nodes) <= 0):
                raise ValueError("nodes must increase strictly from 0 to the truncation length")
            object.__setattr__(self, "nodes", nodes)

    @property
    def spacing(self) -> float:
        return self.length / (self.n_nodes - 1)

    def is_uniform(self, tol: float = 1e-12) -> bool:
        d = np.diff(self.nodes)
        return bool(np.all(np.abs(d - d[0]) <= tol))

    def trapezoid_weights(self) -> np.ndarray:
        w = np.zeros(self.n_nodes)
        d = np.diff(self.nodes)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        return w

    def diff_coeffs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Coefficients (am, a0, ap) of the central-difference operator.

        Row i of the operator is am[i] * x[i-1] + a0[i] * x[i] + ap[i] * x[i+1];
        the first and last rows are one-sided.
        """
        t = self.nodes
        n = self.n_nodes
        am = np.zeros(n)
        a0 = np.zeros(n)
        ap = np.zeros(n)
        ap[1:-1] = 1.0 / (t[2:] - t[:-2])
        am[1:-1] = -ap[1:-1]
        a0[0] = -1.0 / (t[1] - t[0])
        ap[0] = 1.0 / (t[1] - t[0])
        a0[-1] = 1.0 / (t[-1] - t[-2])
        am[-1] = -1.0 / (t[-1] - t[-2])
        return am, a0, ap


def _apply_diff(coeffs, X: np.ndarray) -> np.ndarray:
    am, a0, ap = coeffs
    Y = a0[:, None] * X
    Y[:-1] += ap[:-1, None] * X[1:]
    Y[1:] += am[1:, None] * X[:-1]
    return Y


def _apply_diff_transpose(coeffs, Y: np.ndarray) -> np.ndarray:
    am, a0, ap = coeffs
    Z = a0[:, None] * Y
    Z[:-1] += am[1:, None] * Y[1:]
    Z[1:] += ap[:-1, None] * Y[:-1]
    return Z


@dataclass
class Profile:
    """Discretized transition profile with pinned endpoints.

    ``values`` holds basis coefficients ``(n, 5)`` in tensor mode or unit
    directors ``(n, 3)`` in director mode (fixed amplitude ``s_star``).
    """

    grid: Grid1D
    mode: str
    values: np.ndarray
    s_star: float = 1.0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.grid.n_nodes, 5 if self.mode == TENSOR else 3)
        if self.mode not in (TENSOR, DIRECTOR):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    def tensors(self) -> np.ndarray:
        """Materialize the profile as (n, 3, 3) matrices."""
        if self.mode == TENSOR:
            return qt.to_matrix(self.values)
        n = self.values
        outer = np.einsum("ni,nj->nij", n, n)
        return self.s_star * (outer - np.eye(3) / 3.0)

    def coefficients(self) -> np.ndarray:
        if self.mode == TENSOR:
            return self.values
        return qt.to_coeffs(self.tensors())

    def check_endpoints(self, Q0: np.ndarray, tol: float = 1e-9) -> None:
        Qs = self.tensors()
        if np.max(np.abs(Qs[0] - Q0)) > tol:
            raise ValueError("profile does not start at the prescribed boundary tensor")
        if np.max(np.abs(Qs[-1] - qt.Q_INF * self.s_star)) > tol:
            raise ValueError("profile does not end at the far-field tensor")


@dataclass
class SolveReport:
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    degenerate_g_evals: int = 0
    message: str = ""


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-8
    max_iter: int = 50_000
    init: np.ndarray | None = None  # full values array matching the mode
    armijo_c1: float = 1e-4
    max_backtracks: int = 60


# ---------------------------------------------------------------------------
# Discrete energy and gradient
# ---------------------------------------------------------------------------


def _energy_grad_tensor(
    values: np.ndarray, lam: float, grid: Grid1D, params: qt.PotentialParams
) -> tuple[float, np.ndarray, int]:
    coeffs = grid.diff_coeffs()
    w = grid.trapezoid_weights()
    dQ = _apply_diff(coeffs, values)
    g_vals, degen = qt.field_g_coeffs(values)
    pot = g_vals.copy()
    grad_pot = qt.field_g_grad_coeffs(values)
    if lam != 0.0:
        pot += lam**2 * qt.bulk_f_coeffs(values, params)
        grad_pot += lam**2 * qt.bulk_f_grad_coeffs(values, params)
    energy = float(np.sum(w * (0.5 * np.sum(dQ * dQ, axis=1) + pot)))
    grad = _apply_diff_transpose(coeffs, w[:, None] * dQ) + w[:, None] * grad_pot
    grad[0] = 0.0
    grad[-1] = 0.0
    return energy, grad, int(np.count_nonzero(degen))


def _energy_grad_director(
    values: np.ndarray, grid: Grid1D, s_star: float
) -> tuple[float, np.ndarray, int]:
    coeffs = grid.diff_coeffs()
    w = grid.trapezoid_weights()
    dn = _apply_diff(coeffs, values)
    g_vals = qt.SQRT_3_2 * (1.0 - values[:, 2] ** 2)
    energy = float(np.sum(w * (s_star**2 * np.sum(dn * dn, axis=1) + g_vals)))
    grad = 2.0 * s_star**2 * _apply_diff_transpose(coeffs, w[:, None] * dn)
    grad[:, 2] -= 2.0 * qt.SQRT_3_2 * w * values[:, 2]
    # project onto the tangent space of the unit sphere at every node
    grad -= np.sum(grad * values, axis=1, keepdims=True) * values
    grad[0] = 0.0
    grad[-1] = 0.0
    return energy, grad, 0


def energy_F_lambda(
    profile: Profile, lam: float, params: qt.PotentialParams = qt.DEFAULT_PARAMS
) -> float:
    """Discrete transition energy of a profile at coupling ``lam``.

    For ``lam = inf`` the profile must be director-valued: off the uniaxial
    set the strong-field energy is infinite, so tensor profiles are rejected.
    """
    if math.isinf(lam):
        if profile.mode != DIRECTOR:
            raise ValueError(
                "lambda = inf requires a director-mode profile: the energy is "
                "+inf off the fixed-amplitude uniaxial set"
            )
        e, _, _ = _energy_grad_director(profile.values, profile.grid, profile.s_star)
        return e
    if profile.mode == DIRECTOR:
        # bulk potential vanishes identically at the fixed uniaxial amplitude
        e, _, _ = _energy_grad_director(profile.values, profile.grid, profile.s_star)
        return e
    e, _, _ = _energy_grad_tensor(profile.values, lam, profile.grid, params)
    return e


def energy_gradient(
    profile: Profile, lam: float, params: qt.PotentialParams = qt.DEFAULT_PARAMS
) -> np.ndarray:
    """Analytic gradient of the discrete energy (endpoint rows zeroed)."""
    if profile.mode == DIRECTOR:
        _, g, _ = _energy_grad_director(profile.values, profile.grid, profile.s_star)
        return g
    if math.isinf(lam):
        raise ValueError("lambda = inf requires a director-mode profile")
    _, g, _ = _energy_grad_tensor(profile.values, lam, profile.grid, params)
    return g


# ---------------------------------------------------------------------------
# Minimization
# ---------------------------------------------------------------------------


def _grad_norm(grad: np.ndarray) -> float:
    """Convergence norm of the discrete gradient (max over components)."""
    return float(np.max(np.abs(grad)))


def _minimize(value_grad, retract, x0: np.ndarray, opts: SolveOptions):
    """Monotone NCG (Polak-Ribiere+) with Barzilai-Borwein fallback steps."""
    x = retract(x0.copy())
    energy, grad, ndeg = value_grad(x)
    total_degen = ndeg
    direction = -grad
    step = 1.0 / max(1.0, float(np.linalg.norm(grad)))
    n_iter = 0
    stall = 0
    message = "max_iter reached"
    for n_iter in range(1, opts.max_iter + 1):
        gnorm = _grad_norm(grad)
        if gnorm <= opts.tol:
            message = "gradient tolerance met"
            break
        slope = float(np.sum(direction * grad))
        if slope >= 0.0:
            direction = -grad
            slope = -float(np.sum(grad * grad))
        # Armijo backtracking; energy never increases on accepted iterates.
        accepted = False
        s = step
        for _ in range(opts.max_backtracks):
            x_new = retract(x + s * direction)
            e_new, g_new, ndeg = value_grad(x_new)
            total_degen += ndeg
            if e_new <= energy + opts.armijo_c1 * s * slope:
                accepted = True
                break
            s *= 0.5
        if not accepted:
            if np.array_equal(direction, -grad):
                message = "line search stalled"
                break
            direction = -grad
            step = 1.0 / max(1.0, gnorm)
            continue
        s_vec = x_new - x
        y_vec = g_new - grad
        sy = float(np.sum(s_vec * y_vec))
        if sy > 1e-300:
            step = float(np.sum(s_vec * s_vec)) / sy  # BB1 step as next trial
        else:
            step = max(s, 1e-12)
        g2 = float(np.sum(grad * grad))
        beta = max(0.0, float(np.sum(g_new * (g_new - grad))) / max(g2, 1e-300))
        direction = -g_new + beta * direction
        if abs(energy - e_new) <= 1e-16 * max(1.0, abs(energy)):
            stall += 1
            if stall >= 30:
                x, energy, grad = x_new, e_new, g_new
                message = "energy stagnated"
                break
        else:
            stall = 0
        x, energy, grad = x_new, e_new, g_new
    gnorm = _grad_norm(grad)
    return x, SolveReport(
        energy=energy,
        grad_norm=gnorm,
        iterations=n_iter,
        converged=gnorm <= opts.tol,
        degenerate_g_evals=total_degen,
        message=message,
    )


def extract_director(Q: np.ndarray, tol: float = 1e-8) -> tuple[np.ndarray, float]:
    """Director and amplitude of a uniaxial tensor; rejects biaxial input."""
    Q = np.asarray(Q, dtype=float)
    evals, evecs = np.linalg.eigh(Q)
    s = 1.5 * evals[-1]
    v = evecs[:, -1]
    if abs(s) < 1e-12:
        raise ValueError("tensor is numerically zero; no director")
    residual = np.max(np.abs(Q - s * (np.outer(v, v) - np.eye(3) / 3.0)))
    if residual > tol * max(1.0, float(np.linalg.norm(Q))):
        raise ValueError(f"tensor is not uniaxial within {tol:g} (residual {residual:.3g})")
    if v[2] < 0:
        v = -v
    return v, float(s)


def _slerp_init(v: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Great-circle path from v to e3, traversed on the transition scale 1/kappa."""
    v = qt.unit_director(v)
    if v[2] < 0:
        v = -v
    cosw = float(np.clip(v[2], -1.0, 1.0))
    omega = math.acos(cosw)
    tau = 1.0 - np.exp(-KAPPA * grid.nodes)
    if omega < 1e-12:
        return np.tile(qt.E3, (grid.n_nodes, 1))
    # rotate v towards e3 in their common plane
    axis_dir = (qt.E3 - cosw * v)
    axis_dir /= np.linalg.norm(axis_dir)
    ang = tau * omega
    path = np.cos(ang)[:, None] * v[None, :] + np.sin(ang)[:, None] * axis_dir[None, :]
    path[0] = v
    path[-1] = qt.E3
    return path


def _closed_form_director_init(v: np.ndarray, grid: Grid1D) -> np.ndarray:
    """Closed-form connection, rotated about e3 so it starts exactly at v."""
    v = qt.unit_director(v)
    if v[2] < 0:
        v = -v
    varphi = math.acos(float(np.clip(v[2], -1.0, 1.0)))
    base = n_exact(grid.nodes, InfProfileParams(varphi))
    # base starts at (-sin(varphi), 0, cos(varphi)); rotate about e3 onto v
    vxy = math.hypot(v[0], v[1])
    if vxy < 1e-15:
        return base
    c = -v[0] / vxy
    s = -v[1] / vxy
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    path = base @ rot.T
    path[0] = v
    path[-1] = qt.E3
    return path


def _tensor_inits(Q0: np.ndarray, lam: float, grid: Grid1D, params: qt.PotentialParams):
    """Initializations for the tensor-mode multi-start."""
    c0 = qt.to_coeffs(Q0)
    cinf = qt.Q_INF_COEFFS * params.s_star
    ramp = np.exp(-KAPPA * grid.nodes)[:, None]
    inits = [cinf[None, :] + ramp * (c0 - cinf)[None, :]]
    try:
        v, s = extract_director(Q0)
        if abs(s - params.s_star) <= 1e-6 * max(1.0, params.s_star):
            path = _closed_form_director_init(v, grid)
            outer = np.einsum("ni,nj->nij", path, path)
            inits.append(qt.to_coeffs(s * (outer - np.eye(3) / 3.0)))
            if abs(v[2]) < 1.0 - 1e-10:
                from .geodesic import lambda0_ansatz_coeffs  # local: avoids an import cycle

                try:
                    inits.append(lambda0_ansatz_coeffs(v, grid, params))
                except Exception:
                    pass
    except ValueError:
        pass
    for c in inits:
        c[0] = c0
        c[-1] = cinf
    return inits


def minimize_profile(
    Q0: np.ndarray,
    lam: float,
    grid: Grid1D = None,
    opts: SolveOptions = None,
    params: qt.PotentialParams = qt.DEFAULT_PARAMS,
) -> tuple[Profile, SolveReport]:
    """Relax a profile from the boundary tensor Q0 to the far field.

    Finite ``lam`` minimizes over full tensor paths; ``lam = inf`` requires a
    uniaxial Q0 (within 1e-8) and minimizes over unit director paths with the
    amplitude pinned to ``params.s_star``.
    """
    grid = grid or Grid1D()
    opts = opts or SolveOptions()
    Q0 = np.asarray(Q0, dtype=float)
    if not qt.is_traceless_symmetric(Q0, tol=1e-10):
        raise ValueError("Q0 must be symmetric and traceless")

    if math.isinf(lam):
        v, s = extract_director(Q0, tol=1e-8)
        if abs(s - params.s_star) > 1e-6 * max(1.0, params.s_star):
            raise ValueError(
                f"lambda = inf requires amplitude s_star = {params.s_star:g}, got {s:g}"
            )
        x0 = opts.init if opts.init is not None else _closed_form_director_init(v, grid)
        x0 = np.asarray(x0, dtype=float).copy()
        if float(x0[0] @ v) < 0.0:
            x0 = -x0  # directors are sign-identified; align the path with +v
        x0[0] = v
        x0[-1] = qt.E3

        def retract(x):
            x[0] = v
            x[-1] = qt.E3
            return x / np.linalg.norm(x, axis=1, keepdims=True)

        def value_grad(x):
            return _energy_grad_director(x, grid, params.s_star)

        x, report = _minimize(value_grad, retract, x0, opts)
        return Profile(grid, DIRECTOR, x, s_star=params.s_star), report

    c0 = qt.to_coeffs(Q0)
    cinf = qt.Q_INF_COEFFS * params.s_star
    if opts.init is not None:
        x0 = np.asarray(opts.init, dtype=float).copy()
    else:
        ramp = np.exp(-KAPPA * grid.nodes)[:, None]
        x0 = cinf[None, :] + ramp * (c0 - cinf)[None, :]

    def retract(x):
        x[0] = c0
        x[-1] = cinf
        return x

    def value_grad(x):
        return _energy_grad_tensor(x, lam, grid, params)

    x, report = _minimize(value_grad, retract, x0, opts)
    return Profile(grid, TENSOR, x), report


def d_lambda_multistart(
    Q0: np.ndarray,
    lam: float,
    grid: Grid1D = None,
    opts: SolveOptions = None,
    params: qt.PotentialParams = qt.DEFAULT_PARAMS,
) -> tuple[float, Profile, list[SolveReport]]:
    """Best transition energy over the standard initializations.

    Minimizers are not known to be unique away from the two limit couplings,
    so every start's report is returned alongside the best profile.
    """
    grid = grid or Grid1D()
    opts = opts or SolveOptions()
    Q0 = np.asarray(Q0, dtype=float)
    reports: list[SolveReport] = []
    best: tuple[float, Profile] | None = None
    if math.isinf(lam):
        v, _ = extract_director(Q0, tol=1e-8)
        starts = [_closed_form_director_init(v, grid), _slerp_init(v, grid)]
    else:
        starts = _tensor_inits(Q0, lam, grid, params)
    for x0 in starts:
        profile, report = minimize_profile(Q0, lam, grid, replace(opts, init=x0), params)
        reports.append(report)
        if best is None or report.energy < best[0]:
            best = (report.energy, profile)
    assert best is not None
    return best[0], best[1], reports


def D_lambda(
    Q0: np.ndarray,
    lam: float,
    grid: Grid1D = None,
    opts: SolveOptions = None,
    params: qt.PotentialParams = qt.DEFAULT_PARAMS,
) -> float:
    """Minimal transition energy for boundary tensor Q0 at coupling ``lam``."""
    value, _, _ = d_lambda_multistart(Q0, lam, grid, opts, params)
    return value


# ---------------------------------------------------------------------------
# CSV serialization
# ---------------------------------------------------------------------------

_CSV_COLUMNS = ["t", "Q11", "Q12", "Q13", "Q22", "Q23"]


def profile_to_csv(profile: Profile, lam: float, path=None) -> str:
    """Serialize a profile (Q33 implied by tracelessness) with a JSON header."""
    header = {
        "schema_version": 1,
        "lambda": "inf" if math.isinf(lam) else lam,
        "grid": {"length": profile.grid.length, "n_nodes": profile.grid.n_nodes},
        "mode": profile.mode,
        "s_star": profile.s_star,
    }
    Qs = profile.tensors()
    buf = io.StringIO()
    buf.write("# " + json.dumps(header) + "\n")
    buf.write(",".join(_CSV_COLUMNS) + "\n")
    for t, Q in zip(profile.grid.nodes, Qs):
        row = [t, Q[0, 0], Q[0, 1], Q[0, 2], Q[1, 1], Q[1, 2]]
        buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def profile_from_csv(source) -> tuple[Profile, float]:
    """Inverse of :func:`profile_to_csv`; returns the profile and lambda."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines[0].startswith("# "):
        raise ValueError("missing JSON header line")
    header = json.loads(lines[0][2:])
    lam = math.inf if header["lambda"] == "inf" else float(header["lambda"])
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
    n = data.shape[0]
    grid = Grid1D(length=header["grid"]["length"], n_nodes=header["grid"]["n_nodes"])
    Qs = np.zeros((n, 3, 3))
    Qs[:, 0, 0] = data[:, 1]
    Qs[:, 0, 1] = Qs[:, 1, 0] = data[:, 2]
    Qs[:, 0, 2] = Qs[:, 2, 0] = data[:, 3]
    Qs[:, 1, 1] = data[:, 4]
    Qs[:, 1, 2] = Qs[:, 2, 1] = data[:, 5]
    Qs[:, 2, 2] = -data[:, 1] - data[:, 4]
    mode = header.get("mode", TENSOR)
    if mode == DIRECTOR:
        values = np.zeros((n, 3))
        for i in range(n):
            v, _ = extract_director(Qs[i], tol=1e-6)
            values[i] = v
        return Profile(grid, DIRECTOR, values, s_star=header.get("s_star", 1.0)), lam
    return Profile(grid, TENSOR, qt.to_coeffs(Qs)), lam
