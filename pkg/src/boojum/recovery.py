"""Explicit competitor fields realizing the boundary-layer energy at finite
layer width, with region-by-region rescaled energies.

Two families are built on the meridian half-plane and rotated into
equivariant fields.  The strong-field family is a unit director field
assembled from the closed-form connection (away from the axis), an angle
interpolation (along the axis), a point-defect profile at each pole and a
Lipschitz angle extension gluing them.  The finite-coupling family replaces
the closed form by polar-partition profiles mollified in the polar angle,
interpolated radially to the boundary data, with the same defect caps and a
component-wise extension that is traceless by construction.

All interface traces coincide exactly by construction; `check_interfaces`
verifies this numerically and a violation raises ConstructionError.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from . import qtensor as qt
from ._quad import Mollifier, gauss_nodes, integrate_rect_adaptive
from .closedform_inf import KAPPA
from .errors import ConstructionError
from .profile1d import Grid1D, SolveOptions, d_lambda_multistart

SQRT_3_2 = qt.SQRT_3_2

_J = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
#: T-reflection (x3 -> -x3) conjugation acting on basis coefficients.
_MIRROR_COEFFS = np.array([1.0, 1.0, -1.0, -1.0, 1.0])


# ---------------------------------------------------------------------------
# Vectorized closed-form angle helpers (angle between the profile and e3)
# ---------------------------------------------------------------------------


def _profile_n3(t, varphi):
    # 1 - cos via the half-angle form keeps the varphi -> 0 limit finite
    varphi = np.maximum(np.asarray(varphi, dtype=float), 1e-10)
    one_minus_c = 2.0 * np.sin(varphi / 2.0) ** 2
    A = (1.0 + np.cos(varphi)) / one_minus_c
    u = np.exp(-KAPPA * np.asarray(t, dtype=float))
    return (A - u) / (A + u)


def _profile_quantities(t, varphi):
    """n3, |dn/dt|^2, |dn/dvarphi|^2, |n1|^2 on broadcastable arrays."""
    varphi = np.maximum(np.asarray(varphi, dtype=float), 1e-10)
    c = np.cos(varphi)
    s = np.sin(varphi)
    one_minus_c = 2.0 * np.sin(varphi / 2.0) ** 2
    A = (1.0 + c) / one_minus_c
    dA = -2.0 * s / one_minus_c**2
    u = np.exp(-KAPPA * np.asarray(t, dtype=float))
    denom = (A + u) ** 2
    n3 = (A - u) / (A + u)
    n1_sq = 4.0 * A * u / denom
    dn_dt_sq = KAPPA**2 * A * u / denom
    dn3_dvarphi = 2.0 * u * dA / denom
    dn_dvarphi_sq = dn3_dvarphi**2 / n1_sq
    return n3, dn_dt_sq, dn_dvarphi_sq, n1_sq


def _theta_commutator_sq(coeffs: np.ndarray) -> np.ndarray:
    """|[Q, J]|^2 for the azimuthal derivative of an equivariant tensor field."""
    Q = qt.to_matrix(coeffs)
    C = np.einsum("...ij,jk->...ik", Q, _J) - np.einsum("ij,...jk->...ik", _J, Q)
    return np.sum(C * C, axis=(-2, -1))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class RegionEnergyReport:
    """Rescaled (eta * E) energies per region, plus quadrature diagnostics."""

    regions: dict
    total: float
    lower_bound_ref: float
    params: dict
    quadrature: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "regions": self.regions,
                "total": self.total,
                "lower_bound_ref": self.lower_bound_ref,
                "params": self.params,
                "quadrature": self.quadrature,
            }
        )


# ---------------------------------------------------------------------------
# Strong-field construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryParamsInf:
    """Layer width and quadrature resolution for the strong-field family.

    Region partition (north half-plane): the layer region covers polar
    angles above 2*eta, the axis interpolation sits inside the cone below
    2*eta beyond radius 1 + 2*eta, the defect cap occupies the corner square
    of side eta and the extension fills the rest of the corner.
    """

    eta: float
    n_quad_r: int = 128
    n_quad_phi: int = 128
    t_max: float = 14.0
    quad_rtol: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.eta <= 0.5:
            raise ValueError("eta must lie in (0, 0.5]")


class InfConstruction:
    """Evaluable unit-director field of the strong-field recovery family."""

    def __init__(self, p: RecoveryParamsInf, params: qt.PotentialParams = qt.DEFAULT_PARAMS):
        self.p = p
        self.params = params
        eta = p.eta
        self._varphi1 = math.pi / 2 - 2.0 * eta  # starting angle used along phi = 2 eta
        # angle of the layer profile at the interpolation interface, t = 2
        self._A2 = float(np.arccos(_profile_n3(2.0, self._varphi1)))

    # -- region angle fields (phi <= pi/2 half) -----------------------------

    def angle_omega1(self, t, phi):
        return np.arccos(_profile_n3(t, math.pi / 2 - np.asarray(phi, dtype=float)))

    def _edge_angle(self, t):
        """Angle of the layer profile along phi = 2 eta (any t >= 0)."""
        return np.arccos(_profile_n3(t, self._varphi1))

    def angle_omega2(self, t, phi):
        return (np.asarray(phi, dtype=float) / (2.0 * self.p.eta)) * self._edge_angle(t)

    def angle_omega3(self, s, tau):
        return np.arctan2(tau, s) - self.p.eta * np.asarray(tau, dtype=float)

    # -- extension patches ---------------------------------------------------

    def _patch_A(self, r, phi):
        """Coons patch on [1+eta, 1+2eta] x [0, eta]; returns angle and partials."""
        eta = self.p.eta
        a, bw = 1.0 + eta, eta
        u = (np.asarray(r, dtype=float) - a) / bw
        w = np.asarray(phi, dtype=float) / eta
        tau = np.asarray(phi, dtype=float) / eta
        L = np.arctan2(tau, 1.0) - phi
        Lp = (1.0 / eta) / (1.0 + tau**2) - 1.0
        R = (np.asarray(phi, dtype=float) / (2.0 * eta)) * self._A2
        Rp = self._A2 / (2.0 * eta)
        B = np.zeros_like(u)
        Bp = np.zeros_like(u)
        tl = math.pi / 4 - eta
        tr = self._A2 / 2.0
        T = tl + u * (tr - tl)
        Tp = (tr - tl) / bw
        bl = 0.0
        br = 0.0
        val = (1 - u) * L + u * R + (1 - w) * B + w * T - (
            (1 - u) * (1 - w) * bl + u * (1 - w) * br + (1 - u) * w * tl + u * w * tr
        )
        d_r = (R - L) / bw + (1 - w) * Bp + w * Tp - ((1 - w) * (br - bl) + w * (tr - tl)) / bw
        d_phi = (1 - u) * Lp + u * Rp + (T - B) / eta - ((1 - u) * (tl - bl) + u * (tr - br)) / eta
        return val, d_r, d_phi

    def _patch_B(self, r, phi):
        """Coons patch on [1, 1+2eta] x [eta, 2eta] (kinked bottom edge)."""
        eta = self.p.eta
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        a, bw = 1.0, 2.0 * eta
        u = (r - a) / bw
        w = (phi - eta) / eta
        L = math.pi / 2 - phi
        Lp = -np.ones_like(phi)
        R = (phi / (2.0 * eta)) * self._A2
        Rp = self._A2 / (2.0 * eta)
        s = (r - 1.0) / eta
        inner = s <= 1.0
        tl_shared = math.pi / 4 - eta
        tr_shared = self._A2 / 2.0
        B = np.where(
            inner,
            np.arctan2(1.0, np.minimum(s, 1.0)) - eta,
            tl_shared + np.clip(s - 1.0, 0.0, None) * (tr_shared - tl_shared),
        )
        Bp = np.where(
            inner,
            -(1.0 / eta) / (1.0 + np.minimum(s, 1.0) ** 2),
            (tr_shared - tl_shared) / eta,
        )
        T = self._edge_angle(s)
        n3, dn_dt_sq, _, n1_sq = _profile_quantities(s, self._varphi1)
        Tp = -np.sqrt(dn_dt_sq) / eta  # d/dr arccos(n3(t)) with t = (r-1)/eta
        bl = math.pi / 2 - eta
        br = self._A2 / 2.0
        tl = math.pi / 2 - 2.0 * eta
        tr = self._A2
        val = (1 - u) * L + u * R + (1 - w) * B + w * T - (
            (1 - u) * (1 - w) * bl + u * (1 - w) * br + (1 - u) * w * tl + u * w * tr
        )
        d_r = (R - L) / bw + (1 - w) * Bp + w * Tp - ((1 - w) * (br - bl) + w * (tr - tl)) / bw
        d_phi = (1 - u) * Lp + u * Rp + (T - B) / eta - ((1 - u) * (tl - bl) + u * (tr - br)) / eta
        return val, d_r, d_phi

    # -- full-field evaluation ----------------------------------------------

    def angle(self, r, phi):
        """Angle between the director and e3 on the north half (phi <= pi/2)."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        eta = self.p.eta
        out = np.empty(np.broadcast(r, phi).shape)
        r, phi = np.broadcast_arrays(r, phi)
        m1 = phi >= 2.0 * eta
        out[m1] = self.angle_omega1((r[m1] - 1.0) / eta, phi[m1])
        m2 = (~m1) & (r >= 1.0 + 2.0 * eta)
        out[m2] = self.angle_omega2((r[m2] - 1.0) / eta, phi[m2])
        m3 = (~m1) & (~m2) & (r <= 1.0 + eta) & (phi <= eta)
        out[m3] = self.angle_omega3((r[m3] - 1.0) / eta, phi[m3] / eta)
        m4a = (~m1) & (~m2) & (~m3) & (phi <= eta)
        out[m4a] = self._patch_A(r[m4a], phi[m4a])[0]
        m4b = (~m1) & (~m2) & (~m3) & (phi > eta)
        out[m4b] = self._patch_B(r[m4b], phi[m4b])[0]
        return out

    def director(self, r, phi):
        """Unit director anywhere on the meridian half-plane (0 < phi < pi)."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, phi = np.broadcast_arrays(r, phi)
        south = phi > math.pi / 2
        phi_eff = np.where(south, math.pi - phi, phi)
        ang = self.angle(r, phi_eff)
        n = np.zeros(ang.shape + (3,))
        n[..., 0] = -np.sin(ang)
        n[..., 2] = np.cos(ang)
        n[..., 2] = np.where(south, -n[..., 2], n[..., 2])
        return n

    def tensor(self, r, phi):
        n = self.director(r, phi)
        outer = np.einsum("...i,...j->...ij", n, n)
        return self.params.s_star * (outer - np.eye(3) / 3.0)

    # -- structural checks ---------------------------------------------------

    def check_interfaces(self, n_samples: int = 100, tol: float = 1e-10) -> float:
        eta = self.p.eta
        worst = 0.0

        def tensor_of(angle):
            n = np.stack([-np.sin(angle), np.zeros_like(angle), np.cos(angle)], axis=-1)
            outer = np.einsum("...i,...j->...ij", n, n)
            return outer - np.eye(3) / 3.0

        def gap(a1, a2):
            d = np.abs(tensor_of(a1) - tensor_of(a2))
            if not np.all(np.isfinite(d)):
                raise ConstructionError("non-finite field values on an interface")
            return float(np.max(d))

        rs = np.linspace(1.0 + 2.0 * eta, 1.0 + eta * self.p.t_max, n_samples)
        worst = max(worst, gap(self.angle_omega1((rs - 1) / eta, 2 * eta), self.angle_omega2((rs - 1) / eta, np.full_like(rs, 2 * eta))))
        rs = np.linspace(1.0, 1.0 + 2.0 * eta, n_samples)
        worst = max(worst, gap(self.angle_omega1((rs - 1) / eta, 2 * eta), self._patch_B(rs, np.full_like(rs, 2 * eta))[0]))
        phis = np.linspace(0.0, eta, n_samples, endpoint=False)[1:]
        worst = max(worst, gap(self.angle_omega2(np.full_like(phis, 2.0), phis), self._patch_A(np.full_like(phis, 1 + 2 * eta), phis)[0]))
        phis = np.linspace(eta, 2 * eta, n_samples)
        worst = max(worst, gap(self.angle_omega2(np.full_like(phis, 2.0), phis), self._patch_B(np.full_like(phis, 1 + 2 * eta), phis)[0]))
        # defect cap edges
        phis = np.linspace(0.0, eta, n_samples, endpoint=False)[1:]
        worst = max(worst, gap(self.angle_omega3(np.ones_like(phis), phis / eta), self._patch_A(np.full_like(phis, 1 + eta), phis)[0]))
        rs = np.linspace(1.0, 1.0 + eta, n_samples)
        worst = max(worst, gap(self.angle_omega3((rs - 1) / eta, np.ones_like(rs)), self._patch_B(rs, np.full_like(rs, eta))[0]))
        # patch A / patch B shared edge
        rs = np.linspace(1.0 + eta, 1.0 + 2 * eta, n_samples)
        worst = max(worst, gap(self._patch_A(rs, np.full_like(rs, eta))[0], self._patch_B(rs, np.full_like(rs, eta))[0]))
        # boundary data along the sphere away from the cap
        phis = np.linspace(2 * eta, math.pi / 2, n_samples)
        worst = max(worst, gap(self.angle_omega1(np.zeros_like(phis), phis), math.pi / 2 - phis))
        # mirror seam at the equator: tensors agree (directors flip sign)
        rs = np.linspace(1.0, 1.0 + eta * self.p.t_max, n_samples)
        Qn = self.tensor(rs, np.full_like(rs, math.pi / 2 - 1e-14))
        Qs = self.tensor(rs, np.full_like(rs, math.pi / 2 + 1e-14))
        worst = max(worst, float(np.max(np.abs(Qn - Qs))))
        if worst > tol:
            raise ConstructionError(f"interface mismatch {worst:.3e} exceeds {tol:g}")
        return worst


def build_construction_inf(
    p: RecoveryParamsInf, params: qt.PotentialParams = qt.DEFAULT_PARAMS
) -> InfConstruction:
    """Assemble the strong-field family and verify its interface traces."""
    c = InfConstruction(p, params)
    c.check_interfaces()
    return c


def _angle_density(eta, s2, r, phi, ang, d_r, d_phi):
    """Rescaled energy density of a planar unit-director field (per dr dphi)."""
    sphi = np.sin(phi)
    sin2 = np.sin(ang) ** 2
    return (
        2.0
        * math.pi
        * eta
        * (
            s2 * (r**2 * sphi * d_r**2 + sphi * d_phi**2 + sin2 / sphi)
            + (r**2 * sphi / eta**2) * SQRT_3_2 * sin2
        )
    )


def energy_report_inf(
    p: RecoveryParamsInf, params: qt.PotentialParams = qt.DEFAULT_PARAMS
) -> RegionEnergyReport:
    """Region-by-region rescaled energies of the strong-field family.

    Values include both hemispheres (the construction is mirror symmetric).
    """
    c = build_construction_inf(p, params)
    eta = p.eta
    s2 = params.s_star**2
    n0 = (p.n_quad_r, p.n_quad_phi)
    diag = {}
    regions = {}

    def omega1(T, PHI):  # (t, phi) variables
        n3, dn_dt_sq, dn_dvarphi_sq, n1_sq = _profile_quantities(T, math.pi / 2 - PHI)
        sphi = np.sin(PHI)
        rr = (1.0 + eta * T) ** 2
        return 2.0 * math.pi * (
            s2 * (rr * sphi * dn_dt_sq + eta**2 * sphi * dn_dvarphi_sq + eta**2 * n1_sq / sphi)
            + rr * sphi * SQRT_3_2 * n1_sq
        )

    val, d = integrate_rect_adaptive(omega1, (0.0, p.t_max, 2 * eta, math.pi / 2), n0, p.quad_rtol)
    regions["omega1"] = 2.0 * val
    diag["omega1"] = d

    def omega2(T, PHI):
        ang = c.angle_omega2(T, PHI)
        A_t = c._edge_angle(T)
        _, dn_dt_sq, _, _ = _profile_quantities(T, c._varphi1)
        d_t = -(PHI / (2 * eta)) * np.sqrt(dn_dt_sq)
        d_phi = A_t / (2 * eta)
        sphi = np.sin(PHI)
        rr = (1.0 + eta * T) ** 2
        sin2 = np.sin(ang) ** 2
        return 2.0 * math.pi * (
            s2 * (rr * sphi * d_t**2 + eta**2 * sphi * d_phi**2 + eta**2 * sin2 / sphi)
            + rr * sphi * SQRT_3_2 * sin2
        )

    val, d = integrate_rect_adaptive(omega2, (2.0, p.t_max, 0.0, 2 * eta), n0, p.quad_rtol)
    regions["omega2"] = 2.0 * val
    diag["omega2"] = d

    def omega3(S, TAU):
        rho2 = S**2 + TAU**2
        ang = np.arctan2(TAU, S) - eta * TAU
        d_s = -TAU / rho2
        d_tau = S / rho2 - eta
        sphi = np.sin(eta * TAU)
        rr = (1.0 + eta * S) ** 2
        sin2 = np.sin(ang) ** 2
        return 2.0 * math.pi * eta * (
            s2 * (rr * sphi * d_s**2 + sphi * d_tau**2 + eta**2 * sin2 / sphi)
            + rr * sphi * SQRT_3_2 * sin2
        )

    val, d = integrate_rect_adaptive(omega3, (0.0, 1.0, 0.0, 1.0), n0, p.quad_rtol)
    regions["omega3"] = 2.0 * val
    diag["omega3"] = d

    def patch_density(patch):
        def dens(R, PHI):
            ang, d_r, d_phi = patch(R, PHI)
            return _angle_density(eta, s2, R, PHI, ang, d_r, d_phi)

        return dens

    total4 = 0.0
    d4 = {}
    panels = [
        ("A", c._patch_A, (1 + eta, 1 + 2 * eta, 0.0, eta)),
        ("B1", c._patch_B, (1.0, 1 + eta, eta, 2 * eta)),
        ("B2", c._patch_B, (1 + eta, 1 + 2 * eta, eta, 2 * eta)),
    ]
    for name, patch, rect in panels:
        val, d = integrate_rect_adaptive(patch_density(patch), rect, n0, p.quad_rtol)
        total4 += val
        d4[name] = d
    regions["omega4"] = 2.0 * total4
    diag["omega4"] = d4

    from .sphere import TangentBC, QuadratureSpec, integrate_D_sphere

    ref = integrate_D_sphere(
        math.inf, TangentBC(), QuadratureSpec(n_phi=64, density="exact-inf")
    ).value
    total = float(sum(regions.values()))
    return RegionEnergyReport(
        regions=regions,
        total=total,
        lower_bound_ref=float(ref),
        params={"eta": eta, "t_max": p.t_max},
        quadrature=diag,
    )


# ---------------------------------------------------------------------------
# Finite-coupling construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryParamsFin:
    """Parameters of the finite-coupling family.

    ``eta`` and ``xi`` are the layer widths (their ratio is the effective
    coupling); ``h`` is the polar partition scale and ``eps`` the mollifier
    width (required < h/4).
    """

    eta: float
    xi: float
    h: float
    eps: float
    n_quad_r: int = 96
    n_quad_phi: int = 96
    quad_rtol: float = 0.01

    def __post_init__(self) -> None:
        if self.eta <= 0 or self.xi <= 0:
            raise ValueError("eta and xi must be positive")
        if not 0.0 < self.h < 1.0:
            raise ValueError("h must lie in (0, 1)")
        if not 0.0 < self.eps < self.h / 4.0:
            raise ValueError("need 0 < eps < h/4")

    @property
    def lam_effective(self) -> float:
        return self.eta / self.xi


@dataclass
class SegmentFamily:
    """Compact-support profiles attached to a polar partition.

    One profile per interior partition angle, relaxed numerically, then
    blended to the far-field tensor over [r_support - 1, r_support] so each
    has compact support; the blend cost is checked against the h-budget.
    Southern-hemisphere profiles are exact mirror conjugates of northern
    ones, so the family is reflection symmetric.
    """

    lam: float
    h: float
    grid: Grid1D
    params: qt.PotentialParams
    partition: np.ndarray
    profiles: np.ndarray  # (n_segments, n_nodes, 5) including the far-field slots
    d_values: np.ndarray  # (n_segments,) transition energies (far-field slots: 0)
    r_support: float
    _splines: list = field(default_factory=list, repr=False)

    @classmethod
    def build(
        cls,
        lam: float,
        h: float,
        grid: Grid1D = None,
        params: qt.PotentialParams = qt.DEFAULT_PARAMS,
        partition: np.ndarray | None = None,
        solve_opts: SolveOptions = None,
    ) -> "SegmentFamily":
        from .profile1d import energy_F_lambda, Profile, TENSOR
        from .sphere import e_phi

        if math.isinf(lam):
            raise ValueError("the finite-coupling family needs a finite lambda")
        grid = grid or Grid1D(12.0, 385)
        solve_opts = solve_opts or SolveOptions()
        if partition is None:
            n_seg = max(4, int(math.ceil(math.pi / (0.9 * h))))
            partition = np.linspace(0.0, math.pi, n_seg + 1)
        partition = np.asarray(partition, dtype=float)
        if np.any(np.diff(partition) >= h):
            raise ValueError("partition spacing must stay below h")
        I = len(partition) - 1
        cinf = qt.Q_INF_COEFFS * params.s_star
        n = grid.n_nodes
        profiles = np.tile(cinf, (I, n, 1))
        d_values = np.zeros(I)
        r_support = min(grid.length, 6.0 / KAPPA + 2.0 / h)
        t = grid.nodes
        # C^2 smoothstep cutoff supported on [r_support - 1, r_support]
        x = np.clip((r_support - t) / 1.0, 0.0, 1.0)
        cutoff = x**3 * (10.0 - 15.0 * x + 6.0 * x**2)
        for i in range(1, I - 1):
            phi_i = partition[i]
            if phi_i > math.pi / 2 + 1e-12:
                j = I - i  # mirror partner (partition is uniform)
                profiles[i] = profiles[j] * _MIRROR_COEFFS
                d_values[i] = d_values[j]
                continue
            v = e_phi(0.0, phi_i)
            Q0 = qt.uniaxial(v, params.s_star)
            value, best, _ = d_lambda_multistart(Q0, lam, grid, solve_opts, params)
            d_values[i] = value
            blended = cinf[None, :] + cutoff[:, None] * (best.values - cinf[None, :])
            energy = energy_F_lambda(Profile(grid, TENSOR, blended), lam, params)
            if energy > value + h:
                raise ConstructionError(
                    f"segment at phi={phi_i:.4f}: compact-support energy {energy:.6f} "
                    f"exceeds budget {value + h:.6f}"
                )
            profiles[i] = blended
        fam = cls(lam, h, grid, params, partition, profiles, d_values, r_support)
        fam._splines = [CubicSpline(t, prof, axis=0) for prof in profiles]
        return fam

    def profile_values(self, t: np.ndarray, derivative: bool = False) -> np.ndarray:
        """Evaluate all segment profiles (or their t-derivative) at once."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.grid.length)
        if derivative:
            return np.stack([sp(t, 1) for sp in self._splines])
        return np.stack([sp(t) for sp in self._splines])

    def lower_bound_estimate(self) -> float:
        """2 pi integral of the interpolated density against sin(phi)."""
        interior = slice(1, len(self.partition) - 2)  # anchored interior segments
        phis = self.partition[interior]
        ds = self.d_values[interior]
        phis = np.concatenate([[0.0], phis, [math.pi]])
        ds = np.concatenate([[ds[0]], ds, [ds[-1]]])
        grid = np.linspace(0.0, math.pi, 2001)
        dens = np.interp(grid, phis, ds)
        return float(2.0 * math.pi * np.trapezoid(dens * np.sin(grid), grid))


class FinConstruction:
    """Evaluable tensor field (coefficient-valued) of the finite family."""

    def __init__(self, p: RecoveryParamsFin, segments: SegmentFamily):
        self.p = p
        self.segments = segments
        self.mollifier = Mollifier(p.eps)
        self.q = p.h * p.eta
        phi1 = segments.partition[1]
        if 2.0 * self.q + p.eps >= phi1:
            raise ConstructionError(
                "polar cap overlaps the first partition cell: need 2*h*eta + eps < phi_1"
            )
        self.cinf = qt.Q_INF_COEFFS * segments.params.s_star

    # -- mollified partition weights -----------------------------------------

    def weights(self, phi: np.ndarray, derivative: bool = False) -> np.ndarray:
        """Mollified indicator weights of all segments, shape (n_phi, n_seg).

        The two far-field partition slots absorb the remaining mass, so the
        weights sum to one identically.
        """
        phi = np.asarray(phi, dtype=float)
        part = self.segments.partition
        fn = self.mollifier.pdf if derivative else self.mollifier.cdf
        edge = np.stack([fn(phi - p_i) for p_i in part], axis=-1)  # (n_phi, I+1)
        w = edge[..., :-1] - edge[..., 1:]
        if not derivative:
            # extend the first/last cells to the poles: total mass is exactly 1
            w[..., 0] = 1.0 - edge[..., 1]
            w[..., -1] = edge[..., -2]
        else:
            w[..., 0] = -edge[..., 1]
            w[..., -1] = edge[..., -2]
        return w

    def field_on_grid(self, t: np.ndarray, phi: np.ndarray):
        """Field and derivatives on a (t, phi) product grid.

        Returns coefficient arrays of shape (nt, nphi, 5): value, d/dt, d/dphi.
        """
        P = self.segments.profile_values(t)  # (nseg, nt, 5)
        dP = self.segments.profile_values(t, derivative=True)
        W = self.weights(phi)  # (nphi, nseg)
        dW = self.weights(phi, derivative=True)
        val = np.einsum("js,sic->ijc", W, P)
        d_t = np.einsum("js,sic->ijc", W, dP)
        d_phi = np.einsum("js,sic->ijc", dW, P)
        return val, d_t, d_phi

    def field_at_surface(self, phi: np.ndarray):
        """Layer field at the inner edge (t = 0) and its phi-derivative."""
        P0 = self.segments.profile_values(np.array([0.0]))[:, 0, :]  # (nseg, 5)
        W = self.weights(phi)
        dW = self.weights(phi, derivative=True)
        return W @ P0, dW @ P0

    # -- boundary data --------------------------------------------------------

    def boundary_coeffs(self, phi: np.ndarray):
        """Longitudinal boundary tensors and their phi-derivative (coeffs)."""
        phi = np.asarray(phi, dtype=float)
        s = self.segments.params.s_star
        v = np.stack([np.cos(phi), np.zeros_like(phi), -np.sin(phi)], axis=-1)
        dv = np.stack([-np.sin(phi), np.zeros_like(phi), -np.cos(phi)], axis=-1)
        Q = s * (np.einsum("...i,...j->...ij", v, v) - np.eye(3) / 3.0)
        dQ = s * (np.einsum("...i,...j->...ij", dv, v) + np.einsum("...i,...j->...ij", v, dv))
        return qt.to_coeffs(Q), qt.to_coeffs(dQ)

    # -- defect cap (uniaxial) -------------------------------------------------

    def cap_director(self, s, tau):
        """Boojum director R_phi m(s, tau) with phi = q tau (north cap)."""
        s = np.asarray(s, dtype=float)
        tau = np.asarray(tau, dtype=float)
        ang = np.arctan2(tau, s) - self.q * tau
        return np.stack([-np.sin(ang), np.zeros_like(ang), np.cos(ang)], axis=-1)

    def cap_coeffs(self, s, tau):
        n = self.cap_director(s, tau)
        outer = np.einsum("...i,...j->...ij", n, n)
        return qt.to_coeffs(self.segments.params.s_star * (outer - np.eye(3) / 3.0))

    # -- extension patches (coefficient-valued Coons) --------------------------

    def _cap_edge_s1(self, phi, derivative: bool = False):
        """Cap trace along r = 1 + q (s = 1); derivative is with respect to phi."""
        q = self.q
        tau = np.asarray(phi, dtype=float) / q
        if not derivative:
            return self.cap_coeffs(np.ones_like(tau), tau)
        d = 1e-7
        up = self.cap_coeffs(np.ones_like(tau), tau + d / q)
        dn = self.cap_coeffs(np.ones_like(tau), tau - d / q)
        return (up - dn) / (2 * d)

    def _cap_edge_tau1(self, r, derivative: bool = False):
        """Cap trace along phi = q (tau = 1); derivative with respect to r."""
        q = self.q
        s = (np.asarray(r, dtype=float) - 1.0) / q
        if not derivative:
            return self.cap_coeffs(s, np.ones_like(s))
        d = 1e-7
        return (self.cap_coeffs(s + d / q, np.ones_like(s)) - self.cap_coeffs(s - d / q, np.ones_like(s))) / (2 * d)

    def _shared_edge(self, r, derivative: bool = False):
        """Chosen trace along phi = q for r in [1+q, 1+2q]: linear to far field."""
        q = self.q
        r = np.asarray(r, dtype=float)
        corner = self.cap_coeffs(np.array(1.0), np.array(1.0))
        u = ((r - 1.0 - q) / q)[..., None]
        if derivative:
            return np.broadcast_to((self.cinf - corner) / q, r.shape + (5,)).copy()
        return corner + u * (self.cinf - corner)

    def _omega2_coeffs(self, r, phi):
        """Radial interpolation between boundary data and the layer's inner edge."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        tau = ((r - 1.0) / (2.0 * self.q))[..., None]
        Q1, dQ1 = self.field_at_surface(phi)
        Qb, dQb = self.boundary_coeffs(phi)
        val = tau * Q1 + (1.0 - tau) * Qb
        d_r = (Q1 - Qb) / (2.0 * self.q)
        d_phi = tau * dQ1 + (1.0 - tau) * dQb
        return val, d_r, d_phi

    def _patch_A_fin(self, r, phi):
        q = self.q
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        u = ((r - 1.0 - q) / q)[..., None]
        w = (phi / q)[..., None]
        L = self._cap_edge_s1(phi)
        Lp = self._cap_edge_s1(phi, derivative=True)
        R = np.broadcast_to(self.cinf, r.shape + (5,))
        B = np.broadcast_to(self.cinf, r.shape + (5,))
        T = self._shared_edge(r)
        Tp = self._shared_edge(r, derivative=True)
        bl = self.cinf
        br = self.cinf
        tl = self.cap_coeffs(np.array(1.0), np.array(1.0))
        tr = self.cinf
        val = (1 - u) * L + u * R + (1 - w) * B + w * T - (
            (1 - u) * (1 - w) * bl + u * (1 - w) * br + (1 - u) * w * tl + u * w * tr
        )
        d_r = (R - L) / q + w * Tp - ((1 - w) * (br - bl) + w * (tr - tl)) / q
        d_phi = (1 - u) * Lp + (T - B) / q - ((1 - u) * (tl - bl) + u * (tr - br)) / q
        return val, d_r, d_phi

    def _patch_B_fin(self, r, phi):
        q = self.q
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        u = ((r - 1.0) / (2 * q))[..., None]
        w = ((phi - q) / q)[..., None]
        L, Lp = self.boundary_coeffs(phi)
        R = np.broadcast_to(self.cinf, r.shape + (5,))
        inner = (r <= 1.0 + q)[..., None]
        B = np.where(inner, self._cap_edge_tau1(np.minimum(r, 1 + q)), self._shared_edge(np.maximum(r, 1 + q)))
        Bp = np.where(
            inner,
            self._cap_edge_tau1(np.minimum(r, 1 + q), derivative=True),
            self._shared_edge(np.maximum(r, 1 + q), derivative=True),
        )
        Qb2q, _ = self.boundary_coeffs(np.array(2.0 * q))
        tau_r = ((r - 1.0) / (2.0 * q))[..., None]
        T = tau_r * self.cinf + (1.0 - tau_r) * Qb2q
        Tp = np.broadcast_to((self.cinf - Qb2q) / (2.0 * q), r.shape + (5,))
        bl, _ = self.boundary_coeffs(np.array(q))
        br = self.cinf
        tl = Qb2q
        tr = self.cinf
        val = (1 - u) * L + u * R + (1 - w) * B + w * T - (
            (1 - u) * (1 - w) * bl + u * (1 - w) * br + (1 - u) * w * tl + u * w * tr
        )
        d_r = (R - L) / (2 * q) + (1 - w) * Bp + w * Tp - ((1 - w) * (br - bl) + w * (tr - tl)) / (2 * q)
        d_phi = (1 - u) * Lp + (T - B) / q - ((1 - u) * (tl - bl) + u * (tr - br)) / q
        return val, d_r, d_phi

    # -- full-field dispatcher -------------------------------------------------

    def tensor_coeffs(self, r, phi):
        """Coefficient field anywhere on the meridian half-plane."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        r, phi = np.broadcast_arrays(r, phi)
        out = np.empty(r.shape + (5,))
        q = self.q
        south = phi > math.pi / 2
        phi_eff = np.where(south, math.pi - phi, phi)
        m1 = r >= 1.0 + 2.0 * q
        if np.any(m1):
            t = (r[m1] - 1.0 - 2.0 * q) / self.p.eta
            P = self.segments.profile_values(t)  # (nseg, n, 5)
            W = self.weights(phi[m1])
            out[m1] = np.einsum("ns,snc->nc", W, P)
        rest = ~m1
        mid = rest & (phi_eff >= 2.0 * q)
        if np.any(mid):
            out[mid] = self._omega2_coeffs(r[mid], phi[mid])[0]
        cap = rest & ~mid
        if np.any(cap):
            rc = r[cap]
            pc = phi_eff[cap]
            sub = np.empty(rc.shape + (5,))
            c3 = (rc <= 1.0 + q) & (pc <= q)
            sub[c3] = self.cap_coeffs((rc[c3] - 1.0) / q, pc[c3] / q)
            c4a = (~c3) & (pc <= q)
            sub[c4a] = self._patch_A_fin(rc[c4a], pc[c4a])[0]
            c4b = (~c3) & (pc > q)
            sub[c4b] = self._patch_B_fin(rc[c4b], pc[c4b])[0]
            sub[south[cap]] *= _MIRROR_COEFFS
            out[cap] = sub
        return out

    def tensor(self, r, phi):
        return qt.to_matrix(self.tensor_coeffs(r, phi))

    # -- checks ----------------------------------------------------------------

    def check_interfaces(self, n_samples: int = 100, tol: float = 1e-8) -> float:
        q = self.q
        worst = 0.0

        def gap(a, b):
            d = np.abs(np.asarray(a) - np.asarray(b))
            if not np.all(np.isfinite(d)):
                raise ConstructionError("non-finite field values on an interface")
            return float(np.max(d))

        # layer / interpolation seam at r = 1 + 2q
        phis = np.linspace(2 * q, math.pi - 2 * q, n_samples)
        Q1, _ = self.field_at_surface(phis)
        worst = max(worst, gap(self._omega2_coeffs(np.full_like(phis, 1 + 2 * q), phis)[0], Q1))
        # layer / extension right edges are far field
        phis = np.linspace(0.0, 2 * q, n_samples)
        W = self.weights(phis)
        layer_vals = W @ self.segments.profile_values(np.array([0.0]))[:, 0, :]
        worst = max(worst, gap(layer_vals, np.tile(self.cinf, (n_samples, 1))))
        # interpolation / extension seam at phi = 2q
        rs = np.linspace(1.0, 1.0 + 2 * q, n_samples)
        worst = max(
            worst,
            gap(
                self._patch_B_fin(rs, np.full_like(rs, 2 * q))[0],
                self._omega2_coeffs(rs, np.full_like(rs, 2 * q))[0],
            ),
        )
        # cap edges against the extension
        phis = np.linspace(0.0, q, n_samples, endpoint=False)[1:]
        worst = max(worst, gap(self._patch_A_fin(np.full_like(phis, 1 + q), phis)[0], self._cap_edge_s1(phis)))
        rs = np.linspace(1.0, 1.0 + q, n_samples)
        worst = max(worst, gap(self._patch_B_fin(rs, np.full_like(rs, q))[0], self._cap_edge_tau1(rs)))
        rs = np.linspace(1.0 + q, 1.0 + 2 * q, n_samples)
        worst = max(worst, gap(self._patch_A_fin(rs, np.full_like(rs, q))[0], self._patch_B_fin(rs, np.full_like(rs, q))[0]))
        # boundary data at the sphere across the interpolation band
        phis = np.linspace(2 * q, math.pi - 2 * q, n_samples)
        Qb, _ = self.boundary_coeffs(phis)
        worst = max(worst, gap(self._omega2_coeffs(np.ones_like(phis), phis)[0], Qb))
        if worst > tol:
            raise ConstructionError(f"interface mismatch {worst:.3e} exceeds {tol:g}")
        return worst

    def lipschitz_estimate(self, n_samples: int = 60) -> float:
        """Max component slope of the extension, normalized by 1/(h eta)."""
        q = self.q
        worst = 0.0
        for patch, rect in [
            (self._patch_A_fin, (1 + q, 1 + 2 * q, 0.0, q)),
            (self._patch_B_fin, (1.0, 1 + q, q, 2 * q)),
            (self._patch_B_fin, (1 + q, 1 + 2 * q, q, 2 * q)),
        ]:
            rs = np.linspace(rect[0], rect[1], n_samples + 2)[1:-1]
            ps = np.linspace(rect[2], rect[3], n_samples + 2)[1:-1]
            R, PHI = np.meshgrid(rs, ps, indexing="ij")
            _, d_r, d_phi = patch(R, PHI)
            Qr = qt.to_matrix(d_r)
            Qp = qt.to_matrix(d_phi)
            slope = np.sqrt(np.max(Qr**2 + Qp**2))
            worst = max(worst, float(slope))
        return worst * q


def build_construction_fin(
    p: RecoveryParamsFin,
    lam: float,
    segments: SegmentFamily | None = None,
    params: qt.PotentialParams = qt.DEFAULT_PARAMS,
) -> FinConstruction:
    """Assemble the finite-coupling family (reusing segments when given)."""
    if segments is None:
        segments = SegmentFamily.build(lam, p.h, params=params)
    c = FinConstruction(p, segments)
    c.check_interfaces()
    return c


def energy_report_fin(
    p: RecoveryParamsFin,
    lam: float,
    segments: SegmentFamily | None = None,
    params: qt.PotentialParams = qt.DEFAULT_PARAMS,
    lower_bound_ref: float | None = None,
) -> RegionEnergyReport:
    """Rescaled energies of the finite family, with the layer region split
    into its radial / polar / azimuthal / bulk / field contributions."""
    c = build_construction_fin(p, lam, segments, params)
    segments = c.segments
    eta, xi, h = p.eta, p.xi, p.h
    q = c.q
    lam2 = (eta / xi) ** 2
    n0 = (p.n_quad_r, p.n_quad_phi)
    diag = {}
    regions = {}

    # --- layer region: five labeled contributions ---------------------------
    def layer_terms(nt, nphi):
        ts, wt = gauss_nodes(0.0, segments.r_support, nt)
        ps, wp = gauss_nodes(0.0, math.pi, nphi)
        val, d_t, d_phi = c.field_on_grid(ts, ps)
        sphi = np.sin(ps)[None, :]
        P_poly = eta * (ts[:, None] + 2 * h) ** 2 + 2.0 * (ts[:, None] + 2 * h)
        pref = 1.0 + eta * P_poly
        w2 = wt[:, None] * wp[None, :]
        f_vals = qt.bulk_f_coeffs(val, params)
        g_vals, _ = qt.field_g_coeffs(val)
        comm = _theta_commutator_sq(val)
        terms = {
            "omega1_r": 2 * math.pi * np.sum(w2 * pref * 0.5 * np.sum(d_t**2, axis=-1) * sphi),
            "omega1_phi": 2 * math.pi * eta**2 * np.sum(w2 * 0.5 * np.sum(d_phi**2, axis=-1) * sphi),
            "omega1_theta": 2 * math.pi * eta**2 * np.sum(w2 * comm / (2.0 * sphi)),
            "omega1_f": 2 * math.pi * lam2 * np.sum(w2 * pref * f_vals * sphi),
            "omega1_g": 2 * math.pi * np.sum(w2 * pref * g_vals * sphi),
        }
        return {k: float(v) for k, v in terms.items()}

    n_cur = n0
    prev = layer_terms(*n_cur)
    cur = prev
    converged = False
    for _ in range(2):
        n_cur = (2 * n_cur[0], 2 * n_cur[1])
        cur = layer_terms(*n_cur)
        change = abs(sum(cur.values()) - sum(prev.values()))
        if change <= p.quad_rtol * max(abs(sum(cur.values())), 1e-12):
            converged = True
            break
        prev = cur
    regions.update(cur)
    diag["omega1"] = {"n": n_cur, "converged": converged}

    # --- radial interpolation band ------------------------------------------
    def omega2(TAU, PHI):
        val, d_r, d_phi = c._omega2_coeffs(1.0 + 2.0 * q * TAU, PHI)
        rr = (1.0 + 2.0 * q * TAU) ** 2
        sphi = np.sin(PHI)
        f_vals = qt.bulk_f_coeffs(val, params)
        g_vals, _ = qt.field_g_coeffs(val)
        comm = _theta_commutator_sq(val)
        dens = (
            0.5 * rr * sphi * np.sum(d_r**2, axis=-1)
            + 0.5 * sphi * np.sum(d_phi**2, axis=-1)
            + comm / (2.0 * sphi)
            + rr * sphi * (f_vals / xi**2 + g_vals / eta**2)
        )
        return 2.0 * math.pi * eta * dens * (2.0 * q)

    val, d = integrate_rect_adaptive(
        omega2, (0.0, 1.0, 2 * q, math.pi - 2 * q), (p.n_quad_r, p.n_quad_phi), p.quad_rtol
    )
    regions["omega2"] = val
    diag["omega2"] = d

    # --- defect caps (both poles) ---------------------------------------------
    s2 = params.s_star**2

    def omega3(S, TAU):
        rho2 = S**2 + TAU**2
        ang = np.arctan2(TAU, S) - q * TAU
        d_s = -TAU / rho2
        d_tau = S / rho2 - q
        sphi = np.sin(q * TAU)
        rr = (1.0 + q * S) ** 2
        sin2 = np.sin(ang) ** 2
        return (
            2.0
            * math.pi
            * eta
            * (
                s2 * (rr * sphi * d_s**2 + sphi * d_tau**2 + q**2 * sin2 / sphi)
                + (q**2 / eta**2) * rr * sphi * SQRT_3_2 * sin2
            )
        )

    val, d = integrate_rect_adaptive(omega3, (0.0, 1.0, 0.0, 1.0), (p.n_quad_r, p.n_quad_phi), p.quad_rtol)
    regions["omega3"] = 2.0 * val
    diag["omega3"] = d

    # --- extension (both poles) -------------------------------------------------
    def patch_density(patch):
        def dens(R, PHI):
            val, d_r, d_phi = patch(R, PHI)
            rr = R**2
            sphi = np.sin(PHI)
            f_vals = qt.bulk_f_coeffs(val, params)
            g_vals, _ = qt.field_g_coeffs(val)
            comm = _theta_commutator_sq(val)
            return (
                2.0
                * math.pi
                * eta
                * (
                    0.5 * rr * sphi * np.sum(d_r**2, axis=-1)
                    + 0.5 * sphi * np.sum(d_phi**2, axis=-1)
                    + comm / (2.0 * sphi)
                    + rr * sphi * (f_vals / xi**2 + g_vals / eta**2)
                )
            )

        return dens

    total4 = 0.0
    d4 = {}
    for name, patch, rect in [
        ("A", c._patch_A_fin, (1 + q, 1 + 2 * q, 0.0, q)),
        ("B1", c._patch_B_fin, (1.0, 1 + q, q, 2 * q)),
        ("B2", c._patch_B_fin, (1 + q, 1 + 2 * q, q, 2 * q)),
    ]:
        val, d = integrate_rect_adaptive(patch_density(patch), rect, (p.n_quad_r, p.n_quad_phi), p.quad_rtol)
        total4 += val
        d4[name] = d
    regions["omega4"] = 2.0 * total4
    diag["omega4"] = d4

    if lower_bound_ref is None:
        lower_bound_ref = segments.lower_bound_estimate()
    total = float(sum(regions.values()))
    return RegionEnergyReport(
        regions=regions,
        total=total,
        lower_bound_ref=float(lower_bound_ref),
        params={
            "eta": eta,
            "xi": xi,
            "h": h,
            "eps": p.eps,
            "lambda_effective": p.lam_effective,
            "lambda_segments": segments.lam,
            "r_support": segments.r_support,
        },
        quadrature=diag,
    )
