"""Tangent boundary families on the unit sphere and quadrature of the
transition energy density over it.

The longitudinal family (director along meridians) is equivariant, so the
surface integral reduces to a Gauss-Legendre rule in cos(phi); general
fields use a product rule in (theta, phi).  Density evaluation can use the
exact strong-field formula, a numerically minimized profile, or reference
comparison densities.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import qtensor as qt
from .closedform_inf import D_inf_exact, KAPPA
from .errors import PoleError
from .profile1d import Grid1D, SolveOptions, d_lambda_multistart
from . import geodesic

LONGITUDINAL = "longitudinal"
TANGENT_ANGLE = "tangent-angle"
CUSTOM = "custom"

#: Grid used by default for numerically minimized densities; coarser than the
#: profile default because quadratures evaluate many of them.
SCAN_GRID = Grid1D(12.0, 385)


def surface_unit(theta: float, phi: float) -> np.ndarray:
    return np.array(
        [math.sin(phi) * math.cos(theta), math.sin(phi) * math.sin(theta), math.cos(phi)]
    )


def e_phi(theta: float, phi: float) -> np.ndarray:
    """Meridian (longitudinal) tangent unit vector."""
    return np.array(
        [math.cos(phi) * math.cos(theta), math.cos(phi) * math.sin(theta), -math.sin(phi)]
    )


def e_theta(theta: float, phi: float) -> np.ndarray:
    """Azimuthal tangent unit vector."""
    return np.array([-math.sin(theta), math.cos(theta), 0.0])


@dataclass(frozen=True)
class SurfacePoint:
    theta: float
    phi: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.phi <= math.pi:
            raise ValueError("polar angle must lie in [0, pi]")

    @property
    def omega(self) -> np.ndarray:
        return surface_unit(self.theta, self.phi)


@dataclass(frozen=True)
class TangentBC:
    """Tangent director family on the sphere.

    ``longitudinal`` follows the meridians; ``tangent-angle`` rotates the
    longitudinal direction by a fixed angle psi inside the tangent plane;
    ``custom`` wraps a user field (checked for tangency on use).
    """

    kind: str = LONGITUDINAL
    psi: float = 0.0
    custom_field: object = None

    def __post_init__(self) -> None:
        if self.kind not in (LONGITUDINAL, TANGENT_ANGLE, CUSTOM):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == CUSTOM and not callable(self.custom_field):
            raise ValueError("custom boundary kind requires a callable field")

    @property
    def equivariant(self) -> bool:
        return self.kind in (LONGITUDINAL, TANGENT_ANGLE)

    def director(self, theta: float, phi: float) -> np.ndarray:
        if self.kind == CUSTOM:
            v = np.asarray(self.custom_field(theta, phi), dtype=float)
            v = qt.unit_director(v)
            if abs(float(v @ surface_unit(theta, phi))) > 1e-10:
                raise ValueError("custom boundary field is not tangent at the query point")
            return v
        if math.sin(phi) < 1e-12:
            raise PoleError("longitudinal tangent direction is undefined at the poles")
        if self.kind == LONGITUDINAL:
            return e_phi(theta, phi)
        return math.cos(self.psi) * e_phi(theta, phi) + math.sin(self.psi) * e_theta(theta, phi)

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == TANGENT_ANGLE:
            d["psi"] = self.psi
        return d


def boundary_tensor(
    p: SurfacePoint, bc: TangentBC, params: qt.PotentialParams = qt.DEFAULT_PARAMS
) -> np.ndarray:
    """Uniaxial boundary tensor of the tangent family at a surface point."""
    return qt.uniaxial(bc.director(p.theta, p.phi), params.s_star)


@dataclass(frozen=True)
class QuadratureSpec:
    """Sphere quadrature configuration.

    ``density`` selects how the per-point energy density is produced:
    ``auto`` (exact strong-field value when available, minimized otherwise),
    ``exact-inf``, ``minimized``, ``radial-reference`` (the comparison
    density kappa (1 - |cos phi|)) or ``zero``.

    The rule is Gauss-Legendre in the polar angle (the densities of interest
    are analytic there but have half-power kinks in cos(phi)); equator-
    symmetric densities are integrated over one hemisphere and doubled,
    which also removes the |cos phi| kink of the radial reference.
    """

    n_phi: int = 64
    n_theta: int = 0  # 0: equivariant fast path (single azimuth)
    density: str = "auto"
    grid: Grid1D = field(default_factory=lambda: SCAN_GRID)
    solve_tol: float = 1e-8
    use_mirror_symmetry: bool = True

    def __post_init__(self) -> None:
        if self.density not in ("auto", "exact-inf", "minimized", "radial-reference", "zero"):
            raise ValueError(f"unknown density {self.density!r}")
        if self.n_phi < 2:
            raise ValueError("need at least 2 polar quadrature nodes")


@dataclass
class SphereIntegral:
    lam: float
    bc: dict
    n_nodes: int
    value: float
    per_node: list

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "lambda": "inf" if math.isinf(self.lam) else self.lam,
                "bc": self.bc,
                "n_nodes": self.n_nodes,
                "value": self.value,
                "per_node": self.per_node,
            }
        )


def _density_value(args):
    theta, phi, lam, bc, spec = args
    density = spec.density
    if density == "zero":
        return 0.0
    if density == "radial-reference":
        return KAPPA * (1.0 - abs(math.cos(phi)))
    if density == "auto":
        density = "exact-inf" if math.isinf(lam) and bc.kind == LONGITUDINAL else "minimized"
    v = bc.director(theta, phi)
    if density == "exact-inf":
        if not math.isinf(lam):
            raise ValueError("exact-inf density is only defined at lambda = inf")
        return D_inf_exact(v)
    Q0 = qt.uniaxial(v, qt.DEFAULT_PARAMS.s_star)
    value, _, _ = d_lambda_multistart(Q0, lam, spec.grid, SolveOptions(tol=spec.solve_tol))
    return value


def _worker_count() -> int:
    n = int(os.environ.get("BOOJUM_THREADS", "1"))
    return max(1, n)


def _parallel_map(fn, items):
    workers = _worker_count()
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))  # order-preserving, deterministic reduction


def integrate_D_sphere(
    lam: float, bc: TangentBC, quad: QuadratureSpec = None
) -> SphereIntegral:
    """Surface integral of the energy density of the boundary family.

    A node failure aborts the quadrature with the offending node identified.
    """
    quad = quad or QuadratureSpec()
    # Equator-symmetric densities: one hemisphere, doubled.
    mirror = quad.use_mirror_symmetry and (
        quad.density in ("radial-reference", "zero") or bc.kind == LONGITUDINAL
    )
    if quad.n_theta and quad.n_theta > 0 and not bc.equivariant:
        thetas = np.linspace(0.0, 2.0 * math.pi, quad.n_theta, endpoint=False)
        w_theta = 2.0 * math.pi / quad.n_theta
        mirror = False
    else:
        thetas = np.array([0.0])
        w_theta = 2.0 * math.pi

    upper = math.pi / 2 if mirror else math.pi
    x, w = np.polynomial.legendre.leggauss(quad.n_phi)
    phis = 0.5 * upper * (x + 1.0)
    w_phi = 0.5 * upper * w * np.sin(phis) * (2.0 if mirror else 1.0)

    tasks = [
        (float(theta), float(phi), lam, bc, quad) for theta in thetas for phi in phis
    ]
    try:
        values = _parallel_map(_density_value, tasks)
    except Exception as exc:  # identify the failing node
        for task in tasks:
            try:
                _density_value(task)
            except Exception:
                raise RuntimeError(
                    f"density evaluation failed at theta={task[0]:.6f}, phi={task[1]:.6f}: {exc}"
                ) from exc
        raise

    per_node = []
    total = 0.0
    idx = 0
    for theta in thetas:
        for phi, wi in zip(phis, w_phi):
            val = values[idx]
            idx += 1
            per_node.append(
                {"theta": float(theta), "phi": float(phi), "weight": float(wi * w_theta), "D": float(val)}
            )
            total += wi * w_theta * val
    return SphereIntegral(
        lam=lam, bc=bc.describe(), n_nodes=len(per_node), value=float(total), per_node=per_node
    )


@dataclass
class ScanResult:
    point: dict
    lam: float
    best_psi: float
    table: np.ndarray  # (n_dirs, 2): psi, D

    def to_csv(self, path=None) -> str:
        import io

        buf = io.StringIO()
        buf.write(
            '# {"schema_version": 1, "columns": ["psi", "D"], '
            f'"best_psi": {self.best_psi:.17g}}}\n'
        )
        buf.write("psi,D\n")
        for psi, d in self.table:
            buf.write(f"{psi:.17g},{d:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def _scan_density(args):
    psi, point, lam, grid, solver = args
    v = math.cos(psi) * e_phi(point.theta, point.phi) + math.sin(psi) * e_theta(
        point.theta, point.phi
    )
    if solver == "reduced-lambda0":
        if abs(v[2]) >= 1.0 - 1e-12 or float(np.hypot(v[0], v[1])) < 1e-8:
            # degenerate frame: fall back to the full solver
            solver = "full"
        else:
            _, energy = geodesic.minimize_lambda0(v, grid)
            return energy
    Q0 = qt.uniaxial(v, qt.DEFAULT_PARAMS.s_star)
    value, _, _ = d_lambda_multistart(Q0, lam, grid)
    return value


def optimal_tangent_scan(
    p: SurfacePoint,
    lam: float,
    n_dirs: int = 32,
    grid: Grid1D = None,
    solver: str = "auto",
) -> ScanResult:
    """Scan the transition energy over tangent directions at a surface point.

    Directions are sampled over half a turn (antipodal tangent vectors give
    the same boundary tensor).  ``solver`` may be ``auto`` (reduced problems
    at the two limit couplings, full tensor otherwise) or ``full``.
    """
    if n_dirs < 8:
        raise ValueError("need at least 8 scan directions")
    if math.sin(p.phi) < 1e-12:
        raise PoleError("tangent scans are undefined at the poles")
    grid = grid or SCAN_GRID
    if solver == "auto":
        solver = "reduced-lambda0" if lam == 0.0 else "full"
    psis = np.arange(n_dirs) * math.pi / n_dirs
    values = _parallel_map(_scan_density, [(float(psi), p, lam, grid, solver) for psi in psis])
    table = np.column_stack([psis, values])
    best = int(np.argmin(values))
    return ScanResult(
        point={"theta": p.theta, "phi": p.phi},
        lam=lam,
        best_psi=float(psis[best]),
        table=table,
    )
