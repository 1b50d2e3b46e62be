"""Business layer and FastAPI application.

Every computation is exposed twice through the same ``run_*`` functions:
as an HTTP endpoint (JSON in, JSON out) and through the CLI, which builds
the identical request models and calls the functions in process.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, HTTPException

from . import geodesic, qtensor as qt, recovery, sphere
from .errors import BoojumError
from .profile1d import Grid1D, SolveOptions, d_lambda_multistart
from .schemas import (
    AbmapRequest,
    AbmapResponse,
    DLambdaRequest,
    DLambdaResponse,
    RecoveryFinRequest,
    RecoveryInfRequest,
    RecoveryResponse,
    ScanRequest,
    ScanResponse,
    SolveReportModel,
    SphereRequest,
    SphereResponse,
)

INV_SQRT6 = 1.0 / math.sqrt(6.0)


def _lambda_out(lam: float):
    return "inf" if math.isinf(lam) else lam


def _grid(model) -> Grid1D:
    return Grid1D(model.length, model.n_nodes)


def _q0_from_request(req: DLambdaRequest) -> np.ndarray:
    if (req.v3 is None) == (req.q0_upper is None):
        raise ValueError("provide exactly one of v3 or q0_upper")
    if req.v3 is not None:
        v3 = req.v3
        v = np.array([-math.sqrt(max(0.0, 1.0 - v3 * v3)), 0.0, v3])
        return qt.uniaxial(v, qt.DEFAULT_PARAMS.s_star)
    u = req.q0_upper
    if len(u) != 5:
        raise ValueError("q0_upper must have 5 entries: Q11, Q12, Q13, Q22, Q23")
    Q = np.array(
        [
            [u[0], u[1], u[2]],
            [u[1], u[3], u[4]],
            [u[2], u[4], -u[0] - u[3]],
        ]
    )
    return Q


def run_dlambda(req: DLambdaRequest) -> DLambdaResponse:
    Q0 = _q0_from_request(req)
    value, _, reports = d_lambda_multistart(Q0, req.lam, _grid(req.grid))
    return DLambdaResponse(
        lam=_lambda_out(req.lam),
        v3=req.v3,
        value=value,
        converged=any(r.converged for r in reports),
        reports=[SolveReportModel(**r.__dict__) for r in reports],
    )


def run_sphere(req: SphereRequest) -> SphereResponse:
    if req.bc == "radial-reference":
        bc = sphere.TangentBC()
        quad = sphere.QuadratureSpec(n_phi=req.n_phi, density="radial-reference")
    elif req.bc == "zero":
        bc = sphere.TangentBC()
        quad = sphere.QuadratureSpec(n_phi=req.n_phi, density="zero")
    else:
        kind = sphere.LONGITUDINAL if req.bc == "longitudinal" else sphere.TANGENT_ANGLE
        bc = sphere.TangentBC(kind=kind, psi=req.psi)
        quad = sphere.QuadratureSpec(n_phi=req.n_phi, density=req.density, grid=_grid(req.grid))
    result = sphere.integrate_D_sphere(req.lam, bc, quad)
    return SphereResponse(
        lam=_lambda_out(req.lam),
        bc={**result.bc, "density": quad.density if req.bc not in ("radial-reference", "zero") else req.bc},
        n_nodes=result.n_nodes,
        value=result.value,
        per_node=result.per_node,
    )


def run_scan(req: ScanRequest) -> ScanResponse:
    p = sphere.SurfacePoint(req.theta, req.phi)
    result = sphere.optimal_tangent_scan(
        p, req.lam, n_dirs=req.n_dirs, grid=_grid(req.grid), solver=req.solver
    )
    return ScanResponse(
        lam=_lambda_out(req.lam),
        point=result.point,
        best_psi=result.best_psi,
        table=[[float(a), float(b)] for a, b in result.table],
    )


def run_abmap(req: AbmapRequest) -> AbmapResponse:
    res = req.resolution
    alphas = np.linspace(-math.pi / 2, math.pi / 2, res)
    betas = np.linspace(-math.pi / 2, math.pi / 2, res)
    A, B = np.meshgrid(alphas, betas, indexing="ij")
    T = geodesic.trace_T(A, B, req.v3)
    flags = (np.minimum(np.abs(T - INV_SQRT6), np.abs(T + INV_SQRT6)) < 1e-6).astype(int)
    paths: dict = {}
    if req.include_paths:
        grid = _grid(req.grid)
        v = geodesic.canonical_director(req.v3)
        frame = geodesic.build_frame(v)
        path0, _ = geodesic.minimize_lambda0(v, grid)
        paths["lambda0"] = {
            "t": grid.nodes.tolist(),
            "alpha": path0.alpha.tolist(),
            "beta": path0.beta.tolist(),
        }
        Q0 = qt.uniaxial(v, qt.DEFAULT_PARAMS.s_star)
        _, best, _ = d_lambda_multistart(Q0, math.inf, grid)
        prof_angles = geodesic.angles_from_profile(best, frame)
        paths["lambdainf"] = {
            "t": grid.nodes.tolist(),
            "alpha": prof_angles.alpha.tolist(),
            "beta": prof_angles.beta.tolist(),
        }
    return AbmapResponse(
        v3=req.v3,
        alpha=alphas.tolist(),
        beta=betas.tolist(),
        trace_values=[row.tolist() for row in T],
        uniaxial_flags=[row.tolist() for row in flags],
        paths=paths,
    )


def run_recovery_inf(req: RecoveryInfRequest) -> RecoveryResponse:
    params = recovery.RecoveryParamsInf(req.eta, n_quad_r=req.n_quad, n_quad_phi=req.n_quad)
    rep = recovery.energy_report_inf(params)
    return RecoveryResponse(
        mode="inf",
        regions=rep.regions,
        total=rep.total,
        lower_bound_ref=rep.lower_bound_ref,
        params=rep.params,
        quadrature=rep.quadrature,
    )


def run_recovery_fin(req: RecoveryFinRequest) -> RecoveryResponse:
    lam = req.lam
    if math.isinf(lam):
        raise ValueError("finite-coupling recovery needs a finite lambda; use mode=inf")
    xi = req.xi if req.xi is not None else (req.eta / lam if lam > 0 else req.eta)
    eps = req.eps if req.eps is not None else req.h / 5.0
    params = recovery.RecoveryParamsFin(
        eta=req.eta, xi=xi, h=req.h, eps=eps, n_quad_r=req.n_quad, n_quad_phi=req.n_quad
    )
    segments = recovery.SegmentFamily.build(lam, req.h, grid=_grid(req.segment_grid))
    rep = recovery.energy_report_fin(params, lam, segments)
    return RecoveryResponse(
        mode="fin",
        regions=rep.regions,
        total=rep.total,
        lower_bound_ref=rep.lower_bound_ref,
        params=rep.params,
        quadrature=rep.quadrature,
    )


app = FastAPI(
    title="boojum",
    description="Boundary-layer transition energies of tangentially anchored "
    "nematic shells in a magnetic field.",
)


def _wrap(fn, req):
    try:
        return fn(req)
    except (ValueError, BoojumError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


@app.get("/health")
def health():
    return {"status": "ok"}


@app.post("/dlambda", response_model=DLambdaResponse, response_model_by_alias=True)
def dlambda_endpoint(req: DLambdaRequest):
    return _wrap(run_dlambda, req)


@app.post("/sphere-integral", response_model=SphereResponse, response_model_by_alias=True)
def sphere_endpoint(req: SphereRequest):
    return _wrap(run_sphere, req)


@app.post("/scan", response_model=ScanResponse, response_model_by_alias=True)
def scan_endpoint(req: ScanRequest):
    return _wrap(run_scan, req)


@app.post("/abmap", response_model=AbmapResponse)
def abmap_endpoint(req: AbmapRequest):
    return _wrap(run_abmap, req)


@app.post("/recovery/inf", response_model=RecoveryResponse)
def recovery_inf_endpoint(req: RecoveryInfRequest):
    return _wrap(run_recovery_inf, req)


@app.post("/recovery/fin", response_model=RecoveryResponse)
def recovery_fin_endpoint(req: RecoveryFinRequest):
    return _wrap(run_recovery_fin, req)
