"""Pydantic request/response models shared by the HTTP service and the CLI."""

from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

SCHEMA_VERSION = 1


def parse_lambda(value) -> float:
    if isinstance(value, str):
        if value.lower() in ("inf", "infinity"):
            return math.inf
        return float(value)
    return float(value)


class LambdaMixin(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: float | str = Field(alias="lambda")

    @field_validator("lam")
    @classmethod
    def _lam(cls, v):
        lam = parse_lambda(v)
        if lam < 0:
            raise ValueError("lambda must be nonnegative (or 'inf')")
        return lam


class GridModel(BaseModel):
    length: float = 12.0
    n_nodes: int = 1537


class SolveReportModel(BaseModel):
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    degenerate_g_evals: int
    message: str = ""


class DLambdaRequest(LambdaMixin):
    v3: Optional[float] = None
    q0_upper: Optional[list[float]] = None  # Q11, Q12, Q13, Q22, Q23 (Q33 implied)
    grid: GridModel = GridModel()

    @field_validator("v3")
    @classmethod
    def _v3(cls, v):
        if v is not None and not -1.0 <= v <= 1.0:
            raise ValueError("v3 must lie in [-1, 1]")
        return v


class DLambdaResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    lam: str | float = Field(alias="lambda")
    model_config = ConfigDict(populate_by_name=True)
    v3: Optional[float] = None
    value: float
    converged: bool
    reports: list[SolveReportModel]


class SphereRequest(LambdaMixin):
    bc: Literal["longitudinal", "tangent-angle", "radial-reference", "zero"] = "longitudinal"
    psi: float = 0.0
    n_phi: int = 64
    density: Literal["auto", "exact-inf", "minimized"] = "auto"
    grid: GridModel = GridModel(n_nodes=385)


class SphereResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    lam: str | float = Field(alias="lambda")
    model_config = ConfigDict(populate_by_name=True)
    bc: dict
    n_nodes: int
    value: float
    per_node: list[dict]


class ScanRequest(LambdaMixin):
    phi: float
    theta: float = 0.0
    n_dirs: int = 32
    grid: GridModel = GridModel(n_nodes=385)
    solver: Literal["auto", "full"] = "auto"


class ScanResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    lam: str | float = Field(alias="lambda")
    model_config = ConfigDict(populate_by_name=True)
    point: dict
    best_psi: float
    table: list[list[float]]


class AbmapRequest(BaseModel):
    v3: float = 0.5
    resolution: int = 200
    include_paths: bool = True
    grid: GridModel = GridModel(n_nodes=385)

    @field_validator("v3")
    @classmethod
    def _v3(cls, v):
        if not -1.0 < v < 1.0:
            raise ValueError("v3 must lie in (-1, 1)")
        return v

    @field_validator("resolution")
    @classmethod
    def _res(cls, v):
        if v < 8:
            raise ValueError("resolution must be at least 8")
        return v


class AbmapResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    v3: float
    alpha: list[float]
    beta: list[float]
    trace_values: list[list[float]]
    uniaxial_flags: list[list[int]]
    paths: dict


class RecoveryInfRequest(BaseModel):
    eta: float
    n_quad: int = 128

    @field_validator("eta")
    @classmethod
    def _eta(cls, v):
        if not 0.0 < v <= 0.5:
            raise ValueError("eta must lie in (0, 0.5]")
        return v


class RecoveryFinRequest(LambdaMixin):
    eta: float
    h: float
    eps: Optional[float] = None
    xi: Optional[float] = None  # default: eta / lambda
    n_quad: int = 96
    segment_grid: GridModel = GridModel(n_nodes=257)


class RecoveryResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    mode: str
    regions: dict
    total: float
    lower_bound_ref: float
    params: dict
    quadrature: dict
