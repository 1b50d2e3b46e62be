"""Boundary-layer transition energies of tangentially anchored nematic
shells in an external field: profile solvers, exact strong-field values,
reduced angle descriptions, sphere quadrature and recovery constructions.
"""

from .closedform_inf import KAPPA, D_inf_exact, InfProfileParams, decay_envelope, n_exact
from .errors import (
    BoojumError,
    ConstructionError,
    DegenerateFrameError,
    PoleError,
    SolverError,
)
from .profile1d import (
    D_lambda,
    Grid1D,
    Profile,
    SolveOptions,
    SolveReport,
    d_lambda_multistart,
    energy_F_lambda,
    minimize_profile,
)
from .qtensor import (
    DEFAULT_PARAMS,
    PotentialParams,
    Q_INF,
    bulk_f,
    field_g,
    field_g_flagged,
    frob_inner,
    trace_cubed,
    uniaxial,
)

__version__ = "0.1.0"
