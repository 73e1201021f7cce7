"""Informative path planning for multi-robot transect sampling of GP fields."""

from . import _backend
from .bounds import BoundInputs, cost_model, epsilon_m2ipp, epsilon_mepp
from .errors import (
    BudgetExceeded,
    DegenerateNoise,
    DimensionMismatch,
    InvalidArity,
    NoUnobserved,
    OutOfRange,
    OverlappingSets,
    ParseError,
    SearchFailed,
    SingularSystem,
    TooLarge,
    TransectError,
    UnknownWindow,
    ZeroMeanField,
)
from .fields import (
    FieldSpec,
    MleSearch,
    fit_mle,
    load_field_csv,
    log_marginal_likelihood,
    sample_field,
    save_field_csv,
)
from .gp_core import (
    GpHyperParams,
    Location,
    conditional_entropy,
    cov_matrix,
    joint_entropy,
    kernel,
    mutual_information,
    posterior_cov,
    posterior_mean,
)
from .metrics import FieldRealization, en_metric, er_metric, mi_metric
from .planners import (
    PlanRequest,
    PlanResult,
    ValueTable,
    query_policy,
    solve,
    solve_exact_m2ipp,
    solve_exact_mepp,
    solve_gm2ipp,
    solve_gmepp,
    solve_m2ipp_m,
    solve_mepp_m,
)
from .transect import (
    Path,
    StageAction,
    TransectGrid,
    action_locations,
    complement,
    enumerate_actions,
    window,
)

__version__ = "0.1.0"


def backend() -> str:
    """Name of the active kernel backend (``compiled`` or ``python``)."""
    return _backend.NAME
