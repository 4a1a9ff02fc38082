"""Degenerate p-sub-Laplacian solver and Pohozaev identity checks on boxes."""

from .config import RunConfig, load_config, parse_config
from .estimators import GrushinPLaplaceSolver, PohozaevVerifier
from .exceptions import (
    ConfigError,
    DivergenceError,
    DomainRangeError,
    GrushinError,
    NonlinearityParseError,
    SingularSlabError,
    SingularWeightError,
    UndefinedRatioError,
)
from .fields import ScalarField, VectorField, grushin_divergence, grushin_gradient, p_sublaplacian
from .geometry import (
    Grid,
    GrushinGeometry,
    SubBox,
    anisotropic_distance,
    delta_shell,
    grushin_normal,
    outward_normal,
)
from .nonlinearity import Nonlinearity, eval_dF_dz, eval_f, eval_F, parse_nonlinearity
from .pohozaev import (
    IdentityReport,
    scaling_identity_global,
    scaling_identity_local,
    translating_identity_x,
    translating_identity_y,
)
from .quadrature import surface_integral, volume_integral
from .solver import (
    EnergyReport,
    SolverConfig,
    energy,
    energy_gradient,
    minimize,
    oracle_torsion,
    picard_solve,
    poincare_ratio,
)
from .studies import observed_order, refinement_study, stationarity_study, whole_space_study
from .variation import (
    Cutoff,
    VariationMap,
    apply_map,
    ddet_dt_at_zero,
    jacobian_det,
    stationarity_check,
)

__version__ = "0.1.0"
