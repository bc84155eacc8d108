"""OLS with robust sandwich covariances, Frisch-Waugh-Lovell partial
regressions and variance formulas for stratified experiments."""

from .errors import (
    DegenerateStratum,
    DimensionMismatch,
    FwlseError,
    InputError,
    LeverageOne,
    NumericalError,
    RankDeficient,
    TooFewRows,
    UnsupportedKind,
)
from .fwl import (
    EquivalenceReport,
    PartialFit,
    alternate_form_fit,
    covariance_equivalence,
    partial_fit,
)
from .ols import DesignSpec, OlsFit, fit
from .strata import StratifiedData, analyze
from .vcov import (
    HC,
    Cluster,
    ClusterCorrection,
    CovEstimate,
    Hac,
    Homoskedastic,
    bartlett_weights,
    cluster_cov,
    hac_cov,
    hc_cov,
    homoskedastic_cov,
)

__version__ = "0.1.0"
