"""Distribution-free estimation of binary choice models: a Gaussian-kernel
sieve for the systematic index and a squared-Hermite error law, fitted jointly
by least squares with spectral cut-off regularization."""

from .backend import BACKEND
from .core import (
    Dataset,
    FitConfig,
    KnpModel,
    Standardization,
    check_pc_bound,
    fit,
    objective,
    objective_grad,
)
from .errors import (
    FitError,
    KnpChoiceError,
    NumericalError,
    RankError,
    ValidationError,
)
from .effects import (
    ape,
    ccp_gradient,
    conditional_ape,
    index_gradient,
    weighted_avg_derivative,
)
from .hermite import HermiteDistribution, normal_moments, partial_moments
from .inference import ApeTarget, BootstrapSpec, GValueTarget, PValueTarget, bootstrap
from .kernel import GaussianKernel, GramSystem, build_gram
from .modelio import load_model, save_model
from .selection import CvPlan, cross_validate
from .simulation import SimDesign, replicate_table, run_baseline

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ApeTarget",
    "BootstrapSpec",
    "CvPlan",
    "Dataset",
    "FitConfig",
    "FitError",
    "GValueTarget",
    "GaussianKernel",
    "GramSystem",
    "HermiteDistribution",
    "KnpChoiceError",
    "KnpModel",
    "NumericalError",
    "PValueTarget",
    "RankError",
    "SimDesign",
    "Standardization",
    "ValidationError",
    "ape",
    "bootstrap",
    "build_gram",
    "ccp_gradient",
    "index_gradient",
    "check_pc_bound",
    "conditional_ape",
    "cross_validate",
    "fit",
    "load_model",
    "normal_moments",
    "objective",
    "objective_grad",
    "partial_moments",
    "replicate_table",
    "run_baseline",
    "save_model",
    "weighted_avg_derivative",
    "__version__",
]
