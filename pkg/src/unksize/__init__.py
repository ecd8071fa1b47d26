"""Semiparametric logistic regression for counts whose binomial sizes are unknown.

Counts are modelled as Poisson with mean ``lambda * h(x; beta)``, with the
latent size means ``lambda`` drawn from a discrete mixing distribution that
is estimated nonparametrically alongside ``beta``.
"""

__version__ = "0.1.0"

from .bootstrap import BootstrapConfig, BootstrapResult, bootstrap_ci, pairs_resample, parametric_resample
from .ecm import (
    EcmConfig,
    cm_alpha,
    cm_beta,
    cm_lambda,
    e_step,
    ecm_fit,
    fit_from_starts,
    t2_gradient,
    t2_hessian,
    t2_objective,
)
from .errors import (
    DegenerateComponentError,
    DomainError,
    InferenceUnreliableError,
    OptimizationError,
    ValidationError,
)
from .io import ModelSpec, load_csv, load_mbovis
from .kernels import BACKEND
from .links import LOGIT, PROBIT, IndexLink, LinkSpec, get_link, register_link
from .model import (
    Dataset,
    FitResult,
    MixingDistribution,
    Observation,
    Theta,
    component_log_density,
    log_likelihood,
    mixture_log_density,
    poisson_log_pmf,
)
from .selection import SelectionResult, bic, select_K
from .simulate import SimDesign, SimSummary, generate_dataset, run_study, study_design
