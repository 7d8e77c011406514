"""INAR(∞) time series, Hawkes processes and the discretization linking them."""

from .approx import (
    ConvergenceReport,
    build_approx,
    convergence_sweep,
    count_distribution_distance,
    variance_identity_residual,
    yule_walker_residual,
)
from .core import (
    CountSeries,
    Exponential,
    InarParams,
    PointPattern,
    RngStream,
    Step,
    Table,
    discretize,
    k_delta,
    kernel_eval,
    kernel_from_dict,
    kernel_mass,
    model_from_json,
    model_to_json,
    zero_kernel,
)
from .errors import (
    ConfigInvalid,
    DiscretizationSupercritical,
    EmptySamples,
    InarHawkesError,
    InvalidProbability,
    MassNotSubcritical,
    MisalignedWindow,
    SeriesTooShort,
    SingularDesign,
    Supercritical,
    TailTooHeavy,
    UnsupportedArgument,
)
from .estimate import InarFit, KernelEstimate, estimate_kernel, fit_inar_ls
from .hawkes import (
    ClusterRealization,
    HawkesModel,
    StepFunction,
    bin_counts,
    intensity,
    laplace_mc,
    simulate_hawkes_cluster,
    simulate_hawkes_thinning,
)
from .inar import (
    FamilyRealization,
    FiniteSupportSeq,
    autocovariance,
    beta_coeffs,
    counting_pmf_ratio,
    inar_mean,
    mgf,
    residuals,
    simulate_family,
    simulate_inar,
    simulate_inar_branching,
    thin,
    thin_bernoulli,
    truncate,
)

__version__ = "0.1.0"
