"""Rate-privacy toolkit: utility-privacy trade-offs for discrete and Gaussian sources."""
__version__ = "0.1.0"

from .errors import InputError, NumericalError, PrivexError, RangeError
from .prob_core import (
    Channel,
    JointDistribution,
    ProbVector,
    bec,
    bsc,
    conditional_entropy,
    entropy,
    joint_from_channel,
    mutual_information,
    validate_joint,
)
from .dependence import maximal_correlation, poincare_constant, weak_independence
from .filters import audit_filter, erasure_filter, erasure_wrapper
from .rate_privacy_discrete import (
    SolverConfig,
    bounds_g,
    bounds_g_hat,
    closed_form,
    curve_g,
    dilution_outer,
    funnel_dual,
    g0,
    linearity_test,
    slope_bound_at_zero,
    solve_g,
    solve_g_hat,
)
from .rate_privacy_gaussian import (
    GaussianPair,
    QuantizerConfig,
    convergence_report,
    g_eps_M,
    g_gaussian,
    g_hat_gaussian,
)

__all__ = [
    "InputError", "NumericalError", "PrivexError", "RangeError",
    "Channel", "JointDistribution", "ProbVector", "bec", "bsc", "conditional_entropy",
    "entropy", "joint_from_channel", "mutual_information", "validate_joint",
    "maximal_correlation", "poincare_constant", "weak_independence",
    "audit_filter", "erasure_filter", "erasure_wrapper",
    "SolverConfig", "bounds_g", "bounds_g_hat", "closed_form", "curve_g",
    "dilution_outer", "funnel_dual", "g0", "linearity_test", "slope_bound_at_zero",
    "solve_g", "solve_g_hat",
    "GaussianPair", "QuantizerConfig", "convergence_report", "g_eps_M", "g_gaussian",
    "g_hat_gaussian",
]
