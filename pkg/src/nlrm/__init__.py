"""Monte-Carlo laboratory for concentration of random neural networks at initialization."""

from .concentration import (
    ConcentrationReport,
    Functional,
    TailProfile,
    fit_profile,
    mean_median_gap_check,
    moment_from_tail,
    operator_norm_bound_check,
    run_mc,
    tensorization_check,
)
from .exceptions import ConfigurationError, ContractViolation, InsufficientDataError, NLRMError, NumericalError
from .experiments import REGISTRY, ExperimentResult, run_experiment
from .matrix_core import SamplerSpec, hs_norm, operator_norm, sample, singular_values, symmetric_eigenvalues
from .ncpoly import NCPolynomial, NCTerm, evaluate, is_formally_self_adjoint, poly_spectral_statistic, trace_statistic
from .network import ACTIVATIONS, NetworkConfig, RandomNetworkFeatures, forward, sample_network
from .rng import RngStream, derive_seed
from .spectral import SpectralMeasure, linear_statistic, spectral_measure_sv, spectral_measure_sym, w1_distance

__version__ = "0.1.0"
