"""Small-sample DOA estimation for uniform linear arrays.

root-MUSIC with two-step covariance modification, root-swap selection and
pseudo-noise resampling, plus first-order subspace-leakage and root-swap
probability predictions and a Monte Carlo harness.
"""

__version__ = "0.1.0"

from .array_model import (
    ArrayGeometry,
    SourceScenario,
    TrueModel,
    generate_snapshots,
    make_scenario,
    steering_matrix,
    steering_vector,
    true_covariance,
    true_subspace_model,
)
from .errors import (
    DegenerateModelError,
    EstimationError,
    IllConditionedError,
    LeakDoaError,
    PolynomialDegreeError,
    RootPairingError,
)
from .experiments import ExperimentConfig, MetricsTable, run_monte_carlo, stochastic_crb
from .leakage import empirical_leakage, expected_leakage_step1, expected_leakage_step2
from .methods import MethodSettings, MethodSpec, run_method
from .resampling import ResamplingConfig, pseudo_noise_resample
from .rootmusic import DoaEstimate, RootSet, root_music
from .rootswap import candidate_combinations, root_swap_estimate, root_swap_probability
from .subspace import eigendecompose, forward_backward_average, sample_covariance
from .twostep import sml_objective, two_step_estimate, two_step_from_covariance
