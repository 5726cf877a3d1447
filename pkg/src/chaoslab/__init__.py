"""chaoslab: Monte Carlo laboratory for mean-field particle systems.

Simulates interacting particle ensembles and their independent mean-field
copies, computes Girsanov entropy / total-variation diagnostics, and
verifies the sqrt(k/N) chaos rate and its supporting concentration
inequalities.
"""

__version__ = "0.1.0"

from .engine import (
    EmpiricalMeasure,
    FrozenLawMeasure,
    ModelSpec,
    NonFiniteModelOutput,
    euler_step,
    simulate_independent,
    simulate_interacting,
)
from .girsanov import (
    DriftDeviationSeries,
    EntropyEstimate,
    GirsanovRecord,
    drift_deviation,
    entropy_quadratic,
    entropy_zlogz,
    log_density,
)
from .grids import PathEnsemble, TimeGrid
from .metrics import RateFit, fit_rate, tv_bound_pinsker, tv_bound_theorem, tv_direct_marginal
from .models import (
    BoundedKernelModel,
    KineticModel,
    beta_of,
    kinetic_tanh_model,
    make_bounded_kernel_spec,
    make_control_spec,
    make_kinetic_spec,
    normal_init,
    tanh_model,
)
from .reference import ReferenceLaw, build_reference_law
from .rng import RngPlan

__all__ = [
    "__version__",
    "TimeGrid",
    "PathEnsemble",
    "RngPlan",
    "ModelSpec",
    "EmpiricalMeasure",
    "FrozenLawMeasure",
    "NonFiniteModelOutput",
    "euler_step",
    "simulate_interacting",
    "simulate_independent",
    "BoundedKernelModel",
    "KineticModel",
    "tanh_model",
    "kinetic_tanh_model",
    "make_bounded_kernel_spec",
    "make_kinetic_spec",
    "make_control_spec",
    "normal_init",
    "beta_of",
    "ReferenceLaw",
    "build_reference_law",
    "DriftDeviationSeries",
    "GirsanovRecord",
    "EntropyEstimate",
    "drift_deviation",
    "log_density",
    "entropy_quadratic",
    "entropy_zlogz",
    "RateFit",
    "fit_rate",
    "tv_bound_pinsker",
    "tv_bound_theorem",
    "tv_direct_marginal",
]
