"""Random products of real 2x2 matrices near a balanced critical point.

Library layout:

- mat2: small exact helpers for 2x2 matrices and their projective action
- models: critical one-parameter families (hopping chain, 1d Dirac,
  disordered Ising transfer matrices, generic expansions) and their
  hypothesis constants
- dynamics: direction-orbit simulation, log-coordinates, empirical
  occupation histograms and boundary-passage records
- estimators: Lyapunov exponent estimators, limit-shape references for
  the occupation measure, integrated density of states, Ising free energy
- comparison: explicit random-walk bounds that sandwich the orbit between
  boundary passages, plus the small reflected comparison chain
- cocycle: smoothed potential / corrector route to the same exponent
- experiments: config-driven command line driver
"""

__version__ = "0.1.0"

from .models import (
    BoundedDistribution,
    CriticalFamily,
    HypothesisConstants,
    constant,
    constants,
    dirac_family,
    discrete,
    expected_log_kappa_sq,
    generic_family,
    hopping_family,
    hopping_transfer,
    ising_family,
    ising_transfer,
    log_ratio_uniform,
    sample_matrix,
    two_point,
    uniform,
)
from .dynamics import (
    FiberPoint,
    OrbitStats,
    birkhoff_only,
    delta_of,
    run_orbit,
    step_x,
    step_znu,
    theta_to_x,
    x_to_theta,
    x_to_znu,
    znu_to_x,
)
from .estimators import (
    EmpiricalMeasure,
    LyapunovEstimate,
    ids_estimate,
    ising_free_energy,
    lyapunov_asymptotic,
    lyapunov_birkhoff,
    lyapunov_fit,
    measure_distance,
    pullback_theta_density,
    triangular_reference,
    uniform_reference,
)
from .comparison import (
    RenewalStats,
    SandwichReport,
    Thresholds,
    coupled_sandwich_run,
    renewal_estimates,
    thresholds,
    toy_chain_matrix,
    toy_chain_residual,
    toy_chain_stationary,
)
from .cocycle import (
    F_eps,
    IntervalDecomposition,
    MeasureFormulaReport,
    f_eps,
    f_eps_prime,
    g_eps,
    h_fn,
    interval_decomposition,
    lyapunov_via_measure,
    plateau_value,
)

__all__ = [
    "BoundedDistribution", "CriticalFamily", "HypothesisConstants",
    "constant", "constants", "dirac_family", "discrete",
    "expected_log_kappa_sq", "generic_family", "hopping_family",
    "hopping_transfer", "ising_family", "ising_transfer", "log_ratio_uniform",
    "sample_matrix", "two_point", "uniform",
    "FiberPoint", "OrbitStats", "birkhoff_only", "delta_of", "run_orbit",
    "step_x", "step_znu", "theta_to_x", "x_to_theta", "x_to_znu", "znu_to_x",
    "EmpiricalMeasure", "LyapunovEstimate", "ids_estimate",
    "ising_free_energy", "lyapunov_asymptotic", "lyapunov_birkhoff",
    "lyapunov_fit", "measure_distance", "pullback_theta_density",
    "triangular_reference", "uniform_reference",
    "RenewalStats", "SandwichReport", "Thresholds", "coupled_sandwich_run",
    "renewal_estimates", "thresholds", "toy_chain_matrix",
    "toy_chain_residual", "toy_chain_stationary",
    "F_eps", "IntervalDecomposition", "MeasureFormulaReport", "f_eps",
    "f_eps_prime", "g_eps", "h_fn", "interval_decomposition",
    "lyapunov_via_measure", "plateau_value",
    "__version__",
]
