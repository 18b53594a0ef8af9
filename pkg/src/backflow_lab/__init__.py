"""backflow-lab: minimal non-Markovian relaxation models, time-local
generator extraction, divisibility tests, information-backflow measures and
their classical/intrinsic decomposition, and phase-diagram sweeps."""

from .errors import (
    BackflowLabError,
    ConfigError,
    ContractViolationError,
    GeneratorSingularityError,
    IntegrationDivergedError,
    NotPsdError,
)
from .generator_analysis import (
    CanonicalGkslForm,
    DivisibilityReport,
    SampledGenerator,
    assemble_gksl,
    check_classical_divisible,
    check_cp_divisible,
    extract_tcl_generator,
    gell_mann_basis,
    gksl_canonical_decompose,
)
from .information import (
    InfoSeries,
    backflow_functional,
    kl_divergence,
    relative_entropy,
    series_from_trajectory,
    trace_distance,
    von_neumann_entropy,
)
from .linalg import devectorize, hermitian_eig, psd_sqrt, vectorize
from .models import (
    MODEL_REGISTRY,
    ModelSpec,
    amplitude_damping_qubit,
    build_model,
    classical_exp_kernel,
    classical_fractional,
    dephasing_qubit,
    exp_kernel_difference_mode,
    exp_kernel_zero_crossing,
    fractional_two_state,
    markov_two_state,
)
from .netfd import (
    DecomposedBackflow,
    ThermoFieldState,
    TwoStateNetfdParams,
    coincident_rise_intervals,
    decompose_two_state,
    decomposed_backflow,
    extended_entropy,
    extended_reduced_density,
    thermofield_vector,
    two_state_entropy_series,
)
from .phase_diagram import SweepResult, SweepSpec, classify, revival_detector, run_sweep
from .propagation import (
    MemoryKernel,
    PropagatorFamily,
    TclGenerator,
    build_propagator,
    solve_tc,
    solve_tcl,
)
from .special_functions import MlParams, ml_envelope, ml_envelope_grid, mittag_leffler
from .states import (
    DensityMatrix,
    ProbabilityVector,
    RateMatrix,
    SuperoperatorSample,
    TimeGrid,
    Trajectory,
)

__version__ = "0.1.0"
