"""Open quantum systems driven by repeated interactions with a chain of copies.

The package builds step unitaries for Markovian and memory-carrying
interaction models, propagates the global state exactly, reconstructs the
reduced dynamics with projection-operator methods (Nakajima-Zwanzig and
time-convolutionless), samples quantum trajectories under repeated indirect
measurement, and tests when those trajectories stay pure.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateObservable,
    DimensionError,
    IllConditionedKernel,
    MeasurementError,
    NotHermitianError,
    NotUnitaryError,
    QRepeatError,
    StateError,
    WindowError,
)
from .tensor import (
    ChainSpec,
    GlobalState,
    ReducedState,
    embed_site_operator,
    embed_system_operator,
    embed_system_state,
    kron,
    kron_all,
    partial_trace,
    partial_trace_chain,
    partial_trace_keep,
    spectral,
    trace_distance,
    unvec,
    vec,
)
from .models import (
    HamiltonianChainModel,
    MarkovBlockModel,
    StepUnitary,
    build_chain_hamiltonian,
    build_markov_unitary,
    extract_blocks,
    matrix_exponential_unitary,
    step_unitaries,
    step_unitary,
)
from .evolution import EvolutionRun, evolve_direct, reduced_sequence
from .projection import (
    KrausChannel,
    MemoryKernel,
    check_plqlp_zero,
    markov_kraus,
    nz_evolve,
    nz_evolve_history,
    project_P,
    project_Q,
    tcl_build_kernel,
    tcl_evolve,
    tcl_run,
)
from .measurement import (
    EnsembleSummary,
    Observable,
    TrajectoryRecord,
    cylinder_probability,
    ensemble_average,
    nonmark_reconstruct,
    nonmark_terms,
    nonselective_sequence,
    sample_ensemble,
    sample_trajectory,
    trajectory_step,
)
from .unravelling import (
    asymptotic_order_scan,
    build_special_model,
    check_dependence,
    compute_H_operators,
    markov_purity_check,
    special_observable,
    unravel_report,
)
from .config import RunConfig, parse_config
from .io import RunOutput, serialize_output
