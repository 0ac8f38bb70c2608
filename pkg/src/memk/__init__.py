"""Memory kernels under dephasing for observables that obey the eigenstate thermalization hypothesis."""

from .closed_dynamics import CollapseReport, autocorrelation, check_condition2, expectation_closed, expectation_probes
from .errors import MemkError
from .grid import DiagonalState, Signal, TimeGrid
from .kernel import (
    DecoherenceFilter,
    KernelModel,
    MemoryKernel,
    check_laplace_shift,
    damp_kernel,
    extract_kernel,
    laplace_of_signal,
    mori_initial_value,
    predict_integral,
    predict_scheme,
    solve_volterra,
    zeno_approximation,
)
from .open_dynamics import LindbladConfig, Stepper, lindblad_rhs, oracle_decohered, propagate_lindblad, step_discrete_map
from .spectral_model import (
    EthEnsemble,
    EthEnsembleConfig,
    EthObservable,
    ReferenceFunction,
    ReferenceKind,
    Spectrum,
    build_observable,
    sample_spectrum,
    select_initial_levels,
    two_level_benchmark,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
