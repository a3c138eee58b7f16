"""Accelerated orthogonal least-squares (AOLS) for sparse recovery.

Modules: ``linalg`` (generators, least squares), ``solvers`` (OLS, AOLS, OMP,
exhaustive search), ``bounds`` (recovery-probability lower bounds),
``harness`` (Monte-Carlo experiments), ``spectral`` and ``ssc`` (subspace
clustering), ``cli`` (command line).
"""

from .exceptions import (
    DegenerateDictionaryError,
    InstanceTooLargeError,
    RecoveryError,
    SingularSystemError,
    UnreachableTargetError,
)
from .linalg import (
    Dictionary,
    NoiseSpec,
    SparseSignal,
    gaussian_dictionary,
    hybrid_dictionary,
    least_squares,
    make_noise,
    make_signal,
)
from .solvers import (
    RecoveryResult,
    SolverConfig,
    aols_solve,
    brute_force_best_subset,
    ols_solve,
    omp_solve,
    solve,
)

__version__ = "0.1.0"
