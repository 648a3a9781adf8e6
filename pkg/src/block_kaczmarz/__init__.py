"""Randomized block Kaczmarz least-squares solver with row pavings.

Solve min ||A x - b|| by iterated block projections: partition the rows into
a paving, draw a block each iteration, and project the iterate onto that
block's solution set.  The package provides the solvers, paving construction
and certification, the fast incoherence transform, matrix ensembles, a
flop-accounted experiment harness, and file/CLI front ends.
"""

from .ensembles import (
    BLOCK_CIRCULANT,
    COHERENT,
    SPHERE_ROWS,
    EnsembleSpec,
    gen_block_circulant,
    gen_coherent,
    gen_sphere_rows,
    make_ensemble,
)
from .experiments import (
    ALG_BLOCK_WOR,
    ALG_BLOCK_WR,
    ALG_SIMPLE,
    ComparisonResult,
    TrialAggregate,
    emit_csv,
    experiment_circulant,
    experiment_coherent,
    experiment_sphere,
    flop_model,
    parse_config,
    parse_csv,
    run_comparison,
)
from .flops import FlopCounter, fft_flops, field_factor
from .linops import (
    DenseMatrix,
    PartialCirculantStack,
    SpectralEstimates,
    adjoint_matvec,
    dft_apply,
    eig_bounds_hermitian,
    gram_block,
    matvec,
    row_submatrix,
    sigma_extremes,
)
from .paving import (
    CoherenceReport,
    FITOperator,
    PavingBounds,
    RowPaving,
    check_fit_hypothesis,
    check_random_paving_beta,
    coherence,
    compute_paving_bounds,
    fit_transform,
    partition_from_permutation,
    paving_size_for,
    random_partition,
    single_row_paving,
)
from .solver import (
    CYCLIC_WITHOUT_REPLACEMENT,
    DIRECT_GRAM,
    ITERATIVE_CG,
    UNIFORM_WITH_REPLACEMENT,
    ControlScheme,
    ControlState,
    InnerSolver,
    LeastSquaresProblem,
    SolveReport,
    SolverConfig,
    TraceRow,
    block_kaczmarz_step,
    default_inner_solver,
    per_iteration_identity_check,
    run_block_solver,
    run_simple_solver,
    select_block,
    simple_kaczmarz_step,
    theoretical_bound,
    tolerance_floor,
)

__version__ = "0.1.0"
