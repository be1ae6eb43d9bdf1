"""Reduced kernel interpolation models by fast knot removal."""

from .era import (
    DegenerateFoldError,
    fold_power_fast,
    fold_power_naive,
    fold_residual_fast,
    fold_residual_naive,
    hadamard_diag,
)
from .interpolation import (
    KernelModel,
    SampledData,
    SingularSystemError,
    evaluate,
    fit,
    gram_inverse,
    power_direct,
    rmse,
)
from .kernels import (
    DuplicateNodesError,
    KernelFamily,
    RadialKernel,
    cross_matrix,
    gram_matrix,
    phi,
)
from .reduction import (
    Criterion,
    Engine,
    FoldPlan,
    ReductionConfig,
    ReductionTrace,
    StopReason,
    default_tolerance,
    partition,
    run,
    score_folds,
    step,
)

__version__ = "0.1.0"
