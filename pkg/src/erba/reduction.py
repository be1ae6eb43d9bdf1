"""Iterative knot removal driven by residual or power-function fold scores."""

from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import era
from .interpolation import KernelModel, SampledData, fit, gram_inverse
from .kernels import RadialKernel


class Criterion(str, enum.Enum):
    RESIDUAL = "residual"
    POWER = "power"


class Engine(str, enum.Enum):
    FAST = "fast"
    NAIVE = "naive"


class StopReason(str, enum.Enum):
    TOLERANCE_EXCEEDED = "tolerance-exceeded"
    MIN_NODES_REACHED = "min-nodes-reached"
    DEGENERATE_FOLD = "degenerate-fold"
    MAX_STEPS_REACHED = "max-steps-reached"


@dataclass(frozen=True)
class ReductionConfig:
    """Parameters of a knot-removal run.

    ``min_nodes`` defaults to ``2 * rho + 1``. ``max_steps`` caps the number
    of scored steps (used by timing sweeps); ``None`` means unbounded.
    ``workers > 1`` scores folds of the naive engine on a thread pool.
    """

    criterion: Criterion = Criterion.RESIDUAL
    engine: Engine = Engine.FAST
    rho: int = 3
    tau: float = 1e-3
    seed: int = 0
    min_nodes: int | None = None
    workers: int = 1
    max_steps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "criterion", Criterion(self.criterion))
        object.__setattr__(self, "engine", Engine(self.engine))
        if int(self.rho) < 1:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        object.__setattr__(self, "rho", int(self.rho))
        if not self.tau >= 0:
            raise ValueError(f"tau must be nonnegative, got {self.tau}")
        if self.min_nodes is None:
            object.__setattr__(self, "min_nodes", 2 * self.rho + 1)
        if self.min_nodes <= self.rho:
            raise ValueError("min_nodes must exceed rho")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be nonnegative")


@dataclass(frozen=True)
class FoldPlan:
    """Disjoint test sets covering ``range(n)``."""

    folds: tuple

    @property
    def ell(self) -> int:
        return len(self.folds)

    @property
    def sizes(self) -> tuple:
        return tuple(len(p) for p in self.folds)

    @property
    def n(self) -> int:
        return sum(self.sizes)


def partition(n_s: int, rho: int, rng: np.random.Generator) -> FoldPlan:
    """Shuffle ``range(n_s)`` and cut it into ``n_s // rho`` folds.

    The ``n_s % rho`` leftover indices are dealt round-robin from the first
    fold on, so fold sizes stay within ``rho .. 2 * rho - 1``.
    """
    if rho < 1 or n_s < rho:
        raise ValueError(f"cannot partition {n_s} nodes into folds of {rho}")
    perm = rng.permutation(n_s)
    ell = n_s // rho
    head, extra = perm[: ell * rho].reshape(ell, rho), perm[ell * rho :]
    folds = [np.concatenate([head[j], extra[j::ell]]) for j in range(ell)]
    return FoldPlan(tuple(folds))


def score_folds(
    model: KernelModel,
    plan: FoldPlan,
    criterion: Criterion,
    engine: Engine,
    workers: int = 1,
) -> np.ndarray:
    """Fold scores ``||v_j|| / sqrt(|fold j|)`` where ``v_j`` is the fold's
    leave-out residual or power vector.

    Raises
    ------
    DegenerateFoldError
        Fast engine only, when a block of the inverse is singular.
    """
    criterion = Criterion(criterion)
    engine = Engine(engine)
    folds = plan.folds
    if engine is Engine.FAST:
        A_inv = gram_inverse(model)
        if criterion is Criterion.RESIDUAL:
            vecs = era.fold_residuals_fast(A_inv, model.coefficients, folds)
        else:
            vecs = era.fold_powers_fast(model.system_matrix, A_inv, folds)
    else:
        if criterion is Criterion.RESIDUAL:
            def one(p):
                return era.fold_residual_naive(
                    model.kernel, model.data, p, gram=model.gram
                )
        else:
            def one(p):
                return era.fold_power_naive(
                    model.kernel, model.data.nodes, p, gram=model.gram
                )
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                vecs = list(pool.map(one, folds))
        else:
            vecs = [one(p) for p in folds]
    return np.array([np.linalg.norm(v) / np.sqrt(len(v)) for v in vecs])


@dataclass
class StepRecord:
    step: int
    n_s: int
    scores: tuple
    j_star: int
    score: float
    removed: tuple
    seconds: float
    regularization: float = 0.0

    @property
    def ell(self) -> int:
        return len(self.scores)


@dataclass
class ReductionState:
    """Current node set, as indices into the original data, plus its model."""

    kernel: RadialKernel
    original: SampledData
    indices: np.ndarray
    model: KernelModel

    @classmethod
    def start(cls, kernel: RadialKernel, data: SampledData) -> "ReductionState":
        return cls(kernel, data, np.arange(len(data)), fit(kernel, data))

    @property
    def n(self) -> int:
        return len(self.indices)


@dataclass
class Removed:
    j_star: int
    indices: np.ndarray  # into the original data
    record: StepRecord
    state: ReductionState


@dataclass
class Stopped:
    reason: StopReason
    record: StepRecord
    state: ReductionState


def step(state: ReductionState, config: ReductionConfig, rng, step_index: int = 0):
    """Run one partition / score / select / remove cycle.

    Returns :class:`Removed` with the refitted state, or :class:`Stopped`
    carrying the unchanged state.
    """
    if state.n < config.min_nodes:
        raise ValueError(f"{state.n} nodes is below min_nodes={config.min_nodes}")
    t0 = time.perf_counter()
    plan = partition(state.n, config.rho, rng)
    record = StepRecord(step_index, state.n, (), -1, float("nan"), (), 0.0,
                        state.model.regularization)
    try:
        scores = score_folds(
            state.model, plan, config.criterion, config.engine, config.workers
        )
    except era.DegenerateFoldError as exc:
        record.j_star = -1 if exc.fold_id is None else int(exc.fold_id)
        record.seconds = time.perf_counter() - t0
        return Stopped(StopReason.DEGENERATE_FOLD, record, state)
    record.scores = tuple(float(w) for w in scores)
    if not np.all(np.isfinite(scores)):
        record.j_star = int(np.flatnonzero(~np.isfinite(scores))[0])
        record.seconds = time.perf_counter() - t0
        return Stopped(StopReason.DEGENERATE_FOLD, record, state)
    j_star = int(np.argmin(scores))  # first minimum: lowest fold index wins ties
    record.j_star = j_star
    record.score = float(scores[j_star])
    if record.score > config.tau:
        record.seconds = time.perf_counter() - t0
        return Stopped(StopReason.TOLERANCE_EXCEEDED, record, state)
    keep = era.complement(plan.folds[j_star], state.n)
    removed = state.indices[np.sort(plan.folds[j_star])]
    indices = state.indices[keep]
    model = fit(state.kernel, state.original.subset(indices))
    record.removed = tuple(int(i) for i in removed)
    record.seconds = time.perf_counter() - t0
    new_state = ReductionState(state.kernel, state.original, indices, model)
    return Removed(j_star, removed, record, new_state)


@dataclass
class ReductionTrace:
    steps: list = field(default_factory=list)
    final_indices: np.ndarray = field(default_factory=lambda: np.arange(0))
    stop_reason: StopReason | None = None
    total_seconds: float = 0.0
    final_model: KernelModel | None = field(default=None, repr=False)

    @property
    def final_size(self) -> int:
        return len(self.final_indices)

    @property
    def regularizations(self) -> list:
        return sorted({s.regularization for s in self.steps if s.regularization})


def run(initial: SampledData, kernel: RadialKernel, config: ReductionConfig) -> ReductionTrace:
    """Remove folds until a score exceeds ``tau`` or the node floor is hit.

    Deterministic for a fixed ``config.seed``. The trace always ends with a
    record that removes nothing.
    """
    if len(initial) <= config.min_nodes:
        raise ValueError(
            f"need more than min_nodes={config.min_nodes} nodes, got {len(initial)}"
        )
    t0 = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    state = ReductionState.start(kernel, initial)
    trace = ReductionTrace()
    s = 0
    while True:
        if state.n < config.min_nodes or (
            config.max_steps is not None and s >= config.max_steps
        ):
            reason = (
                StopReason.MIN_NODES_REACHED
                if state.n < config.min_nodes
                else StopReason.MAX_STEPS_REACHED
            )
            trace.steps.append(
                StepRecord(s, state.n, (), -1, float("nan"), (), 0.0,
                           state.model.regularization)
            )
            break
        outcome = step(state, config, rng, s)
        trace.steps.append(outcome.record)
        state = outcome.state
        s += 1
        if isinstance(outcome, Stopped):
            reason = outcome.reason
            break
    trace.stop_reason = reason
    trace.final_indices = state.indices
    trace.final_model = state.model
    trace.total_seconds = time.perf_counter() - t0
    return trace


def default_tolerance(criterion, *, e_x=None, power_values=None, m_side=None) -> float:
    """Tolerance used by the reference experiments.

    Residual: ``2 * e_x``. Power: ``2 * ||power_values|| / m_side`` with
    ``m_side`` the side length of the evaluation grid.
    """
    criterion = Criterion(criterion)
    if criterion is Criterion.RESIDUAL:
        if e_x is None:
            raise ValueError("residual tolerance needs the full-set RMSE e_x")
        return 2.0 * float(e_x)
    if power_values is None or m_side is None:
        raise ValueError("power tolerance needs the power vector and grid side")
    return 2.0 * float(np.linalg.norm(power_values)) / float(m_side)
