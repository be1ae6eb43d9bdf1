"""Kernel interpolants, the power function and the explicit Gram inverse."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .kernels import RadialKernel, as_points, cross_matrix, gram_matrix

# Diagonal shifts tried, in order, when the plain Cholesky factorization fails.
DELTA_LADDER = (1e-12, 1e-10, 1e-8)


class SingularSystemError(np.linalg.LinAlgError):
    """The Gram matrix could not be factorized at any regularization level."""

    def __init__(self, n, ladder=DELTA_LADDER):
        self.ladder = tuple(ladder)
        super().__init__(
            f"Cholesky factorization of the {n}x{n} Gram matrix failed "
            f"without regularization and with delta in {list(self.ladder)}"
        )


@dataclass(frozen=True)
class SampledData:
    """Nodes in R^d with the function values sampled there."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = as_points(self.nodes)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if len(values) != len(nodes):
            raise ValueError(
                f"{len(nodes)} nodes but {len(values)} values"
            )
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.nodes)

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def subset(self, idx) -> "SampledData":
        idx = np.asarray(idx, dtype=int)
        return SampledData(self.nodes[idx], self.values[idx])


def factorize(gram: np.ndarray):
    """Cholesky-factorize ``gram``, falling back on the delta ladder.

    Returns
    -------
    factor : tuple
        Output of :func:`scipy.linalg.cho_factor` (upper triangle).
    delta : float
        Diagonal shift actually applied (0.0 if none was needed).
    """
    n = gram.shape[0]
    for delta in (0.0, *DELTA_LADDER):
        mat = gram if delta == 0.0 else gram + delta * np.eye(n)
        try:
            return sla.cho_factor(mat, lower=False, check_finite=False), delta
        except np.linalg.LinAlgError:
            continue
    raise SingularSystemError(n)


@dataclass(eq=False)
class KernelModel:
    """A fitted interpolant ``S(x) = sum_i c_i phi(||x - x_i||)``.

    ``gram_inverse`` is filled lazily by :func:`gram_inverse`, together with
    ``inverse_bound``, an a priori estimate of ``max|A A^-1 - I|``.
    """

    kernel: RadialKernel
    data: SampledData
    gram: np.ndarray
    factor: tuple
    coefficients: np.ndarray
    regularization: float = 0.0
    inverse: np.ndarray | None = field(default=None, repr=False)
    inverse_bound: float | None = None

    @property
    def n(self) -> int:
        return len(self.data)

    @property
    def system_matrix(self) -> np.ndarray:
        """The matrix actually factorized, ``A + delta I``."""
        if self.regularization == 0.0:
            return self.gram
        return self.gram + self.regularization * np.eye(self.n)


def fit(kernel: RadialKernel, data: SampledData, gram=None) -> KernelModel:
    """Solve ``A c = f`` for the interpolation coefficients.

    Parameters
    ----------
    kernel : RadialKernel
    data : SampledData
    gram : ndarray, optional
        Precomputed Gram matrix of ``data.nodes``; assembled if omitted.
    """
    if gram is None:
        gram = gram_matrix(kernel, data.nodes)
    factor, delta = factorize(gram)
    coef = sla.cho_solve(factor, data.values, check_finite=False)
    return KernelModel(kernel, data, gram, factor, coef, delta)


def evaluate(model: KernelModel, points) -> np.ndarray:
    points = as_points(points)
    if points.shape[1] != model.data.dim:
        raise ValueError(
            f"points have dimension {points.shape[1]}, model has {model.data.dim}"
        )
    return cross_matrix(model.kernel, points, model.data.nodes) @ model.coefficients


def gram_inverse(model: KernelModel) -> np.ndarray:
    """Explicit inverse of the (regularized) Gram matrix, cached on the model.

    Computed from the stored Cholesky factor, so the result is exactly
    symmetric.
    """
    if model.inverse is not None:
        return model.inverse
    chol, lower = model.factor
    inv, info = lapack.dpotri(chol, lower=lower)
    if info != 0:
        raise SingularSystemError(model.n)
    # dpotri fills one triangle only
    if lower:
        inv = np.tril(inv) + np.tril(inv, -1).T
    else:
        inv = np.triu(inv) + np.triu(inv, 1).T
    anorm = np.abs(model.system_matrix).sum(axis=0).max()
    rcond, _ = lapack.dpocon(chol, anorm, uplo="L" if lower else "U")
    model.inverse = inv
    model.inverse_bound = (
        model.n * np.finfo(float).eps / rcond if rcond > 0 else np.inf
    )
    return inv


def _power_from_blocks(factor, cross: np.ndarray, phi0: float) -> np.ndarray:
    # cross: (n, m) kernel values between the n nodes and m points
    chol, lower = factor
    half = sla.solve_triangular(
        chol, cross, lower=lower, trans="N" if lower else "T", check_finite=False
    )
    radicand = phi0 - np.einsum("ij,ij->j", half, half)
    return np.sqrt(np.maximum(radicand, 0.0))


def power_direct(kernel: RadialKernel, X, points) -> np.ndarray:
    """Power function of the node set ``X`` evaluated at ``points``.

    ``P(x) = sqrt(phi(0) - k(x)^T A^-1 k(x))``, with negative radicands
    from rounding clamped to zero.
    """
    X = as_points(X)
    gram = gram_matrix(kernel, X)
    factor, _ = factorize(gram)
    return _power_from_blocks(factor, cross_matrix(kernel, X, points), kernel(0.0))


def rmse(predicted, truth) -> float:
    predicted = np.asarray(predicted, dtype=float).reshape(-1)
    truth = np.asarray(truth, dtype=float).reshape(-1)
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {len(predicted)} vs {len(truth)}")
    if len(truth) == 0:
        raise ValueError("rmse of empty vectors")
    return float(np.sqrt(np.mean((predicted - truth) ** 2)))
