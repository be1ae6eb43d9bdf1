"""Leave-fold-out residuals and power values, fast and naive.

The fast routines need only the inverse of the full Gram matrix: the
residual on a withheld fold ``p`` is ``(A^-1[p, p])^-1 c[p]`` and the power
vector is the row sum of ``((A^-1[p, p])^-1 A^-1[p, :]) * A[:, p].T``.
The naive routines refit on the complement and serve as oracles.
"""

from __future__ import annotations

import numpy as np

from .interpolation import (
    SampledData,
    _power_from_blocks,
    factorize,
    fit,
)
from .kernels import RadialKernel, as_points, cross_matrix, gram_matrix


class DegenerateFoldError(np.linalg.LinAlgError):
    """The block ``A^-1[p, p]`` of a fold is numerically singular."""

    def __init__(self, fold_id=None, msg=""):
        self.fold_id = fold_id
        where = "" if fold_id is None else f" (fold {fold_id})"
        super().__init__(f"degenerate fold block{where}{': ' + msg if msg else ''}")


def check_fold(p, n: int) -> np.ndarray:
    """Validate a fold index set against a node count and return it as ints."""
    p = np.asarray(p, dtype=int).reshape(-1)
    if len(p) < 1 or len(p) >= n:
        raise ValueError(f"fold size must be in [1, {n - 1}], got {len(p)}")
    if p.min() < 0 or p.max() >= n:
        raise ValueError(f"fold indices out of range [0, {n})")
    if len(np.unique(p)) != len(p):
        raise ValueError("fold indices repeat")
    return p


def complement(p, n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[p] = False
    return np.flatnonzero(mask)


def hadamard_diag(R, S) -> np.ndarray:
    """``diag(R @ S)`` as row sums of ``R * S.T``, without forming the product."""
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    if R.ndim != 2 or S.ndim != 2 or R.shape != S.T.shape:
        raise ValueError(f"shapes {R.shape} and {S.shape} are not conformable")
    return np.sum(R * S.T, axis=1)


def _block_solve(block, rhs, fold_id=None):
    try:
        out = np.linalg.solve(block, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFoldError(fold_id, str(exc)) from None
    if not np.all(np.isfinite(out)):
        raise DegenerateFoldError(fold_id, "non-finite solution")
    return out


def fold_residual_naive(kernel: RadialKernel, data: SampledData, p, gram=None):
    """Residual ``f[p] - S(x[p])`` of the interpolant trained on the complement.

    ``gram`` optionally supplies the full Gram matrix of ``data.nodes``;
    the training block is then sliced from it instead of reassembled.
    """
    n = len(data)
    p = check_fold(p, n)
    keep = complement(p, n)
    train_gram = None if gram is None else gram[np.ix_(keep, keep)]
    model = fit(kernel, data.subset(keep), gram=train_gram)
    if gram is None:
        cross = cross_matrix(kernel, data.nodes[p], data.nodes[keep])
    else:
        cross = gram[np.ix_(p, keep)]
    return data.values[p] - cross @ model.coefficients


def fold_residual_fast(A_inv, c, p, fold_id=None) -> np.ndarray:
    """Fold residual from the full inverse: solves ``A^-1[p, p] e = c[p]``.

    For a single index this is Rippa's ``c[p] / A^-1[p, p]``.
    """
    A_inv = np.asarray(A_inv)
    c = np.asarray(c)
    p = check_fold(p, len(c))
    if len(p) == 1:
        d = A_inv[p[0], p[0]]
        if d == 0 or not np.isfinite(d):
            raise DegenerateFoldError(fold_id, "zero diagonal entry")
        return c[p] / d
    return _block_solve(A_inv[np.ix_(p, p)], c[p], fold_id)


def fold_power_naive(kernel: RadialKernel, X, p, gram=None) -> np.ndarray:
    """Power function of the complement nodes evaluated at the fold nodes."""
    X = as_points(X)
    n = len(X)
    p = check_fold(p, n)
    keep = complement(p, n)
    if gram is None:
        gram = gram_matrix(kernel, X)
    factor, _ = factorize(gram[np.ix_(keep, keep)])
    return _power_from_blocks(factor, gram[np.ix_(keep, p)], kernel(0.0))


def fold_power_fast(A, A_inv, p, fold_id=None) -> np.ndarray:
    """Fold power vector from the full Gram matrix and its inverse."""
    A = np.asarray(A)
    A_inv = np.asarray(A_inv)
    p = check_fold(p, len(A))
    B = _block_solve(A_inv[np.ix_(p, p)], A_inv[p, :], fold_id)
    radicand = hadamard_diag(B, A[:, p])
    return np.sqrt(np.maximum(radicand, 0.0))


def _grouped(folds):
    # fold ids bucketed by fold size, so equal-size blocks solve in one batch
    groups = {}
    for j, p in enumerate(folds):
        groups.setdefault(len(p), []).append(j)
    for size, ids in groups.items():
        yield size, ids, np.array([folds[j] for j in ids], dtype=int)


def _batched_solve(blocks, rhs, ids):
    try:
        out = np.linalg.solve(blocks, rhs)
    except np.linalg.LinAlgError:
        # locate the offending fold
        for k, j in enumerate(ids):
            _block_solve(blocks[k], rhs[k], j)
        raise
    bad = ~np.all(np.isfinite(out.reshape(len(ids), -1)), axis=1)
    if bad.any():
        raise DegenerateFoldError(ids[int(np.argmax(bad))], "non-finite solution")
    return out


def fold_residuals_fast(A_inv, c, folds) -> list:
    """:func:`fold_residual_fast` over many folds, batched by fold size."""
    A_inv = np.asarray(A_inv)
    c = np.asarray(c)
    out = [None] * len(folds)
    for size, ids, P in _grouped(folds):
        if size == 1:
            for j in ids:
                out[j] = fold_residual_fast(A_inv, c, folds[j], fold_id=j)
            continue
        blocks = A_inv[P[:, :, None], P[:, None, :]]
        res = _batched_solve(blocks, c[P][:, :, None], ids)[:, :, 0]
        for k, j in enumerate(ids):
            out[j] = res[k]
    return out


def fold_powers_fast(A, A_inv, folds) -> list:
    """:func:`fold_power_fast` over many folds, batched by fold size."""
    A = np.asarray(A)
    A_inv = np.asarray(A_inv)
    out = [None] * len(folds)
    for size, ids, P in _grouped(folds):
        blocks = A_inv[P[:, :, None], P[:, None, :]]
        B = _batched_solve(blocks, A_inv[P], ids)  # (g, size, n)
        radicand = np.sum(B * A[:, P].transpose(1, 2, 0), axis=2)
        vals = np.sqrt(np.maximum(radicand, 0.0))
        for k, j in enumerate(ids):
            out[j] = vals[k]
    return out
