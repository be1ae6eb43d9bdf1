"""Strictly positive definite radial kernels and kernel matrix assembly."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class DuplicateNodesError(ValueError):
    """Raised when a node set contains coincident points."""


class KernelFamily(str, enum.Enum):
    MATERN_C0 = "matern-c0"
    MATERN_C2 = "matern-c2"
    GAUSSIAN = "gaussian"
    IMQ = "imq"


def _profile(family: KernelFamily, er: np.ndarray) -> np.ndarray:
    # er = eps * r, already validated as nonnegative
    if family is KernelFamily.MATERN_C0:
        return np.exp(-er)
    if family is KernelFamily.MATERN_C2:
        return np.exp(-er) * (1.0 + er)
    if family is KernelFamily.GAUSSIAN:
        return np.exp(-(er**2))
    if family is KernelFamily.IMQ:
        return 1.0 / np.sqrt(1.0 + er**2)
    raise ValueError(f"unsupported kernel family {family!r}")


@dataclass(frozen=True)
class RadialKernel:
    """Radial kernel ``phi(eps * r)`` normalized so that ``phi(0) = 1``.

    Parameters
    ----------
    family : KernelFamily or str
        One of ``matern-c0``, ``matern-c2``, ``gaussian``, ``imq``.
    eps : float
        Positive shape parameter.
    """

    family: KernelFamily = KernelFamily.MATERN_C0
    eps: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        eps = float(self.eps)
        if not np.isfinite(eps) or eps <= 0:
            raise ValueError(f"shape parameter must be positive, got {self.eps}")
        object.__setattr__(self, "eps", eps)

    def __call__(self, r):
        return phi(self, r)


def phi(kernel: RadialKernel, r):
    """Evaluate the radial profile at distance(s) ``r >= 0``.

    Scalars in, float out; arrays in, arrays out.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("distance must be nonnegative")
    out = _profile(kernel.family, kernel.eps * arr)
    if out.ndim == 0:
        return float(out)
    return out


def as_points(X) -> np.ndarray:
    """Coerce a node list to a float array of shape (n, d)."""
    pts = np.asarray(X, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2:
        raise ValueError(f"expected an (n, d) point array, got shape {pts.shape}")
    return pts


def cross_matrix(kernel: RadialKernel, X, Y) -> np.ndarray:
    """Kernel matrix ``K[i, j] = phi(||x_i - y_j||)`` of shape (n, m)."""
    X = as_points(X)
    Y = as_points(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("point sets must be nonempty")
    return _profile(kernel.family, kernel.eps * cdist(X, Y))


def gram_matrix(kernel: RadialKernel, X) -> np.ndarray:
    """Symmetric interpolation matrix on the nodes ``X``.

    Raises
    ------
    DuplicateNodesError
        If two nodes are at exactly zero distance.
    """
    X = as_points(X)
    if len(X) == 0:
        raise ValueError("node set must be nonempty")
    dist = cdist(X, X)
    off = dist[~np.eye(len(X), dtype=bool)]
    if np.any(off == 0.0):
        i, j = np.argwhere((dist == 0.0) & ~np.eye(len(X), dtype=bool))[0]
        raise DuplicateNodesError(f"nodes {i} and {j} coincide")
    return _profile(kernel.family, kernel.eps * dist)
