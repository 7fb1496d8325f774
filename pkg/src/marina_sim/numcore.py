"""Dense/sparse vector kernels and a finite-difference gradient checker.

Dense vectors are plain 1-D float64 numpy arrays.  Sparse vectors carry an
explicit dimension and sorted index/value pairs; the stored entry count is
what communication accounting charges, so explicit zeros emitted by a
compressor (e.g. a RandK-selected coordinate whose input value was zero)
stay in the support.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class UsageError(ValueError):
    """Caller violated a precondition (bad dimension, bad parameter)."""


class EvaluationError(RuntimeError):
    """Objective evaluation produced a non-finite value."""


@dataclass(frozen=True)
class SparseVector:
    """Index/value pairs of a d-dimensional vector, indices strictly increasing."""

    indices: np.ndarray  # int64, sorted ascending, all < dim
    values: np.ndarray   # float64, same length as indices
    dim: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        if idx.shape != val.shape or idx.ndim != 1:
            raise UsageError("indices and values must be 1-D arrays of equal length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0 or idx[-1] >= self.dim):
            raise UsageError("indices must be strictly increasing and in [0, dim)")
        if not np.all(np.isfinite(val)):
            raise UsageError("sparse values must be finite")

    @property
    def nnz(self) -> int:
        """Support size used for float accounting (explicit zeros included)."""
        return int(self.indices.size)


def sq_norm(v) -> float:
    """Squared Euclidean norm of a dense or sparse vector."""
    if isinstance(v, SparseVector):
        return float(np.dot(v.values, v.values))
    v = np.asarray(v, dtype=np.float64)
    return float(np.dot(v, v))


def dot(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a, b))


def scaled_add(a: np.ndarray, alpha: float, b: np.ndarray) -> np.ndarray:
    """a + alpha * b for dense vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise UsageError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a + alpha * b


def scatter_add(dense: np.ndarray, sparse: SparseVector, alpha: float = 1.0) -> np.ndarray:
    """In-place dense += alpha * sparse, touching only listed indices."""
    if dense.shape != (sparse.dim,):
        raise UsageError(f"dimension mismatch: {dense.shape} vs ({sparse.dim},)")
    if alpha == 1.0:
        dense[sparse.indices] += sparse.values
    else:
        dense[sparse.indices] += alpha * sparse.values
    return dense


def densify(v: SparseVector) -> np.ndarray:
    out = np.zeros(v.dim, dtype=np.float64)
    out[v.indices] = v.values
    return out


def sparsify(v: np.ndarray) -> SparseVector:
    """Full-support sparse view of a dense vector (round-trips exactly)."""
    v = np.asarray(v, dtype=np.float64)
    return SparseVector(np.arange(v.size, dtype=np.int64), v.copy(), v.size)


def grad_check(f, grad, x: np.ndarray, h: float = 1e-5) -> float:
    """Max relative error between central differences and the supplied gradient.

    Returns max_i |fd_i - grad_i| / max(1, |grad_i|).
    """
    if h <= 0:
        raise UsageError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(grad(x), dtype=np.float64)
    worst = 0.0
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"non-finite objective value at coordinate {i}")
        fd = (fp - fm) / (2.0 * h)
        err = abs(fd - g[i]) / max(1.0, abs(g[i]))
        worst = max(worst, err)
    return worst
