"""Unbiased stochastic compression operators with exact variance/density reporting.

Every operator Q satisfies E[Q(x)] = x and E||Q(x) - x||^2 <= omega ||x||^2,
and reports its expected-density bound zeta (sup_x E||Q(x)||_0).  For RandK
omega = d/K - 1 is tight; for l2-quantization omega = sqrt(d) - 1 and
zeta = sqrt(d) are conservative analytic bounds (the exact per-input values
are x-dependent: E||Q(x) - x||^2 = ||x||_2 ||x||_1 - ||x||_2^2 and
E||Q(x)||_0 = ||x||_1 / ||x||_2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from marina_sim.numcore import SparseVector, UsageError
from marina_sim.rng import RngStream


class CapabilityError(RuntimeError):
    """Requested exact enumeration is intractably large."""


_ENUM_LIMIT = 10_000


@dataclass(frozen=True)
class Compressor:
    kind: str          # identity | rand_k | l2_quant
    d: int
    k: int = 0         # rand_k only
    omega: float = 0.0
    zeta: float = 0.0


def make_compressor(kind: str, d: int, k: int | None = None) -> Compressor:
    """Build a compressor for dimension d.  kind in {identity, rand_k, l2_quant}."""
    if kind == "identity":
        return Compressor(kind="identity", d=d, omega=0.0, zeta=float(d))
    if kind == "rand_k":
        if k is None or not (1 <= k <= d):
            raise UsageError(f"rand_k requires 1 <= k <= d, got k={k}, d={d}")
        return Compressor(kind="rand_k", d=d, k=int(k), omega=d / k - 1.0, zeta=float(k))
    if kind == "l2_quant":
        return Compressor(kind="l2_quant", d=d, omega=math.sqrt(d) - 1.0, zeta=math.sqrt(d))
    raise UsageError(f"unknown compressor kind {kind!r}")


def _rand_k_subset(d: int, k: int, rng: RngStream) -> np.ndarray:
    """Uniform k-subset of {0..d-1} via partial Fisher-Yates, returned sorted."""
    pool = np.arange(d, dtype=np.int64)
    for j in range(k):
        swap = j + int(rng.integers(d - j))
        pool[j], pool[swap] = pool[swap], pool[j]
    sel = pool[:k]
    sel.sort()
    return sel


def compress(c: Compressor, x: np.ndarray, rng: RngStream) -> SparseVector:
    """One random application of the operator; deterministic given the stream state."""
    x = np.asarray(x, dtype=np.float64)
    d = c.d
    if x.shape != (d,):
        raise UsageError(f"dimension mismatch: {x.shape} vs ({d},)")
    if c.kind == "identity":
        return SparseVector(np.arange(d, dtype=np.int64), x.copy(), d)
    if c.kind == "rand_k":
        if c.k == d:
            return SparseVector(np.arange(d, dtype=np.int64), x.copy(), d)
        sel = _rand_k_subset(d, c.k, rng)
        return SparseVector(sel, (d / c.k) * x[sel], d)
    # l2_quant: Q(x)_i = ||x|| sign(x_i) Bern(|x_i|/||x||), coordinates independent
    norm = math.sqrt(float(np.dot(x, x)))
    if norm == 0.0:
        return SparseVector(np.empty(0, dtype=np.int64), np.empty(0), d)
    probs = np.abs(x) / norm
    keep = rng.uniform(d) < probs
    sel = np.nonzero(keep)[0].astype(np.int64)
    return SparseVector(sel, norm * np.sign(x[sel]), d)


def enumerate_outcomes(c: Compressor, x: np.ndarray) -> list[tuple[float, SparseVector]]:
    """Exact outcome distribution of Q(x) as (probability, outcome) pairs.

    Oracle for property tests: probabilities sum to 1, the probability-weighted
    mean equals x, and the weighted squared error matches the analytic variance.
    """
    x = np.asarray(x, dtype=np.float64)
    d = c.d
    if x.shape != (d,):
        raise UsageError(f"dimension mismatch: {x.shape} vs ({d},)")
    if c.kind == "identity":
        return [(1.0, SparseVector(np.arange(d, dtype=np.int64), x.copy(), d))]
    if c.kind == "rand_k":
        count = math.comb(d, c.k)
        if count > _ENUM_LIMIT:
            raise CapabilityError(f"C({d},{c.k}) = {count} outcomes exceeds limit {_ENUM_LIMIT}")
        prob = 1.0 / count
        out = []
        for sel in combinations(range(d), c.k):
            idx = np.asarray(sel, dtype=np.int64)
            out.append((prob, SparseVector(idx, (d / c.k) * x[idx], d)))
        return out
    # l2_quant: enumerate Bernoulli outcomes over the support of x
    norm = math.sqrt(float(np.dot(x, x)))
    if norm == 0.0:
        return [(1.0, SparseVector(np.empty(0, dtype=np.int64), np.empty(0), d))]
    support = np.nonzero(x)[0]
    if 2 ** support.size > _ENUM_LIMIT:
        raise CapabilityError(f"2^{support.size} outcomes exceeds limit {_ENUM_LIMIT}")
    probs = np.abs(x[support]) / norm
    out = []
    for bits in product((0, 1), repeat=support.size):
        keep = np.asarray(bits, dtype=bool)
        p = float(np.prod(np.where(keep, probs, 1.0 - probs)))
        idx = support[keep].astype(np.int64)
        out.append((p, SparseVector(idx, norm * np.sign(x[idx]), d)))
    return out
