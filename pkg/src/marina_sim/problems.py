"""Objectives with gradient oracles, smoothness/variance constants, and data ingestion.

Two concrete problem families are shipped:

* quadratic problems with eigenvalues pinned to a [mu, L] band (exact
  minimizer, exact PL constant), used as the linear-convergence test vehicle;
* binary classification with the bounded non-convex "squashed sigmoid" loss
  l(b, c) = (1 - 1/(1 + exp(-b c)))^2 over LibSVM-format or synthetic data,
  sharded contiguously across workers.

Any finite-sum problem also exposes a row-sampling stochastic oracle; the
additive-noise wrapper turns any problem into an online one with a known
variance constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from marina_sim.numcore import SparseVector, UsageError
from marina_sim.rng import RngStream


class ParseError(ValueError):
    """Malformed LibSVM input; message carries the 1-based line number."""


@dataclass
class Dataset:
    rows: list  # (SparseVector features, label in {-1, +1})
    N: int
    d: int


# ---------------------------------------------------------------------------
# loss kernel


def _one_minus_sigmoid(t: np.ndarray) -> np.ndarray:
    """1 - sigmoid(t), overflow-safe for any t."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    e = np.exp(-t[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(t[~pos]))
    return out


def _loss_from_t(t: np.ndarray) -> np.ndarray:
    u = _one_minus_sigmoid(t)
    return u * u


def _dloss_from_t(t: np.ndarray) -> np.ndarray:
    """d/dt of (1 - sigmoid(t))^2 = -2 sigmoid(t) (1 - sigmoid(t))^2."""
    u = _one_minus_sigmoid(t)
    return -2.0 * (1.0 - u) * u * u


def logsq_loss(margin: float, label: int) -> float:
    """Loss value l(margin, label); value lies in (0, 1)."""
    if label not in (-1, 1):
        raise UsageError(f"label must be -1 or +1, got {label}")
    return float(_loss_from_t(np.float64(margin * label)))


def logsq_loss_deriv(margin: float, label: int) -> float:
    """Derivative of the loss in the margin."""
    if label not in (-1, 1):
        raise UsageError(f"label must be -1 or +1, got {label}")
    return float(label * _dloss_from_t(np.float64(margin * label)))


@lru_cache(maxsize=1)
def loss_curvature_bound() -> float:
    """Global bound max_t |l''(t)|, by grid search over t in [-50, 50] at 1e-4 steps.

    Rounded to 6 significant digits; multiplied by the largest row norm it
    bounds per-worker smoothness for the classification objective.
    """
    t = np.arange(-50.0, 50.0 + 1e-4, 1e-4)
    u = _one_minus_sigmoid(t)
    s = 1.0 - u
    second = -2.0 * s * u * u * (1.0 - 3.0 * s)
    c = float(np.max(np.abs(second)))
    return float(f"{c:.6g}")


@lru_cache(maxsize=1)
def loss_slope_bound() -> float:
    """Global bound max_t |l'(t)| by the same grid search (6 significant digits)."""
    t = np.arange(-50.0, 50.0 + 1e-4, 1e-4)
    c = float(np.max(np.abs(_dloss_from_t(t))))
    return float(f"{c:.6g}")


# ---------------------------------------------------------------------------
# problems


class Problem:
    """Worker-indexed objective with full / component / stochastic gradient oracles.

    Attributes: n, m, d, mode ('finite_sum' or 'online'), per-worker smoothness
    L_i, average-smoothness calL_i, variance sigma_i (online), PL constant mu
    (None when unknown), uniform lower bound f_star.
    """

    n: int
    m: int
    d: int
    mode: str
    L_i: np.ndarray
    calL_i: np.ndarray
    sigma_i: np.ndarray | None = None
    mu: float | None = None
    f_star: float = 0.0

    @property
    def L(self) -> float:
        return aggregate_smoothness(self.L_i)

    @property
    def calL(self) -> float:
        return aggregate_smoothness(self.calL_i)

    @property
    def sigma_sq(self) -> float:
        if self.sigma_i is None:
            raise UsageError("problem has no variance bound")
        return float(np.mean(self.sigma_i**2))

    def f(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def grads_all(self, x: np.ndarray) -> np.ndarray:
        """All worker gradients as an (n, d) array."""
        raise NotImplementedError

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.grads_all(x).mean(axis=0)

    def grad_i(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def component_grad(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def minibatch_delta(self, i: int, idx: np.ndarray, x_new: np.ndarray, x_old: np.ndarray) -> np.ndarray:
        """Average of component gradient differences over the index multiset idx."""
        acc = np.zeros(self.d)
        for j in idx:
            acc += self.component_grad(i, int(j), x_new) - self.component_grad(i, int(j), x_old)
        return acc / len(idx)

    # --- stochastic oracle (row sampling for finite sums; wrappers override) ---

    def draw_sample(self, i: int, rng: RngStream):
        if self.mode != "finite_sum":
            raise UsageError("no stochastic oracle available")
        return int(rng.integers(self.m))

    def stoch_grad(self, i: int, sample, x: np.ndarray) -> np.ndarray:
        return self.component_grad(i, sample, x)


def aggregate_smoothness(per_worker: np.ndarray) -> float:
    """Root-mean-square aggregation: L = sqrt((1/n) sum L_i^2)."""
    per_worker = np.asarray(per_worker, dtype=np.float64)
    return float(np.sqrt(np.mean(per_worker**2)))


def smoothness_constants(problem: Problem):
    """(L_i list, L, calL_i list, calL) for a built problem."""
    return problem.L_i, problem.L, problem.calL_i, problem.calL


class QuadraticProblem(Problem):
    """f_i(x) = 1/2 x^T A_i x - b_i^T x with symmetric A_i; exact minimizer and constants."""

    mode = "finite_sum"

    def __init__(self, A: np.ndarray, b: np.ndarray):
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        self.n, self.d = b.shape
        self.m = 1
        self.A = A
        self.b = b
        self.A_bar = A.mean(axis=0)
        self.b_bar = b.mean(axis=0)
        eig_bar = np.linalg.eigvalsh(self.A_bar)
        if eig_bar[0] <= 0:
            raise UsageError("average Hessian must be positive definite")
        self.mu = float(eig_bar[0])
        self.x_star = np.linalg.solve(self.A_bar, self.b_bar)
        self.f_star = float(0.5 * self.x_star @ (self.A_bar @ self.x_star) - self.b_bar @ self.x_star)
        self.L_i = np.array([np.linalg.eigvalsh(A[i])[-1] for i in range(self.n)])
        self.calL_i = self.L_i.copy()  # m = 1: the only component is f_i itself

    def f(self, x):
        return float(0.5 * x @ (self.A_bar @ x) - self.b_bar @ x)

    def grads_all(self, x):
        return np.einsum("nij,j->ni", self.A, x) - self.b

    def grad(self, x):
        return self.grads_all(x).mean(axis=0)

    def grad_i(self, i, x):
        return self.A[i] @ x - self.b[i]

    def component_grad(self, i, j, x):
        return self.grad_i(i, x)


def quadratic_pl_problem(mu: float, L: float, d: int, n: int, rng: RngStream) -> QuadraticProblem:
    """Random quadratic with per-worker eigenvalues spanning [mu, L].

    mu == L yields exactly isotropic A_i = L I.  The returned problem stores
    the exact PL constant of the averaged objective (lambda_min of the mean
    Hessian, always >= mu).
    """
    if not (0 < mu <= L):
        raise UsageError(f"need 0 < mu <= L, got mu={mu}, L={L}")
    A = np.empty((n, d, d))
    b = np.empty((n, d))
    for i in range(n):
        if mu == L:
            A[i] = L * np.eye(d)
        else:
            eigs = np.linspace(mu, L, d)
            q, _ = np.linalg.qr(rng.normal((d, d)))
            A[i] = (q * eigs) @ q.T
            A[i] = 0.5 * (A[i] + A[i].T)
        b[i] = rng.normal(d)
    return QuadraticProblem(A, b)


class ClassificationProblem(Problem):
    """Non-convex binary classification over contiguously sharded rows."""

    mode = "finite_sum"

    def __init__(self, features: np.ndarray, labels: np.ndarray):
        # features: (n, m, d), labels: (n, m) in {-1, +1}
        self.X = np.asarray(features, dtype=np.float64)
        self.y = np.asarray(labels, dtype=np.float64)
        self.n, self.m, self.d = self.X.shape
        row_sq = np.einsum("nmd,nmd->nm", self.X, self.X)
        c2 = loss_curvature_bound()
        self.L_i = c2 * row_sq.max(axis=1)
        self.calL_i = self.L_i.copy()  # max-row bound for i.i.d. minibatch sampling
        c1 = loss_slope_bound()
        self.sigma_i = 2.0 * c1 * np.sqrt(row_sq.max(axis=1))  # row-sampling oracle bound
        self.mu = None
        self.f_star = 0.0  # loss is nonnegative; true infimum unknown

    def _margins(self, x):
        return np.einsum("nmd,d->nm", self.X, x) * self.y

    def f(self, x):
        return float(_loss_from_t(self._margins(x)).mean())

    def grads_all(self, x):
        w = _dloss_from_t(self._margins(x)) * self.y
        return np.einsum("nm,nmd->nd", w, self.X) / self.m

    def grad(self, x):
        return self.grads_all(x).mean(axis=0)

    def f_i(self, i, x):
        t = (self.X[i] @ x) * self.y[i]
        return float(_loss_from_t(t).mean())

    def grad_i(self, i, x):
        t = (self.X[i] @ x) * self.y[i]
        w = _dloss_from_t(t) * self.y[i]
        return (self.X[i].T @ w) / self.m

    def component_grad(self, i, j, x):
        t = float(self.X[i, j] @ x) * self.y[i, j]
        return float(_dloss_from_t(np.float64(t))) * self.y[i, j] * self.X[i, j]

    def minibatch_delta(self, i, idx, x_new, x_old):
        idx = np.asarray(idx, dtype=np.int64)
        rows = self.X[i, idx]
        lab = self.y[i, idx]
        w_new = _dloss_from_t((rows @ x_new) * lab) * lab
        w_old = _dloss_from_t((rows @ x_old) * lab) * lab
        return rows.T @ (w_new - w_old) / idx.size


class AdditiveNoiseProblem(Problem):
    """Online wrapper: stochastic gradient = exact worker gradient + fixed-sample noise.

    A "sample" is the noise vector itself, so evaluating the same sample at two
    points cancels the noise exactly and the average-smoothness constant of the
    minibatch difference is 0.  Per-coordinate noise std is sigma_total/sqrt(d),
    making E||noise||^2 = sigma_total^2 the reported variance bound.
    """

    mode = "online"

    def __init__(self, base: Problem, sigma_total: float):
        self.base = base
        self.n, self.m, self.d = base.n, base.m, base.d
        self.L_i = base.L_i.copy()
        self.calL_i = np.zeros(base.n)
        self.sigma_i = np.full(base.n, float(sigma_total))
        self.noise_std = float(sigma_total) / math.sqrt(base.d)
        self.mu = base.mu
        self.f_star = base.f_star

    def f(self, x):
        return self.base.f(x)

    def grads_all(self, x):
        return self.base.grads_all(x)

    def grad(self, x):
        return self.base.grad(x)

    def grad_i(self, i, x):
        return self.base.grad_i(i, x)

    def component_grad(self, i, j, x):
        return self.base.component_grad(i, j, x)

    def draw_sample(self, i, rng):
        return self.noise_std * rng.normal(self.d)

    def stoch_grad(self, i, sample, x):
        return self.base.grad_i(i, x) + sample


def with_additive_noise(base: Problem, sigma_total: float) -> AdditiveNoiseProblem:
    return AdditiveNoiseProblem(base, sigma_total)


# ---------------------------------------------------------------------------
# data ingestion


def parse_libsvm(lines, n_features: int | None = None) -> Dataset:
    """Parse LibSVM text (1-based feature indices) into a Dataset.

    `lines` is any iterable of strings.  Labels {+1, 1} map to +1 and {-1, 0}
    to -1.  Malformed tokens raise ParseError with the 1-based line number.
    """
    rows = []
    max_idx = -1
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            raw_label = float(tokens[0])
        except ValueError:
            raise ParseError(f"line {lineno}: invalid label {tokens[0]!r}") from None
        if raw_label in (1.0,):
            label = 1
        elif raw_label in (-1.0, 0.0):
            label = -1
        else:
            raise ParseError(f"line {lineno}: unsupported label value {tokens[0]!r}")
        indices, values = [], []
        prev = -1
        for tok in tokens[1:]:
            try:
                idx_str, val_str = tok.split(":")
                idx = int(idx_str) - 1
                val = float(val_str)
            except ValueError:
                raise ParseError(f"line {lineno}: malformed feature token {tok!r}") from None
            if idx <= prev:
                raise ParseError(f"line {lineno}: non-increasing feature index {idx + 1}")
            if idx < 0:
                raise ParseError(f"line {lineno}: feature index must be >= 1")
            prev = idx
            indices.append(idx)
            values.append(val)
        if indices:
            max_idx = max(max_idx, indices[-1])
        rows.append((indices, values, label))
    d = n_features if n_features is not None else max_idx + 1
    if n_features is not None and max_idx >= n_features:
        raise ParseError(f"feature index {max_idx + 1} exceeds declared dimension {n_features}")
    out = []
    for indices, values, label in rows:
        sv = SparseVector(np.asarray(indices, dtype=np.int64), np.asarray(values), max(d, 0))
        out.append((sv, label))
    return Dataset(rows=out, N=len(out), d=max(d, 0))


def build_classification_problem(data: Dataset, n: int) -> ClassificationProblem:
    """Shard rows contiguously into n workers of m = floor(N/n) rows, dropping the rest."""
    if n < 1 or data.N < n:
        raise UsageError(f"need N >= n >= 1, got N={data.N}, n={n}")
    m = data.N // n
    X = np.zeros((n, m, data.d))
    y = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            sv, label = data.rows[i * m + j]
            X[i, j, sv.indices] = sv.values
            y[i, j] = label
    return ClassificationProblem(X, y)


def make_synthetic_classification(
    N: int,
    d: int,
    rng: RngStream,
    flip_prob: float = 0.1,
    scale: float = 1.0,
) -> Dataset:
    """Gaussian features, random-hyperplane labels with flip noise."""
    features = scale * rng.normal((N, d))
    w = rng.normal(d)
    labels = np.where(features @ w >= 0.0, 1, -1)
    flips = rng.uniform(N) < flip_prob
    labels = np.where(flips, -labels, labels)
    rows = []
    idx = np.arange(d, dtype=np.int64)
    for t in range(N):
        rows.append((SparseVector(idx, features[t].copy(), d), int(labels[t])))
    return Dataset(rows=rows, N=N, d=d)
