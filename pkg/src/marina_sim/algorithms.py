"""Server/worker simulations of the compressed-gradient optimization engines.

Five engines share one bulk-synchronous skeleton: sample the coin, take the
step x <- x - gamma g, rebuild the gradient estimate g from worker payloads,
record diagnostics and exact float/oracle counters.  Workers own private
random streams; aggregation reduces in a fixed order, so every trace is
bit-reproducible from (problem, config).

The identity compressor is lossless, so the estimator of the full-gradient
engines equals the exact gradient in both coin branches; the engine computes
it directly through the same reduction as plain gradient descent, which makes
the documented GD-equivalence hold bitwise (communication is still charged at
the identity payload's full support).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from marina_sim.compressors import Compressor, compress
from marina_sim.numcore import UsageError, scatter_add
from marina_sim.problems import Problem
from marina_sim.rng import RngStream, stream
from marina_sim.theory import lyapunov

ALGORITHMS = ("gd", "marina", "vr_marina_fs", "vr_marina_online", "pp_marina")

_DIVERGE_NORM = 1e12


class DivergedError(RuntimeError):
    """Iterate blew up; carries the partial trace up to the last finite record."""

    def __init__(self, message: str, trace: "Trace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class RunConfig:
    algorithm: str
    gamma: float
    K: int
    seed: int
    compressor: Compressor | None = None
    x0: np.ndarray | None = None
    p: float = 1.0
    b: int = 1
    b_prime: int = 1
    r: int = 1
    bits_per_float: int = 64
    record_lyapunov: bool = True
    record_minibatch_indices: bool = False

    def validate(self, problem: Problem) -> None:
        if self.algorithm not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {self.algorithm!r}")
        if self.gamma < 0:
            raise UsageError("gamma must be nonnegative")
        if not (0 < self.p <= 1):
            raise UsageError(f"p must lie in (0, 1], got {self.p}")
        if self.K < 1:
            raise UsageError("K must be >= 1")
        if self.algorithm == "vr_marina_fs" and self.b_prime > problem.m:
            raise UsageError(f"b_prime={self.b_prime} exceeds local dataset size m={problem.m}")
        if self.algorithm == "vr_marina_online":
            if self.b_prime > self.b:
                raise UsageError(f"b_prime={self.b_prime} exceeds b={self.b}")
            if self.b_prime == self.b:
                import warnings

                warnings.warn("b_prime == b: compressed steps cost as much as refresh steps", stacklevel=2)
        if self.algorithm == "pp_marina" and self.r > problem.n:
            raise UsageError(f"r={self.r} exceeds worker count n={problem.n}")


@dataclass
class IterationRecord:
    k: int
    f_value: float
    grad_sq_norm: float
    c_k: int  # coin driving the transition k -> k+1; -1 on the final record
    uplink_floats_cum: int
    downlink_floats_cum: int
    oracle_calls_cum: int
    est_err_sq: float
    lyapunov: float
    minibatch_indices: list | None = None  # per-worker index arrays, if recorded


@dataclass
class Trace:
    config: RunConfig
    records: list
    x_hat: np.ndarray | None = None
    x_hat_index: int = -1
    min_grad_index: int = -1
    final_x: np.ndarray | None = None
    iterates: list = field(default_factory=list)  # x^0 ... x^K, diagnostics only

    def column(self, name: str) -> np.ndarray:
        return np.asarray([getattr(r, name) for r in self.records])


def select_output(num_candidates: int, rng: RngStream) -> int:
    """Uniform index over {0, ..., num_candidates-1} from the output-select stream."""
    if num_candidates < 1:
        raise UsageError("need at least one candidate")
    return int(rng.integers(num_candidates))


class _Engine:
    """Shared state: iterate, estimator, counters, records."""

    def __init__(self, problem: Problem, cfg: RunConfig):
        cfg.validate(problem)
        self.problem = problem
        self.cfg = cfg
        self.x = np.zeros(problem.d) if cfg.x0 is None else np.asarray(cfg.x0, dtype=np.float64).copy()
        self.uplink = 0
        self.downlink = 0
        self.oracle = 0
        self.records: list[IterationRecord] = []

    def record(self, k: int, c_k: int, g: np.ndarray, grad_full: np.ndarray, mb_indices=None) -> None:
        p = self.problem
        f_val = p.f(self.x)
        err = g - grad_full
        est_err_sq = float(err @ err)
        gsq = float(grad_full @ grad_full)
        phi = (
            lyapunov(f_val - p.f_star, est_err_sq, self.cfg.gamma, self.cfg.p)
            if self.cfg.record_lyapunov
            else float("nan")
        )
        self.records.append(
            IterationRecord(
                k=k,
                f_value=f_val,
                grad_sq_norm=gsq,
                c_k=c_k,
                uplink_floats_cum=self.uplink,
                downlink_floats_cum=self.downlink,
                oracle_calls_cum=self.oracle,
                est_err_sq=est_err_sq,
                lyapunov=phi,
                minibatch_indices=mb_indices,
            )
        )

    def step_iterate(self, g: np.ndarray) -> np.ndarray:
        x_new = self.x - self.cfg.gamma * g
        f_new = self.problem.f(x_new)
        if not np.isfinite(f_new) or float(x_new @ x_new) > _DIVERGE_NORM**2:
            trace = self.finish(select=False)
            raise DivergedError(f"diverged at iteration {len(self.records)}", trace)
        return x_new

    def finish(self, select: bool = True) -> Trace:
        trace = Trace(config=self.cfg, records=self.records, final_x=self.x.copy())
        grad_cols = [r.grad_sq_norm for r in self.records[:-1]] or [self.records[0].grad_sq_norm]
        trace.min_grad_index = int(np.argmin(grad_cols))
        if select and len(self.records) > 1:
            rng = stream(self.cfg.seed, "output-select")
            trace.x_hat_index = select_output(len(self.records) - 1, rng)
        return trace


def gd_run(problem: Problem, cfg: RunConfig) -> Trace:
    """Plain distributed gradient descent with dense uplink/downlink accounting."""
    eng = _Engine(problem, cfg)
    n, d = problem.n, problem.d
    iterates = [eng.x.copy()]
    grads = problem.grads_all(eng.x)
    g = grads.mean(axis=0)
    eng.oracle += n * problem.m
    eng.uplink += n * d
    eng.record(0, -1, g, g)
    for _ in range(cfg.K):
        x_new = eng.step_iterate(g)
        eng.x = x_new
        grads = problem.grads_all(x_new)
        g = grads.mean(axis=0)
        eng.oracle += n * problem.m
        eng.uplink += n * d
        eng.downlink += n * d
        iterates.append(x_new.copy())
        eng.record(len(eng.records), -1, g, g)
    # coin on the previous record is a sentinel for gd; rewrite for schema parity
    trace = eng.finish()
    trace.iterates = iterates
    trace.x_hat = iterates[trace.x_hat_index] if trace.x_hat_index >= 0 else iterates[0]
    return trace


def marina_run(problem: Problem, cfg: RunConfig) -> Trace:
    """Compressed-gradient-difference engine over full local gradients."""
    if cfg.compressor is None:
        raise UsageError("marina requires a compressor")
    eng = _Engine(problem, cfg)
    n, d = problem.n, problem.d
    comp = cfg.compressor
    identity = comp.kind == "identity"
    coin = stream(cfg.seed, "coin")
    comp_streams = [stream(cfg.seed, f"compressor/worker-{i}") for i in range(n)]
    iterates = [eng.x.copy()]
    grads = problem.grads_all(eng.x)
    grad_full = grads.mean(axis=0)
    g = grad_full.copy()
    eng.oracle += n * problem.m
    eng.uplink += n * d
    for k in range(cfg.K):
        c_k = int(coin.bernoulli(cfg.p))
        eng.record(k, c_k, g, grad_full)
        x_new = eng.step_iterate(g)
        grads_new = problem.grads_all(x_new)
        grad_full_new = grads_new.mean(axis=0)
        if c_k == 1:
            g = grad_full_new
            eng.uplink += n * d
        elif identity:
            # lossless payloads: the estimator equals the exact gradient;
            # charge the identity payload's full support
            g = grad_full_new
            eng.uplink += n * d
        else:
            acc = np.zeros(d)
            for i in range(n):
                payload = compress(comp, grads_new[i] - grads[i], comp_streams[i])
                eng.uplink += payload.nnz
                scatter_add(acc, payload)
            g = g + acc / n
        eng.downlink += n * (d + 1)
        eng.oracle += n * problem.m
        eng.x = x_new
        grads = grads_new
        grad_full = grad_full_new
        iterates.append(x_new.copy())
    eng.record(cfg.K, -1, g, grad_full)
    trace = eng.finish()
    trace.iterates = iterates
    trace.x_hat = iterates[trace.x_hat_index]
    return trace


def vr_marina_fs_run(problem: Problem, cfg: RunConfig) -> Trace:
    """Finite-sum engine: compressed minibatch gradient differences (PAGE-style)."""
    if cfg.compressor is None:
        raise UsageError("vr_marina_fs requires a compressor")
    if problem.mode != "finite_sum":
        raise UsageError("vr_marina_fs requires a finite-sum problem")
    eng = _Engine(problem, cfg)
    n, d, m, bp = problem.n, problem.d, problem.m, cfg.b_prime
    comp = cfg.compressor
    coin = stream(cfg.seed, "coin")
    comp_streams = [stream(cfg.seed, f"compressor/worker-{i}") for i in range(n)]
    mb_streams = [stream(cfg.seed, f"minibatch/worker-{i}") for i in range(n)]
    iterates = [eng.x.copy()]
    g = problem.grad(eng.x)
    eng.oracle += n * m
    eng.uplink += n * d
    for k in range(cfg.K):
        c_k = int(coin.bernoulli(cfg.p))
        mb_log = [] if cfg.record_minibatch_indices else None
        eng.record(k, c_k, g, problem.grad(eng.x))
        x_new = eng.step_iterate(g)
        if c_k == 1:
            g = problem.grad(x_new)
            eng.uplink += n * d
            eng.oracle += n * m
        else:
            acc = np.zeros(d)
            for i in range(n):
                if bp == m:
                    # full batch: the deterministic index set, exact gradient difference
                    delta = problem.grad_i(i, x_new) - problem.grad_i(i, eng.x)
                    idx = np.arange(m, dtype=np.int64)
                else:
                    idx = mb_streams[i].integers(m, size=bp).astype(np.int64)
                    delta = problem.minibatch_delta(i, idx, x_new, eng.x)
                if mb_log is not None:
                    mb_log.append(idx)
                payload = compress(comp, delta, comp_streams[i])
                eng.uplink += payload.nnz
                scatter_add(acc, payload)
            g = g + acc / n
            eng.oracle += n * 2 * bp
        eng.downlink += n * (d + 1)
        if mb_log is not None:
            eng.records[-1].minibatch_indices = mb_log
        eng.x = x_new
        iterates.append(x_new.copy())
    eng.record(cfg.K, -1, g, problem.grad(eng.x))
    trace = eng.finish()
    trace.iterates = iterates
    trace.x_hat = iterates[trace.x_hat_index]
    return trace


def vr_marina_online_run(problem: Problem, cfg: RunConfig) -> Trace:
    """Online engine: fresh-sample refreshes of size b, compressed differences of size b_prime."""
    if cfg.compressor is None:
        raise UsageError("vr_marina_online requires a compressor")
    eng = _Engine(problem, cfg)
    n, d, b, bp = problem.n, problem.d, cfg.b, cfg.b_prime
    comp = cfg.compressor
    coin = stream(cfg.seed, "coin")
    comp_streams = [stream(cfg.seed, f"compressor/worker-{i}") for i in range(n)]
    mb_streams = [stream(cfg.seed, f"minibatch/worker-{i}") for i in range(n)]

    def fresh_estimate(x):
        acc = np.zeros(d)
        for i in range(n):
            gi = np.zeros(d)
            for _ in range(b):
                gi += problem.stoch_grad(i, problem.draw_sample(i, mb_streams[i]), x)
            acc += gi / b
        return acc / n

    iterates = [eng.x.copy()]
    g = fresh_estimate(eng.x)
    eng.oracle += n * b
    eng.uplink += n * d
    for k in range(cfg.K):
        c_k = int(coin.bernoulli(cfg.p))
        eng.record(k, c_k, g, problem.grad(eng.x))
        x_new = eng.step_iterate(g)
        if c_k == 1:
            g = fresh_estimate(x_new)
            eng.uplink += n * d
            eng.oracle += n * b
        else:
            acc = np.zeros(d)
            for i in range(n):
                delta = np.zeros(d)
                for _ in range(bp):
                    s = problem.draw_sample(i, mb_streams[i])
                    delta += problem.stoch_grad(i, s, x_new) - problem.stoch_grad(i, s, eng.x)
                payload = compress(comp, delta / bp, comp_streams[i])
                eng.uplink += payload.nnz
                scatter_add(acc, payload)
            g = g + acc / n
            eng.oracle += n * 2 * bp
        eng.downlink += n * (d + 1)
        eng.x = x_new
        iterates.append(x_new.copy())
    eng.record(cfg.K, -1, g, problem.grad(eng.x))
    trace = eng.finish()
    trace.iterates = iterates
    trace.x_hat = iterates[trace.x_hat_index]
    return trace


def pp_marina_run(problem: Problem, cfg: RunConfig) -> Trace:
    """Partial-participation engine: r i.i.d. sampled clients send compressed differences."""
    if cfg.compressor is None:
        raise UsageError("pp_marina requires a compressor")
    eng = _Engine(problem, cfg)
    n, d, r = problem.n, problem.d, cfg.r
    comp = cfg.compressor
    coin = stream(cfg.seed, "coin")
    comp_streams = [stream(cfg.seed, f"compressor/worker-{i}") for i in range(n)]
    clients = stream(cfg.seed, "clients")
    iterates = [eng.x.copy()]
    grads = problem.grads_all(eng.x)
    grad_full = grads.mean(axis=0)
    g = grad_full.copy()
    eng.oracle += n * problem.m
    eng.uplink += n * d
    for k in range(cfg.K):
        c_k = int(coin.bernoulli(cfg.p))
        eng.record(k, c_k, g, grad_full)
        x_new = eng.step_iterate(g)
        grads_new = problem.grads_all(x_new)
        grad_full_new = grads_new.mean(axis=0)
        if c_k == 1:
            g = grad_full_new
            eng.uplink += n * d
            eng.oracle += n * problem.m
        else:
            sampled = clients.integers(n, size=r).astype(np.int64)
            acc = np.zeros(d)
            for i in sampled:  # aggregation in drawn-sample order; one payload per draw
                payload = compress(comp, grads_new[i] - grads[i], comp_streams[i])
                eng.uplink += payload.nnz
                scatter_add(acc, payload)
                eng.oracle += 2 * problem.m
            g = g + acc / r
        eng.downlink += n * (d + 1)
        eng.x = x_new
        grads = grads_new
        grad_full = grad_full_new
        iterates.append(x_new.copy())
    eng.record(cfg.K, -1, g, grad_full)
    trace = eng.finish()
    trace.iterates = iterates
    trace.x_hat = iterates[trace.x_hat_index]
    return trace


_RUNNERS = {
    "gd": gd_run,
    "marina": marina_run,
    "vr_marina_fs": vr_marina_fs_run,
    "vr_marina_online": vr_marina_online_run,
    "pp_marina": pp_marina_run,
}


def run_algorithm(problem: Problem, cfg: RunConfig) -> Trace:
    if cfg.algorithm not in _RUNNERS:
        raise UsageError(f"unknown algorithm {cfg.algorithm!r}")
    return _RUNNERS[cfg.algorithm](problem, cfg)
