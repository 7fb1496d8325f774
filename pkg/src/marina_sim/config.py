"""Experiment configuration: TOML parsing, validation, and "auto" resolution.

The file format is plain TOML with [problem], [algorithm], [compressor],
[output] and optional [sweep] tables plus a top-level `seeds` list.  The
literal string "auto" for algorithm.gamma, algorithm.p, or algorithm.b is
resolved through the theory calculators before any run, and the resolved
values are echoed into every output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import numpy as np

from marina_sim.algorithms import RunConfig
from marina_sim.compressors import Compressor, make_compressor
from marina_sim.problems import (
    Problem,
    build_classification_problem,
    make_synthetic_classification,
    parse_libsvm,
    quadratic_pl_problem,
    with_additive_noise,
)
from marina_sim.rng import stream
from marina_sim.theory import (
    TheoryInputs,
    recommended_batch,
    recommended_p,
    theoretical_bound,
    theoretical_stepsize,
)


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending key."""


_VARIANTS = {
    "marina": "marina",
    "vr_marina_fs": "vr_fs",
    "vr_marina_online": "vr_online",
    "pp_marina": "pp",
}


@dataclass
class ExperimentConfig:
    problem: dict
    algorithm: dict
    compressor: dict
    output: dict
    seeds: list
    sweep: dict = field(default_factory=dict)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return parse_config(raw)


def parse_config(raw: dict) -> ExperimentConfig:
    for key in ("problem", "algorithm"):
        if key not in raw:
            raise ConfigError(f"missing required table [{key}]")
    known = {"problem", "algorithm", "compressor", "output", "seeds", "sweep"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    cfg = ExperimentConfig(
        problem=dict(raw["problem"]),
        algorithm=dict(raw["algorithm"]),
        compressor=dict(raw.get("compressor", {"kind": "identity"})),
        output=dict(raw.get("output", {})),
        seeds=list(raw.get("seeds", [0])),
        sweep=dict(raw.get("sweep", {})),
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    pk = cfg.problem.get("kind")
    if pk not in ("libsvm", "synthetic_classification", "quadratic_pl"):
        raise ConfigError(f"problem.kind must be libsvm/synthetic_classification/quadratic_pl, got {pk!r}")
    if int(cfg.problem.get("n", 1)) < 1:
        raise ConfigError("problem.n must be >= 1")
    alg = cfg.algorithm.get("name")
    if alg not in ("gd", "marina", "vr_marina_fs", "vr_marina_online", "pp_marina"):
        raise ConfigError(f"algorithm.name must be a known engine, got {alg!r}")
    p = cfg.algorithm.get("p", "auto")
    if p != "auto" and not (0 < float(p) <= 1):
        raise ConfigError(f"algorithm.p must be 'auto' or in (0, 1], got {p}")
    gamma = cfg.algorithm.get("gamma", "auto")
    if gamma != "auto" and float(gamma) < 0:
        raise ConfigError(f"algorithm.gamma must be 'auto' or >= 0, got {gamma}")
    if int(cfg.algorithm.get("K", 0)) < 1:
        raise ConfigError("algorithm.K must be >= 1")
    mode = cfg.algorithm.get("mode", "nonconvex")
    if mode not in ("nonconvex", "pl"):
        raise ConfigError(f"algorithm.mode must be nonconvex or pl, got {mode!r}")
    ck = cfg.compressor.get("kind", "identity")
    if ck not in ("identity", "randk", "l2"):
        raise ConfigError(f"compressor.kind must be identity/randk/l2, got {ck!r}")
    fmts = cfg.output.get("formats", ["csv"])
    for fmt in fmts:
        if fmt not in ("csv", "jsonl"):
            raise ConfigError(f"output.formats entries must be csv or jsonl, got {fmt!r}")
    if not cfg.seeds:
        raise ConfigError("seeds must be a non-empty list")


def build_problem(pc: dict) -> Problem:
    kind = pc["kind"]
    n = int(pc.get("n", 1))
    if kind == "quadratic_pl":
        rng = stream(int(pc.get("data_seed", 0)), "data-gen")
        problem = quadratic_pl_problem(
            mu=float(pc.get("mu", 0.1)),
            L=float(pc.get("L", 1.0)),
            d=int(pc.get("d", 10)),
            n=n,
            rng=rng,
        )
    elif kind == "synthetic_classification":
        rng = stream(int(pc.get("data_seed", 0)), "data-gen")
        data = make_synthetic_classification(
            N=int(pc.get("N", 1000)),
            d=int(pc.get("d", 20)),
            rng=rng,
            flip_prob=float(pc.get("flip_prob", 0.1)),
            scale=float(pc.get("scale", 1.0)),
        )
        problem = build_classification_problem(data, n)
    else:  # libsvm
        path = pc.get("path")
        if not path:
            raise ConfigError("problem.path is required for libsvm problems")
        with open(path, encoding="utf-8") as fh:
            data = parse_libsvm(fh, n_features=pc.get("n_features"))
        problem = build_classification_problem(data, n)
    noise = pc.get("noise_sigma")
    if noise is not None:
        problem = with_additive_noise(problem, float(noise))
    return problem


def build_compressor(cc: dict, d: int) -> Compressor:
    kind = {"identity": "identity", "randk": "rand_k", "l2": "l2_quant"}[cc.get("kind", "identity")]
    k = cc.get("k")
    return make_compressor(kind, d, k=int(k) if k is not None else None)


def initial_point(ac: dict, d: int) -> np.ndarray:
    x0 = ac.get("x0", "zeros")
    if x0 == "zeros":
        return np.zeros(d)
    if x0 == "ones":
        return np.ones(d)
    arr = np.asarray(x0, dtype=np.float64)
    if arr.shape != (d,):
        raise ConfigError(f"algorithm.x0 must have length {d}")
    return arr


def resolve(cfg: ExperimentConfig, problem: Problem):
    """Resolve 'auto' values; returns (resolved dict, RunConfig template, TheoryInputs)."""
    ac = cfg.algorithm
    alg = ac["name"]
    mode = ac.get("mode", "nonconvex")
    comp = build_compressor(cfg.compressor, problem.d)
    x0 = initial_point(ac, problem.d)
    b_prime = int(ac.get("b_prime", 1))
    r = int(ac.get("r", 1))
    eps = float(ac.get("eps", 0.1))
    K = int(ac.get("K"))

    inputs = TheoryInputs(
        L=problem.L,
        calL=problem.calL,
        mu=problem.mu,
        omega=comp.omega,
        zeta=comp.zeta,
        n=problem.n,
        m=problem.m,
        d=problem.d,
        b_prime=b_prime,
        r=r,
        sigma_sq=problem.sigma_sq if problem.sigma_i is not None else 0.0,
        delta0=problem.f(x0) - problem.f_star,
        eps=eps,
    )

    b = ac.get("b", 1)
    if b == "auto":
        if alg != "vr_marina_online":
            raise ConfigError("algorithm.b = 'auto' only applies to vr_marina_online")
        b = recommended_batch(mode, inputs)
    b = int(b)
    inputs.b = b

    variant = _VARIANTS.get(alg)
    if variant is not None and mode == "pl":
        variant = variant + "_pl" if variant != "marina" else "marina_pl"

    p = ac.get("p", "auto")
    if p == "auto":
        p = 1.0 if alg == "gd" else recommended_p(variant, inputs)
    p = float(p)

    gamma = ac.get("gamma", "auto")
    if gamma == "auto":
        if alg == "gd":
            gamma = 1.0 / problem.L
        else:
            gamma = theoretical_stepsize(variant, inputs, p)
    gamma = float(gamma)

    resolved = {
        "algorithm": alg,
        "variant": variant,
        "mode": mode,
        "gamma": gamma,
        "p": p,
        "K": K,
        "b": b,
        "b_prime": b_prime,
        "r": r,
        "eps": eps,
        "compressor": {"kind": comp.kind, "k": comp.k, "omega": comp.omega, "zeta": comp.zeta},
        "delta0": inputs.delta0,
        "L": inputs.L,
        "calL": inputs.calL,
        "mu": inputs.mu,
        "sigma_sq": inputs.sigma_sq,
    }
    if variant is not None:
        resolved["gamma_max"] = theoretical_stepsize(variant, inputs, p)
        resolved["bound"] = theoretical_bound(variant, inputs, gamma, K, p)

    template = RunConfig(
        algorithm=alg,
        gamma=gamma,
        K=K,
        seed=0,
        compressor=comp,
        x0=x0,
        p=p,
        b=b,
        b_prime=b_prime,
        r=r,
        bits_per_float=int(ac.get("bits_per_float", 64)),
        record_lyapunov=bool(cfg.output.get("record_lyapunov", True)),
    )
    return resolved, template, inputs
