"""Command-line entry points: run, sweep, plan, verify.

`run` executes one experiment per seed and writes per-seed trace files plus a
summary JSON.  `sweep` repeats a run over one axis (compressor.k, p, gamma,
seed-count) into a combined long-format CSV.  `plan` prints the resolved
stepsize/probability/batch/bound values.  `verify` runs the built-in invariant
suites.  Seeds can execute in parallel; cap with MARINA_SIM_PARALLEL.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys

import numpy as np

from marina_sim import algorithms, compressors, config as config_mod
from marina_sim.algorithms import DivergedError, RunConfig, Trace, run_algorithm
from marina_sim.compressors import enumerate_outcomes, make_compressor
from marina_sim.config import ConfigError, ExperimentConfig
from marina_sim.numcore import UsageError, densify, sq_norm
from marina_sim.problems import quadratic_pl_problem
from marina_sim.rng import stream
from marina_sim.theory import TheoryInputs, theoretical_bound, theoretical_stepsize

CSV_COLUMNS = (
    "iter",
    "f",
    "grad_sq_norm",
    "c_k",
    "uplink_floats_cum",
    "downlink_floats_cum",
    "oracle_calls_cum",
    "est_err_sq",
    "lyapunov",
)

SUMMARY_KEYS = (
    "resolved",
    "seeds",
    "per_seed",
    "mean_final_f",
    "mean_final_grad_sq_norm",
    "mean_curves",
)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _trace_rows(trace: Trace):
    for rec in trace.records:
        yield (
            str(rec.k),
            _fmt(rec.f_value),
            _fmt(rec.grad_sq_norm),
            str(rec.c_k),
            str(rec.uplink_floats_cum),
            str(rec.downlink_floats_cum),
            str(rec.oracle_calls_cum),
            _fmt(rec.est_err_sq),
            _fmt(rec.lyapunov),
        )


def write_trace_csv(trace: Trace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in _trace_rows(trace):
            fh.write(",".join(row) + "\n")


def write_trace_jsonl(trace: Trace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in _trace_rows(trace):
            fh.write(json.dumps(dict(zip(CSV_COLUMNS, row))) + "\n")


def _run_seed(cfg: ExperimentConfig, seed: int) -> Trace:
    problem = config_mod.build_problem(cfg.problem)
    _, template, _ = config_mod.resolve(cfg, problem)
    from dataclasses import replace

    return run_algorithm(problem, replace(template, seed=int(seed)))


def _parallelism() -> int:
    return max(1, int(os.environ.get("MARINA_SIM_PARALLEL", "1")))


def cmd_run(args) -> int:
    try:
        cfg = config_mod.load_config(args.config)
        problem = config_mod.build_problem(cfg.problem)
        resolved, _, _ = config_mod.resolve(cfg, problem)
    except (ConfigError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    outdir = cfg.output.get("directory", "out")
    os.makedirs(outdir, exist_ok=True)
    formats = cfg.output.get("formats", ["csv"])
    per_seed = {}
    curves_f, curves_g = [], []
    failed = False
    for seed, outcome in _seed_outcomes(cfg):
        if isinstance(outcome, DivergedError):
            failed = True
            trace = outcome.trace
            marker = os.path.join(outdir, f"trace_seed{seed}.partial")
            if "csv" in formats:
                write_trace_csv(trace, marker + ".csv")
            with open(marker, "w", encoding="utf-8") as fh:
                fh.write(str(outcome) + "\n")
            print(f"error: seed {seed}: {outcome}", file=sys.stderr)
            continue
        trace = outcome
        if "csv" in formats:
            write_trace_csv(trace, os.path.join(outdir, f"trace_seed{seed}.csv"))
        if "jsonl" in formats:
            write_trace_jsonl(trace, os.path.join(outdir, f"trace_seed{seed}.jsonl"))
        final = trace.records[-1]
        per_seed[str(seed)] = {
            "final_f": final.f_value,
            "final_grad_sq_norm": final.grad_sq_norm,
            "x_hat_index": trace.x_hat_index,
            "min_grad_index": trace.min_grad_index,
            "uplink_floats_total": final.uplink_floats_cum,
            "downlink_floats_total": final.downlink_floats_cum,
            "oracle_calls_total": final.oracle_calls_cum,
        }
        curves_f.append(trace.column("f_value"))
        curves_g.append(trace.column("grad_sq_norm"))
    if per_seed:
        summary = {
            "resolved": resolved,
            "seeds": [s for s in cfg.seeds if str(s) in per_seed],
            "per_seed": per_seed,
            "mean_final_f": float(np.mean([v["final_f"] for v in per_seed.values()])),
            "mean_final_grad_sq_norm": float(
                np.mean([v["final_grad_sq_norm"] for v in per_seed.values()])
            ),
            "mean_curves": {
                "f": np.mean(curves_f, axis=0).tolist(),
                "grad_sq_norm": np.mean(curves_g, axis=0).tolist(),
            },
        }
        name = "summary.json" if not failed else "summary.partial.json"
        with open(os.path.join(outdir, name), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 1 if failed else 0


def _seed_outcomes(cfg: ExperimentConfig):
    problem = config_mod.build_problem(cfg.problem)
    _, template, _ = config_mod.resolve(cfg, problem)
    from dataclasses import replace

    workers = _parallelism()
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(seed, pool.submit(_run_seed, cfg, seed)) for seed in cfg.seeds]
            for seed, fut in futures:
                try:
                    yield seed, fut.result()
                except DivergedError as exc:
                    yield seed, exc
        return
    for seed in cfg.seeds:
        try:
            yield seed, run_algorithm(problem, replace(template, seed=int(seed)))
        except DivergedError as exc:
            yield seed, exc


def cmd_plan(args) -> int:
    try:
        cfg = config_mod.load_config(args.config)
        problem = config_mod.build_problem(cfg.problem)
        resolved, _, _ = config_mod.resolve(cfg, problem)
    except (ConfigError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(resolved, indent=2, sort_keys=True))
    return 0


_SWEEP_AXES = ("compressor.k", "p", "gamma", "seed-count")


def cmd_sweep(args) -> int:
    try:
        cfg = config_mod.load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    axis = args.axis
    if axis not in _SWEEP_AXES:
        print(f"error: axis must be one of {_SWEEP_AXES}", file=sys.stderr)
        return 2
    values = cfg.sweep.get("axis_values", [])
    if not values:
        print("error: sweep.axis_values is empty", file=sys.stderr)
        return 2
    target = cfg.sweep.get("target_eps_sq")
    outdir = cfg.output.get("directory", "out")
    os.makedirs(outdir, exist_ok=True)
    combined = os.path.join(outdir, f"sweep_{axis.replace('.', '_')}.csv")
    summary_rows = []
    from dataclasses import replace

    with open(combined, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("axis,value,seed," + ",".join(CSV_COLUMNS) + "\n")
        for value in values:
            sub = ExperimentConfig(
                problem=dict(cfg.problem),
                algorithm=dict(cfg.algorithm),
                compressor=dict(cfg.compressor),
                output=dict(cfg.output),
                seeds=list(cfg.seeds),
                sweep=dict(cfg.sweep),
            )
            if axis == "compressor.k":
                sub.compressor["k"] = int(value)
            elif axis == "p":
                sub.algorithm["p"] = float(value)
            elif axis == "gamma":
                sub.algorithm["gamma"] = float(value)
            else:  # seed-count
                sub.seeds = list(cfg.seeds)[: int(value)]
            try:
                problem = config_mod.build_problem(sub.problem)
                _, template, _ = config_mod.resolve(sub, problem)
            except (ConfigError, UsageError) as exc:
                print(f"error: axis value {value}: {exc}", file=sys.stderr)
                return 2
            hits = []
            for seed in sub.seeds:
                try:
                    trace = run_algorithm(problem, replace(template, seed=int(seed)))
                except DivergedError as exc:
                    print(f"error: axis value {value}, seed {seed}: {exc}", file=sys.stderr)
                    return 1
                for row in _trace_rows(trace):
                    fh.write(f"{axis},{value},{seed}," + ",".join(row) + "\n")
                if target is not None:
                    hit = next(
                        (r for r in trace.records if r.grad_sq_norm <= float(target)), None
                    )
                    hits.append(hit.uplink_floats_cum if hit is not None else math.nan)
            if target is not None:
                finite = [h for h in hits if not math.isnan(h)]
                summary_rows.append((value, float(np.mean(finite)) if finite else math.nan))
    if summary_rows:
        with open(
            os.path.join(outdir, f"sweep_{axis.replace('.', '_')}_summary.csv"),
            "w",
            encoding="utf-8",
            newline="\n",
        ) as fh:
            fh.write("value,mean_uplink_floats_to_target\n")
            for value, floats in summary_rows:
                fh.write(f"{value},{_fmt(floats)}\n")
    return 0


# ---------------------------------------------------------------------------
# verify suites


def _check(name: str, ok: bool, detail: str = "") -> bool:
    tag = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    print(f"[{tag}] {name}{suffix}")
    return ok


def verify_compressors() -> bool:
    ok = True
    rng = stream(123, "data-gen")
    for d in (2, 3, 4):
        for k in range(1, d + 1):
            comp = make_compressor("rand_k", d, k=k)
            x = rng.normal(d)
            outcomes = enumerate_outcomes(comp, x)
            mean = sum(p * densify(o) for p, o in outcomes)
            var = sum(p * sq_norm(densify(o) - x) for p, o in outcomes)
            ok &= _check(
                f"rand_k(d={d},k={k}) unbiased", bool(np.linalg.norm(mean - x) <= 1e-12)
            )
            ok &= _check(
                f"rand_k(d={d},k={k}) variance = omega||x||^2",
                abs(var - comp.omega * sq_norm(x)) <= 1e-12,
                f"omega measured = {var / sq_norm(x):.6g}",
            )
    comp = make_compressor("l2_quant", 4)
    x = rng.normal(4)
    outcomes = enumerate_outcomes(comp, x)
    mean = sum(p * densify(o) for p, o in outcomes)
    var = sum(p * sq_norm(densify(o) - x) for p, o in outcomes)
    analytic = math.sqrt(sq_norm(x)) * float(np.sum(np.abs(x))) - sq_norm(x)
    ok &= _check("l2_quant unbiased", bool(np.linalg.norm(mean - x) <= 1e-12))
    ok &= _check("l2_quant variance analytic", abs(var - analytic) <= 1e-12)
    ok &= _check("l2_quant variance bound", var <= comp.omega * sq_norm(x) + 1e-12)
    # Monte Carlo consistency for rand_k(1, 3)
    comp = make_compressor("rand_k", 3, k=1)
    x = np.array([1.0, -2.0, 0.5])
    s = stream(7, "compressor/worker-0")
    draws = np.stack([densify(compressors.compress(comp, x, s)) for _ in range(20000)])
    stderr = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    ok &= _check(
        "rand_k Monte Carlo mean within 4 stderr",
        bool(np.all(np.abs(draws.mean(axis=0) - x) <= 4 * stderr + 1e-12)),
    )
    return ok


def verify_identities() -> bool:
    from dataclasses import replace

    ok = True
    problem = quadratic_pl_problem(0.2, 1.0, 6, 3, stream(5, "data-gen"))
    base = RunConfig(algorithm="gd", gamma=0.5, K=40, seed=11, x0=np.ones(6))
    gd = algorithms.gd_run(problem, base)
    ident = make_compressor("identity", 6)
    marina_id = algorithms.marina_run(
        problem, replace(base, algorithm="marina", compressor=ident, p=0.5)
    )
    randk = make_compressor("rand_k", 6, k=2)
    marina_p1 = algorithms.marina_run(
        problem, replace(base, algorithm="marina", compressor=randk, p=1.0)
    )
    pp_p1 = algorithms.pp_marina_run(
        problem, replace(base, algorithm="pp_marina", compressor=randk, p=1.0, r=2)
    )
    for name, other in (
        ("marina(identity) == gd", marina_id),
        ("marina(p=1) == gd", marina_p1),
        ("pp_marina(p=1) == gd", pp_p1),
    ):
        same = all(
            a.f_value == b.f_value and a.grad_sq_norm == b.grad_sq_norm
            for a, b in zip(gd.records, other.records)
        ) and np.array_equal(gd.final_x, other.final_x)
        ok &= _check(name + " (bitwise)", same)
    return ok


def verify_bounds(gamma_scale: float = 1.0) -> bool:
    from dataclasses import replace

    ok = True
    problem = quadratic_pl_problem(0.1, 1.0, 8, 4, stream(3, "data-gen"))
    comp = make_compressor("rand_k", 8, k=1)
    inputs = TheoryInputs(
        L=problem.L,
        mu=problem.mu,
        omega=comp.omega,
        zeta=comp.zeta,
        n=problem.n,
        d=problem.d,
        delta0=problem.f(np.ones(8)) - problem.f_star,
    )
    p = comp.zeta / problem.d
    gamma = gamma_scale * theoretical_stepsize("marina", inputs, p)
    K = 150
    if gamma_scale > 1.0:
        _check("marina nonconvex bound", True, "not applicable (gamma exceeds theory)")
        return ok
    bound = theoretical_bound("marina", inputs, gamma, K, p)
    cfg = RunConfig(
        algorithm="marina", gamma=gamma, K=K, seed=0, compressor=comp, x0=np.ones(8), p=p
    )
    means = []
    for seed in range(60):
        trace = algorithms.marina_run(problem, replace(cfg, seed=seed))
        means.append(float(np.mean(trace.column("grad_sq_norm")[:K])))
    ok &= _check(
        "marina nonconvex bound: mean avg grad^2 <= 2*delta0/(gamma K)",
        float(np.mean(means)) <= bound * 1.05,
        f"empirical {np.mean(means):.4g} vs bound {bound:.4g}",
    )
    gamma_pl = gamma_scale * theoretical_stepsize("marina_pl", inputs, p)
    bound_pl = theoretical_bound("marina_pl", inputs, gamma_pl, K, p)
    cfg_pl = replace(cfg, gamma=gamma_pl)
    finals = []
    for seed in range(60):
        trace = algorithms.marina_run(problem, replace(cfg_pl, seed=seed))
        finals.append(trace.records[-1].f_value - problem.f_star)
    stderr = float(np.std(finals, ddof=1) / math.sqrt(len(finals)))
    ok &= _check(
        "marina PL bound: mean f(x^K)-f* <= (1-gamma mu)^K delta0 + 3 stderr",
        float(np.mean(finals)) <= bound_pl + 3 * stderr,
        f"empirical {np.mean(finals):.4g} vs bound {bound_pl:.4g}",
    )
    return ok


def cmd_verify(args) -> int:
    suites = {
        "compressors": lambda: verify_compressors(),
        "identities": lambda: verify_identities(),
        "bounds": lambda: verify_bounds(args.gamma_scale),
    }
    if args.suite not in suites:
        print(f"error: suite must be one of {sorted(suites)}", file=sys.stderr)
        return 2
    return 0 if suites[args.suite]() else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="marina-sim")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config across its seeds")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)
    p_sweep = sub.add_parser("sweep", help="sweep one axis of an experiment config")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True, choices=_SWEEP_AXES)
    p_sweep.set_defaults(func=cmd_sweep)
    p_plan = sub.add_parser("plan", help="print resolved stepsize/probability/bounds as JSON")
    p_plan.add_argument("config")
    p_plan.set_defaults(func=cmd_plan)
    p_verify = sub.add_parser("verify", help="run a built-in invariant suite")
    p_verify.add_argument("suite", choices=("compressors", "identities", "bounds"))
    p_verify.add_argument("--gamma-scale", type=float, default=1.0)
    p_verify.set_defaults(func=cmd_verify)
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
