#!/usr/bin/env python3
"""Communication cost of RandK compression vs. dense uploads.

Runs the compressed-gradient-difference engine with RandK for several K on a
synthetic classification instance, plus the dense identity baseline, all at
their theoretical stepsizes, and reports the mean cumulative uplink floats
needed to reach a target gradient norm.

    python3 scripts/compression_tradeoff.py --seeds 5 --out results.csv
"""

import argparse
import csv

import numpy as np

from marina_sim.algorithms import RunConfig, gd_run, marina_run
from marina_sim.compressors import make_compressor
from marina_sim.problems import build_classification_problem, make_synthetic_classification
from marina_sim.rng import stream
from marina_sim.theory import TheoryInputs, recommended_p, theoretical_stepsize


def floats_to_target(trace, eps_sq):
    hit = next((r for r in trace.records if r.grad_sq_norm <= eps_sq), None)
    return np.nan if hit is None else hit.uplink_floats_cum


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-workers", type=int, default=20)
    ap.add_argument("--n-rows", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=20)
    ap.add_argument("--k-values", type=int, nargs="+", default=[1, 5, 10])
    ap.add_argument("--iters", type=int, default=800)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--data-seed", type=int, default=42)
    ap.add_argument("--out", default=None, help="optional CSV for the summary table")
    args = ap.parse_args()

    data = make_synthetic_classification(args.n_rows, args.dim, stream(args.data_seed, "data-gen"))
    prob = build_classification_problem(data, args.n_workers)
    x0 = np.zeros(prob.d)
    print(f"problem: n={prob.n} m={prob.m} d={prob.d} L={prob.L:.4g}")

    # dense GD fixes the reachable floor; target 10x above it
    gd = gd_run(prob, RunConfig(algorithm="gd", gamma=1.0 / prob.L, K=args.iters, seed=0, x0=x0))
    eps_sq = 10.0 * gd.records[-1].grad_sq_norm
    print(f"target ||grad f||^2 <= {eps_sq:.4g}  (10x dense-GD floor at K={args.iters})")

    rows = []
    variants = [("identity", None)] + [("rand_k", k) for k in args.k_values]
    for kind, k in variants:
        comp = make_compressor(kind, prob.d, k=k)
        inputs = TheoryInputs(L=prob.L, omega=comp.omega, zeta=comp.zeta, n=prob.n, d=prob.d)
        p = recommended_p("marina", inputs)
        gamma = theoretical_stepsize("marina", inputs, p)
        hits = []
        for seed in range(args.seeds):
            cfg = RunConfig(
                algorithm="marina", gamma=gamma, K=args.iters, seed=seed,
                compressor=comp, x0=x0, p=p,
            )
            hits.append(floats_to_target(marina_run(prob, cfg), eps_sq))
        label = kind if k is None else f"rand_{k}"
        mean_floats = float(np.nanmean(hits)) if not np.all(np.isnan(hits)) else np.nan
        rows.append((label, p, gamma, mean_floats))
        print(f"{label:>10}: p={p:.3g} gamma={gamma:.4g} uplink floats to target = {mean_floats:.4g}")

    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            w = csv.writer(fh)
            w.writerow(["compressor", "p", "gamma", "mean_uplink_floats_to_target"])
            w.writerows(rows)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
