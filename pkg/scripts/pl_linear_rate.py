#!/usr/bin/env python3
"""Empirical linear convergence under the PL condition vs. the (1-gamma mu)^K rate.

Seed-averages f(x^K) - f* for the compressed engine with Rand1 on a quadratic
PL instance and prints it next to the theoretical contraction at several K.

    python3 scripts/pl_linear_rate.py --seeds 100
"""

import argparse

import numpy as np

from marina_sim.algorithms import RunConfig, marina_run
from marina_sim.compressors import make_compressor
from marina_sim.problems import quadratic_pl_problem
from marina_sim.rng import stream
from marina_sim.theory import TheoryInputs, recommended_p, theoretical_stepsize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mu", type=float, default=0.1)
    ap.add_argument("--L", type=float, default=1.0)
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--n-workers", type=int, default=4)
    ap.add_argument("--iters", type=int, default=300)
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--checkpoints", type=int, nargs="+", default=[50, 100, 200, 300])
    args = ap.parse_args()

    prob = quadratic_pl_problem(args.mu, args.L, args.dim, args.n_workers, stream(7, "data-gen"))
    x0 = np.ones(prob.d)
    delta0 = prob.f(x0) - prob.f_star
    comp = make_compressor("rand_k", prob.d, k=1)
    inputs = TheoryInputs(
        L=prob.L, mu=prob.mu, omega=comp.omega, zeta=comp.zeta, n=prob.n, d=prob.d
    )
    p = recommended_p("marina", inputs)
    gamma = theoretical_stepsize("marina_pl", inputs, p)
    print(f"mu={prob.mu:.4g} L={prob.L:.4g} p={p} gamma={gamma:.4g} delta0={delta0:.4g}")

    gaps = np.empty((args.seeds, args.iters + 1))
    for seed in range(args.seeds):
        cfg = RunConfig(
            algorithm="marina", gamma=gamma, K=args.iters, seed=seed,
            compressor=comp, x0=x0, p=p,
        )
        trace = marina_run(prob, cfg)
        gaps[seed] = trace.column("f_value") - prob.f_star

    print(f"{'K':>6} {'mean f gap':>12} {'(1-gamma mu)^K d0':>18}")
    for K in args.checkpoints:
        theory = (1.0 - gamma * prob.mu) ** K * delta0
        print(f"{K:>6} {gaps[:, K].mean():>12.4g} {theory:>18.4g}")


if __name__ == "__main__":
    main()
