"""Deterministic simulator for compressed distributed optimization with exact accounting."""

from marina_sim.numcore import SparseVector, densify, grad_check, scatter_add, sparsify, sq_norm
from marina_sim.rng import RngStream, stream
from marina_sim.compressors import Compressor, make_compressor
from marina_sim.problems import (
    Dataset,
    Problem,
    build_classification_problem,
    make_synthetic_classification,
    parse_libsvm,
    quadratic_pl_problem,
    with_additive_noise,
)
from marina_sim.algorithms import (
    DivergedError,
    IterationRecord,
    RunConfig,
    Trace,
    gd_run,
    marina_run,
    pp_marina_run,
    run_algorithm,
    vr_marina_fs_run,
    vr_marina_online_run,
)
from marina_sim.theory import (
    TheoryInputs,
    lyapunov,
    recommended_batch,
    recommended_p,
    theoretical_bound,
    theoretical_stepsize,
)

__all__ = [
    "Compressor",
    "Dataset",
    "DivergedError",
    "IterationRecord",
    "Problem",
    "RngStream",
    "RunConfig",
    "SparseVector",
    "Trace",
    "TheoryInputs",
    "build_classification_problem",
    "densify",
    "gd_run",
    "grad_check",
    "lyapunov",
    "make_compressor",
    "make_synthetic_classification",
    "marina_run",
    "parse_libsvm",
    "pp_marina_run",
    "quadratic_pl_problem",
    "recommended_batch",
    "recommended_p",
    "run_algorithm",
    "scatter_add",
    "sparsify",
    "sq_norm",
    "stream",
    "theoretical_bound",
    "theoretical_stepsize",
    "vr_marina_fs_run",
    "vr_marina_online_run",
    "with_additive_noise",
]
