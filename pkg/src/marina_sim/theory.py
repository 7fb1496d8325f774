"""Stepsize, switch-probability, batch-size, and convergence-bound calculators.

All hidden Theta(.) constants are fixed to 1.  When a user-supplied stepsize
exceeds the theoretical maximum the bound calculators warn but still evaluate.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from marina_sim.numcore import UsageError

STEPSIZE_VARIANTS = (
    "marina",
    "marina_pl",
    "vr_fs",
    "vr_fs_pl",
    "vr_online",
    "vr_online_pl",
    "pp",
    "pp_pl",
)


@dataclass
class TheoryInputs:
    L: float
    calL: float = 0.0
    mu: float | None = None
    omega: float = 0.0
    zeta: float = 0.0
    n: int = 1
    m: int = 1
    d: int = 1
    b: int = 1
    b_prime: int = 1
    r: int = 1
    sigma_sq: float = 0.0
    delta0: float = 0.0
    eps: float = 0.0


def theoretical_stepsize(variant: str, inp: TheoryInputs, p: float) -> float:
    """Largest stepsize admitted by the convergence analysis of the given variant."""
    if variant not in STEPSIZE_VARIANTS:
        raise UsageError(f"unknown variant {variant!r}")
    if not (0 < p <= 1):
        raise UsageError(f"p must lie in (0, 1], got {p}")
    if inp.L <= 0:
        raise UsageError("L must be positive")
    pl = variant.endswith("_pl") or variant == "marina_pl"
    two = 2.0 if pl else 1.0
    if variant.startswith("marina"):
        gamma = 1.0 / (inp.L * (1.0 + math.sqrt(two * (1.0 - p) * inp.omega / (p * inp.n))))
    elif variant.startswith("vr_"):
        inner = inp.omega * inp.L**2 + (1.0 + inp.omega) * inp.calL**2 / inp.b_prime
        gamma = 1.0 / (inp.L + math.sqrt(two * (1.0 - p) / (p * inp.n) * inner))
    else:  # pp
        gamma = 1.0 / (inp.L * (1.0 + math.sqrt(two * (1.0 - p) * (1.0 + inp.omega) / (p * inp.r))))
    if pl:
        if inp.mu is None or inp.mu <= 0:
            raise UsageError("PL variant requires mu > 0")
        gamma = min(gamma, p / (2.0 * inp.mu))
    return gamma


def recommended_p(variant: str, inp: TheoryInputs) -> float:
    """Switch probability balancing dense and compressed communication cost."""
    base = variant.removesuffix("_pl")
    if base == "marina":
        p = inp.zeta / inp.d
    elif base == "vr_fs":
        p = min(inp.zeta / inp.d, inp.b_prime / (inp.m + inp.b_prime))
    elif base == "vr_online":
        p = min(inp.zeta / inp.d, inp.b_prime / (inp.b + inp.b_prime))
    elif base == "pp":
        p = inp.zeta * inp.r / (inp.d * inp.n)
    else:
        raise UsageError(f"unknown variant {variant!r}")
    if not (0 < p <= 1):
        raise UsageError(f"recommended p = {p} falls outside (0, 1]")
    return p


def recommended_batch(mode: str, inp: TheoryInputs) -> int:
    """Initialization/refresh batch size b for the online variant (Theta constant = 1)."""
    if mode == "nonconvex":
        if inp.eps <= 0:
            raise UsageError("eps must be positive")
        raw = inp.sigma_sq / (inp.n * inp.eps**2)
    elif mode == "pl":
        if inp.eps <= 0 or inp.mu is None or inp.mu <= 0:
            raise UsageError("PL mode requires eps > 0 and mu > 0")
        raw = inp.sigma_sq / (inp.n * inp.mu * inp.eps)
    else:
        raise UsageError(f"unknown mode {mode!r}")
    return max(1, math.ceil(raw))


def theoretical_bound(variant: str, inp: TheoryInputs, gamma: float, K: int, p: float) -> float:
    """Right-hand side of the matching expectation bound for the chosen variant.

    Nonconvex variants bound the K-iterate average of E||grad f(x^k)||^2 (the
    online one adds the sigma^2/(n b) floor); PL variants bound E[f(x^K) - f*].
    """
    gamma_max = theoretical_stepsize(variant, inp, p)
    if gamma > gamma_max * (1.0 + 1e-12):
        warnings.warn(
            f"stepsize {gamma} exceeds theoretical maximum {gamma_max} for {variant}",
            stacklevel=2,
        )
    pl = variant.endswith("_pl") or variant == "marina_pl"
    if not pl:
        bound = 2.0 * inp.delta0 / (gamma * K)
        if variant == "vr_online":
            bound += inp.sigma_sq / (inp.n * inp.b) * (1.0 + 1.0 / (p * K))
        return bound
    if inp.mu is None or inp.mu <= 0:
        raise UsageError("PL variant requires mu > 0")
    bound = (1.0 - gamma * inp.mu) ** K * inp.delta0
    if variant == "vr_online_pl":
        bound += inp.sigma_sq / (inp.n * inp.b * inp.mu)
    return bound


def lyapunov(f_gap: float, est_err_sq: float, gamma: float, p: float, mode: str = "nonconvex") -> float:
    """Potential f(x) - f_* plus the weighted estimator-error term.

    Nonconvex analysis weights the error by gamma/(2p); the PL analysis by gamma/p.
    """
    if mode == "nonconvex":
        return f_gap + gamma / (2.0 * p) * est_err_sq
    if mode == "pl":
        return f_gap + gamma / p * est_err_sq
    raise UsageError(f"unknown mode {mode!r}")
