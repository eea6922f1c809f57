"""Bounded quasi-Newton minimisation with finite-difference gradients.

The line search and L-BFGS-B update come from scipy; this module owns the
parts the benchmarks depend on: central-difference gradients with a fixed
step, a hard per-restart evaluation budget that counts every objective call
(gradient probes included), restarts, and best-seen bookkeeping so the
result is never worse than any point evaluated.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .numcore import as_rng

GRAD_TOL = 1e-6
REL_IMPROVEMENT_TOL = 1e-10


class NonFiniteObjectiveError(RuntimeError):
    pass


class _BudgetExhausted(Exception):
    pass


@dataclass
class OptimizerSpec:
    bounds: list
    max_evals: int = 400
    h: float = 1e-3
    restarts: int = 2
    init_bounds: list = None  # uniform init box; defaults to ``bounds``

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be >= 1")
        if self.h <= 0:
            raise ValueError("finite-difference step must be positive")
        if self.restarts < 1:
            raise ValueError("need at least one start")
        self.bounds = [(float(lo), float(hi)) for lo, hi in self.bounds]
        if self.init_bounds is None:
            self.init_bounds = list(self.bounds)

    @property
    def dim(self):
        return len(self.bounds)

    def draw_start(self, rng):
        lo, hi = np.array(self.init_bounds, dtype=float).T
        return rng.uniform(lo, hi)


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    n_evals: int
    starts: list = field(default_factory=list)


def minimize(objective, spec: OptimizerSpec, rng, x0=None) -> OptimizeResult:
    """Best of ``spec.restarts`` L-BFGS-B runs.

    The first run starts at ``x0`` when given; other starts are drawn from
    the init box.  Each run stops on projected-gradient norm below 1e-6,
    relative improvement below 1e-10, or ``spec.max_evals`` objective calls.
    """
    rng = as_rng(rng)
    best = {"x": None, "f": np.inf}
    total = 0
    starts = []
    k = spec.dim
    lo, hi = np.array(spec.bounds).T

    for restart in range(spec.restarts):
        if restart == 0 and x0 is not None:
            start = np.asarray(x0, dtype=float).copy()
        else:
            start = spec.draw_start(rng)
        starts.append(start)
        count = 0

        def f(x):
            nonlocal count
            if count >= spec.max_evals:
                raise _BudgetExhausted
            val = float(objective(x))
            count += 1
            if not np.isfinite(val):
                raise NonFiniteObjectiveError(f"objective returned {val!r} at x={x!r}")
            if val < best["f"]:
                best["f"] = val
                best["x"] = np.array(x, dtype=float)
            return val

        def fg(x):
            f0 = f(x)
            if count + 2 * k > spec.max_evals:
                raise _BudgetExhausted
            grad = np.empty(k)
            for i in range(k):
                # probes stay inside the box; one-sided at an active bound
                xp, xm = x.copy(), x.copy()
                xp[i] = min(x[i] + spec.h, hi[i])
                xm[i] = max(x[i] - spec.h, lo[i])
                span = xp[i] - xm[i]
                grad[i] = (f(xp) - f(xm)) / span if span > 0 else 0.0
            return f0, grad

        try:
            optimize.minimize(
                fg, start, jac=True, method="L-BFGS-B", bounds=spec.bounds,
                options={"gtol": GRAD_TOL, "ftol": REL_IMPROVEMENT_TOL,
                         "maxfun": 10 * spec.max_evals, "maxiter": 10 * spec.max_evals},
            )
        except _BudgetExhausted:
            pass
        total += count

    if best["x"] is None:  # pragma: no cover - budget >= 1 guarantees one call
        raise RuntimeError("optimizer made no evaluations")
    return OptimizeResult(best["x"], best["f"], total, starts)
