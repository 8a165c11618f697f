"""Reference solvers: single-level PALM and multiplicative-update NMF."""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bilevel import DESCENT_RTOL, BilevelProblem, SolverConfig, _descent_slack
from .linalg import as_matrix, frobenius_norm
from .prox import ProxOperator
from .report import RunReport

#: Denominator guard for the multiplicative updates.
NMF_EPS = 1e-12

#: Margin over the block Lipschitz estimate in the default PALM stepsizes.
PALM_STEP_MARGIN = 1.1


@dataclass
class PalmProblem:
    """Single-level two-block composite: ``f(x) + g(y) + H(x, y)``.

    ``stepsize_x``/``stepsize_y`` override the default per-block rule
    ``1 / (margin * L_block)`` built from the smoothness estimators.
    """

    prox_f: ProxOperator
    prox_g: ProxOperator
    grad_H_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_H_y: Callable[[np.ndarray, np.ndarray], np.ndarray]
    H_value: Callable[[np.ndarray, np.ndarray], float]
    smoothness_x: Callable[[np.ndarray], float] | None = None
    smoothness_y: Callable[[np.ndarray], float] | None = None
    stepsize_x: Callable[[np.ndarray, np.ndarray], float] | None = None
    stepsize_y: Callable[[np.ndarray, np.ndarray], float] | None = None

    def objective(self, x: np.ndarray, y: np.ndarray) -> float:
        return self.prox_f.value(x) + self.prox_g.value(y) + self.H_value(x, y)


def palm_from_bilevel(problem: BilevelProblem, level: str = "upper") -> PalmProblem:
    """Collapse a two-level problem to the chosen level's regularizers."""
    if level == "upper":
        prox_f, prox_g = problem.prox_f1, problem.prox_g1
    elif level == "lower":
        prox_f, prox_g = problem.prox_f2, problem.prox_g2
    else:
        raise ValueError(f"level must be 'upper' or 'lower', got {level!r}")
    return PalmProblem(
        prox_f=prox_f,
        prox_g=prox_g,
        grad_H_x=problem.grad_H_x,
        grad_H_y=problem.grad_H_y,
        H_value=problem.H_value,
        smoothness_x=problem.smoothness_x,
        smoothness_y=problem.smoothness_y,
    )


def _block_stepsize(rule, smoothness, point, other, label: str) -> float:
    if rule is not None:
        return rule(point, other)
    if smoothness is not None:
        return 1.0 / (PALM_STEP_MARGIN * max(smoothness(other), np.finfo(float).tiny))
    raise ValueError(f"no stepsize available for the {label} block")


def palm_solve(
    problem: PalmProblem,
    init_x: np.ndarray,
    init_y: np.ndarray,
    config: SolverConfig | None = None,
    callback: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> tuple[np.ndarray, np.ndarray, RunReport]:
    """Alternate the two prox-gradient block updates until displacement stalls.

    Each sweep must not increase the composite objective (within the same
    relative slack the two-level solver uses); otherwise both block
    stepsizes are halved and the sweep recomputed, down to
    ``config.nu_min``.
    """
    if config is None:
        config = SolverConfig()
    x = as_matrix(init_x, "init_x")
    y = as_matrix(init_y, "init_y")

    objective_trace: list[float] = []
    nu_trace: list[float] = []
    obj = problem.objective(x, y)
    converged = False
    stalled = False
    iterations = 0
    start = time.perf_counter()

    for iteration in range(1, config.max_iters + 1):
        scale = 1.0
        while True:
            if config.nu is not None:
                nu_x = config.nu * scale
            else:
                nu_x = scale * _block_stepsize(
                    problem.stepsize_x, problem.smoothness_x, x, y, "x"
                )
            x_new = problem.prox_f(x - nu_x * problem.grad_H_x(x, y), nu_x)
            if config.nu is not None:
                nu_y = config.nu * scale
            else:
                nu_y = scale * _block_stepsize(
                    problem.stepsize_y, problem.smoothness_y, y, x_new, "y"
                )
            y_new = problem.prox_g(y - nu_y * problem.grad_H_y(x_new, y), nu_y)
            new_obj = problem.objective(x_new, y_new)
            if new_obj <= obj + _descent_slack(obj):
                break
            scale *= 0.5
            if min(nu_x, nu_y) * 0.5 < config.nu_min:
                stalled = True
                break
        if stalled:
            break

        dx = frobenius_norm(x_new - x)
        dy = frobenius_norm(y_new - y)
        threshold = config.tol * (1.0 + frobenius_norm(x) + frobenius_norm(y))
        x, y, obj = x_new, y_new, new_obj
        iterations = iteration
        objective_trace.append(obj)
        nu_trace.append(nu_x)
        if callback is not None:
            callback(iteration, x, y)
        if max(dx, dy) <= threshold:
            converged = True
            break

    report = RunReport(
        method="palm",
        iterations=iterations,
        converged=converged,
        wall_time_seconds=time.perf_counter() - start,
        objective_trace=objective_trace,
        nu_trace=nu_trace,
        final_x=x,
        final_y=y,
    )
    return x, y, report


def nmf_lee_seung(
    m: np.ndarray, rank: int, config: SolverConfig | None = None
) -> tuple[np.ndarray, np.ndarray, RunReport]:
    """Multiplicative-update NMF for the squared Frobenius objective.

    Negative data entries are clipped to zero at ingestion (with a
    warning): the factor model is nonnegative, so signed data is where the
    method degrades.  The reported objective is ``||V - W H||_F^2`` on the
    clipped matrix ``V``; both factors stay entrywise nonnegative.
    """
    if config is None:
        config = SolverConfig()
    v = as_matrix(m, "data matrix")
    if rank < 1 or rank > min(v.shape):
        raise ValueError(f"rank must lie in [1, min(m, n)], got {rank}")
    if np.any(v < 0):
        warnings.warn(
            "data has negative entries; clipping to zero for the nonnegative "
            "factor model",
            stacklevel=2,
        )
        v = np.maximum(v, 0.0)

    rows, cols = v.shape
    rng = np.random.Generator(np.random.Philox(config.seed))
    scale = float(np.sqrt(max(v.mean(), 0.0) / rank))
    w = rng.random((rows, rank)) * scale
    h = rng.random((rank, cols)) * scale

    def objective() -> float:
        return frobenius_norm(v - w @ h) ** 2

    objective_trace: list[float] = []
    obj = objective()
    converged = False
    iterations = 0
    start = time.perf_counter()

    for iteration in range(1, config.max_iters + 1):
        h *= (w.T @ v) / (w.T @ w @ h + NMF_EPS)
        w *= (v @ h.T) / (w @ h @ h.T + NMF_EPS)
        new_obj = objective()
        iterations = iteration
        objective_trace.append(new_obj)
        if abs(obj - new_obj) <= config.tol * max(1.0, obj):
            obj = new_obj
            converged = True
            break
        obj = new_obj

    report = RunReport(
        method="nmf",
        iterations=iterations,
        converged=converged,
        wall_time_seconds=time.perf_counter() - start,
        objective_trace=objective_trace,
        final_x=w,
        final_y=h,
    )
    return w, h, report
