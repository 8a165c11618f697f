"""Two-level blockwise proximal-gradient solver with certified descent.

Each iteration takes four tentative prox-gradient steps (one per level and
per block), derives per-iteration descent constants, picks convex
combination weights ``(alpha, beta)`` inside analytically derived intervals,
and certifies every candidate by direct evaluation of both level objectives.
If no candidate certifies, the stepsize is halved and the tentative steps
recomputed; the certified non-increase of both objectives is the contract
every accepted iterate satisfies.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import EmptyIntervalError, NoDescentWeightError
from .linalg import as_matrix, frobenius_norm
from .prox import ProxOperator
from .report import RunReport

#: Relative slack used when certifying objective non-increase.
DESCENT_RTOL = 1e-12

#: Number of grid points scanned inside a weight interval.
GRID_POINTS = 11

#: Coarse weight grid used when the analytic intervals are empty.
FALLBACK_GRID = (0.0, 0.5, 1.0)

#: Overshoot (relative to objective scale) that aborts a candidate scan.
#: A first candidate this far above the current objectives means the
#: stepsize overshot by orders of magnitude; skipping the rest of the scan
#: costs at most one extra halving and never admits an uncertified step.
OVERSHOOT_ABORT = 1.0


@dataclass
class BilevelProblem:
    """Two composite objectives coupled through a shared smooth term.

    The upper objective is ``f1(x) + g1(y) + H(x, y)`` and the lower one is
    ``f2(x) + g2(y) + H(x, y)``.  ``smoothness_x(y)`` estimates the
    Lipschitz constant of ``grad_H_x(., y)`` and ``smoothness_y(x)`` the one
    of ``grad_H_y(x, .)``.  The ``subgrad_bound_*`` constants bound the
    subgradient norms of the four regularizers over the iterates.
    """

    prox_f1: ProxOperator
    prox_f2: ProxOperator
    prox_g1: ProxOperator
    prox_g2: ProxOperator
    grad_H_x: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_H_y: Callable[[np.ndarray, np.ndarray], np.ndarray]
    H_value: Callable[[np.ndarray, np.ndarray], float]
    smoothness_x: Callable[[np.ndarray], float]
    smoothness_y: Callable[[np.ndarray], float]
    subgrad_bound_f1: float = 0.0
    subgrad_bound_f2: float = 0.0
    subgrad_bound_g1: float = 0.0
    subgrad_bound_g2: float = 0.0
    stepsize_rule: Callable[["SolverState"], float] | None = None

    def psi1(self, x: np.ndarray, y: np.ndarray) -> float:
        """Upper-level objective value."""
        return self.prox_f1.value(x) + self.prox_g1.value(y) + self.H_value(x, y)

    def psi2(self, x: np.ndarray, y: np.ndarray) -> float:
        """Lower-level objective value."""
        return self.prox_f2.value(x) + self.prox_g2.value(y) + self.H_value(x, y)


@dataclass
class DescentConstants:
    """Per-iteration scalars feeding the weight intervals.

    ``q1..q4`` are the inner products between the realized composite
    subgradients and the matching prox-gradient maps; ``l_i = |q_i|``.
    ``k_i = (c_i + L)(1/nu + L)`` with the smoothness constant matching the
    block and level of the bounded cross term.
    """

    c1: float
    c2: float
    c3: float
    c4: float
    L1: float
    L2u: float
    L2l: float
    q1: float
    q2: float
    q3: float
    q4: float
    l1: float
    l2: float
    l3: float
    l4: float
    k1: float
    k2: float
    k3: float
    k4: float
    nu: float


@dataclass
class CombinationWeights:
    """Selected convex combination weights plus the intervals they came from."""

    alpha: float
    beta: float
    alpha_interval: tuple[float, float]
    beta_interval: tuple[float, float]


@dataclass
class SolverState:
    """Mutable state of one solver run (instance-confined).

    ``block_scale`` is the per-block stepsize override hook: the x-steps use
    ``nu * block_scale[0]`` and the y-steps ``nu * block_scale[1]``.  The
    default ``(1, 1)`` keeps the single shared stepsize.
    """

    x: np.ndarray
    y: np.ndarray
    x_u: np.ndarray | None = None
    y_u: np.ndarray | None = None
    x_l: np.ndarray | None = None
    y_l: np.ndarray | None = None
    nu: float = 0.0
    block_scale: tuple[float, float] = (1.0, 1.0)
    weights: CombinationWeights | None = None
    psi1_history: list[float] = field(default_factory=list)
    psi2_history: list[float] = field(default_factory=list)
    iteration: int = 0

    @property
    def nu_x(self) -> float:
        return self.nu * self.block_scale[0]

    @property
    def nu_y(self) -> float:
        return self.nu * self.block_scale[1]


@dataclass
class SolverConfig:
    """Knobs shared by the two-level solver and the baselines.

    ``nu`` fixes the stepsize (bypassing the problem's rule); ``nu_min``
    bounds the halving safeguard from below; ``safety_factor`` scales the
    problem's stepsize rule; ``seed`` controls any initialization the
    caller derives from the config.
    """

    max_iters: int = 1000
    tol: float = 1e-4
    nu_min: float = 1e-10
    nu: float | None = None
    safety_factor: float = 1.0
    seed: int = 0
    block_scale: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.nu_min <= 0:
            raise ValueError(f"nu_min must be positive, got {self.nu_min}")
        if self.nu is not None and self.nu <= 0:
            raise ValueError(f"fixed stepsize nu must be positive, got {self.nu}")
        if len(self.block_scale) != 2 or min(self.block_scale) <= 0:
            raise ValueError(f"block_scale must be two positive factors, got {self.block_scale}")


def upper_x_step(
    state: SolverState, problem: BilevelProblem, grad_x: np.ndarray | None = None
) -> np.ndarray:
    """Tentative x-step of the upper level at the current iterate."""
    if grad_x is None:
        grad_x = problem.grad_H_x(state.x, state.y)
    nu = state.nu_x
    return problem.prox_f1(state.x - nu * grad_x, nu)


def lower_x_step(
    state: SolverState, problem: BilevelProblem, grad_x: np.ndarray | None = None
) -> np.ndarray:
    """Tentative x-step of the lower level; same inner gradient point."""
    if grad_x is None:
        grad_x = problem.grad_H_x(state.x, state.y)
    nu = state.nu_x
    return problem.prox_f2(state.x - nu * grad_x, nu)


def upper_y_step(
    state: SolverState,
    problem: BilevelProblem,
    x_u: np.ndarray,
    grad_y: np.ndarray | None = None,
) -> np.ndarray:
    """Tentative y-step of the upper level; gradient taken at ``x_u``."""
    if grad_y is None:
        grad_y = problem.grad_H_y(x_u, state.y)
    nu = state.nu_y
    return problem.prox_g1(state.y - nu * grad_y, nu)


def lower_y_step(
    state: SolverState,
    problem: BilevelProblem,
    x_l: np.ndarray,
    grad_y: np.ndarray | None = None,
) -> np.ndarray:
    """Tentative y-step of the lower level; gradient taken at ``x_l``."""
    if grad_y is None:
        grad_y = problem.grad_H_y(x_l, state.y)
    nu = state.nu_y
    return problem.prox_g2(state.y - nu * grad_y, nu)


def compute_descent_constants(
    state: SolverState,
    problem: BilevelProblem,
    grad_x: np.ndarray | None = None,
    grad_y_u: np.ndarray | None = None,
    grad_y_l: np.ndarray | None = None,
) -> DescentConstants:
    """Evaluate the per-iteration scalars behind the weight intervals.

    The realized regularizer subgradient is the one certified by the prox
    optimality condition, i.e. ``G - grad_H`` at the prox output; with that
    choice each ``q_i`` reduces to the squared norm of the matching
    prox-gradient map (the inner products are still formed explicitly).
    The sign of ``q_i`` never enters downstream: only ``l_i = |q_i|`` does.
    """
    if state.x_u is None or state.x_l is None or state.y_u is None or state.y_l is None:
        raise ValueError("tentative iterates must be computed first")
    if state.nu <= 0:
        raise ValueError("state.nu must be positive")
    nu_x, nu_y = state.nu_x, state.nu_y
    if grad_x is None:
        grad_x = problem.grad_H_x(state.x, state.y)
    if grad_y_u is None:
        grad_y_u = problem.grad_H_y(state.x_u, state.y)
    if grad_y_l is None:
        grad_y_l = problem.grad_H_y(state.x_l, state.y)

    g_u_x = (state.x - state.x_u) / nu_x
    g_l_x = (state.x - state.x_l) / nu_x
    g_u_y = (state.y - state.y_u) / nu_y
    g_l_y = (state.y - state.y_l) / nu_y

    # Realized subgradients pulled back through prox optimality.
    s_f1 = g_u_x - grad_x
    s_f2 = g_l_x - grad_x
    s_g1 = g_u_y - grad_y_u
    s_g2 = g_l_y - grad_y_l

    q1 = float(np.vdot(s_f1 + grad_x, g_u_x))
    q2 = float(np.vdot(s_f2 + grad_x, g_l_x))
    q3 = float(np.vdot(s_g1 + grad_y_u, g_u_y))
    q4 = float(np.vdot(s_g2 + grad_y_l, g_l_y))

    c1 = problem.subgrad_bound_f1
    c2 = problem.subgrad_bound_f2
    c3 = problem.subgrad_bound_g1
    c4 = problem.subgrad_bound_g2
    L1 = problem.smoothness_x(state.y)
    L2u = problem.smoothness_y(state.x_u)
    L2l = problem.smoothness_y(state.x_l)

    return DescentConstants(
        c1=c1,
        c2=c2,
        c3=c3,
        c4=c4,
        L1=L1,
        L2u=L2u,
        L2l=L2l,
        q1=q1,
        q2=q2,
        q3=q3,
        q4=q4,
        l1=abs(q1),
        l2=abs(q2),
        l3=abs(q3),
        l4=abs(q4),
        k1=(c1 + L1) * (1.0 / nu_x + L1),
        k2=(c2 + L1) * (1.0 / nu_x + L1),
        k3=(c3 + L2u) * (1.0 / nu_y + L2u),
        k4=(c4 + L2l) * (1.0 / nu_y + L2l),
        nu=state.nu,
    )


def weight_interval(k_lower: float, l_lower: float, l_upper: float, k_upper: float) -> tuple[float, float]:
    """Interval ``[k1/(l1+k1), l2/(l2+k2)]`` clipped to [0, 1].

    Degenerate ratios (0/0) resolve to the unconstrained endpoint: a zero
    ``k`` imposes no lower restriction and a zero ``l`` with zero ``k``
    imposes no upper one.
    """
    lo = k_lower / (l_lower + k_lower) if (l_lower + k_lower) > 0 else 0.0
    hi = l_upper / (l_upper + k_upper) if (l_upper + k_upper) > 0 else 1.0
    return (min(max(lo, 0.0), 1.0), min(max(hi, 0.0), 1.0))


def combine(
    state: SolverState, weights: CombinationWeights
) -> tuple[np.ndarray, np.ndarray]:
    """Blockwise convex combination of the four tentative iterates."""
    if not (0.0 <= weights.alpha <= 1.0 and 0.0 <= weights.beta <= 1.0):
        raise ValueError(f"weights must lie in [0, 1], got {weights.alpha}, {weights.beta}")
    x_new = _combine_block(weights.alpha, state.x_u, state.x_l)
    y_new = _combine_block(weights.beta, state.y_u, state.y_l)
    return x_new, y_new


def _combine_block(w: float, upper: np.ndarray, lower: np.ndarray) -> np.ndarray:
    return w * upper + (1.0 - w) * lower


def _descent_slack(psi: float) -> float:
    return DESCENT_RTOL * max(1.0, abs(psi))


def _interval_candidates(interval: tuple[float, float]) -> list[float]:
    lo, hi = interval
    return [0.5 * (lo + hi), *np.linspace(lo, hi, GRID_POINTS)]


class _PairEvaluator:
    """Caches per-weight block values while scanning candidate pairs."""

    def __init__(self, state: SolverState, problem: BilevelProblem):
        self.state = state
        self.problem = problem
        self._x_cache: dict[float, tuple[np.ndarray, float, float]] = {}
        self._y_cache: dict[float, tuple[np.ndarray, float, float]] = {}

    def _x_parts(self, alpha: float):
        hit = self._x_cache.get(alpha)
        if hit is None:
            x_new = _combine_block(alpha, self.state.x_u, self.state.x_l)
            hit = (
                x_new,
                self.problem.prox_f1.value(x_new),
                self.problem.prox_f2.value(x_new),
            )
            self._x_cache[alpha] = hit
        return hit

    def _y_parts(self, beta: float):
        hit = self._y_cache.get(beta)
        if hit is None:
            y_new = _combine_block(beta, self.state.y_u, self.state.y_l)
            hit = (
                y_new,
                self.problem.prox_g1.value(y_new),
                self.problem.prox_g2.value(y_new),
            )
            self._y_cache[beta] = hit
        return hit

    def evaluate(self, alpha: float, beta: float):
        """Objective pair at the combined candidate iterate."""
        x_new, f1, f2 = self._x_parts(alpha)
        y_new, g1, g2 = self._y_parts(beta)
        h = self.problem.H_value(x_new, y_new)
        return x_new, y_new, f1 + g1 + h, f2 + g2 + h


def _select_weights(
    constants: DescentConstants,
    state: SolverState,
    problem: BilevelProblem,
    coarse_fallback: bool = True,
):
    """Pick certified weights; also return the combined iterate and values.

    Scans the analytic intervals first (midpoints, then a zipped grid).
    When an interval is empty, or the interval grid certifies nothing,
    falls back to a coarse grid over [0, 1] keeping the best certified pair
    (smallest worst-case objective change).  Raises
    ``NoDescentWeightError`` when nothing certifies, which signals the
    caller to shrink the stepsize.
    """
    alpha_interval = weight_interval(constants.k1, constants.l1, constants.l2, constants.k2)
    beta_interval = weight_interval(constants.k3, constants.l3, constants.l4, constants.k4)
    intervals_empty = alpha_interval[0] > alpha_interval[1] or beta_interval[0] > beta_interval[1]

    if intervals_empty and not coarse_fallback:
        raise EmptyIntervalError(
            f"alpha interval {alpha_interval}, beta interval {beta_interval}"
        )

    psi1_k = state.psi1_history[-1] if state.psi1_history else problem.psi1(state.x, state.y)
    psi2_k = state.psi2_history[-1] if state.psi2_history else problem.psi2(state.x, state.y)
    slack1 = _descent_slack(psi1_k)
    slack2 = _descent_slack(psi2_k)
    evaluator = _PairEvaluator(state, problem)

    def certified(psi1_new: float, psi2_new: float) -> bool:
        return psi1_new <= psi1_k + slack1 and psi2_new <= psi2_k + slack2

    def hopeless(psi1_new: float, psi2_new: float) -> bool:
        scale = OVERSHOOT_ABORT * max(1.0, abs(psi1_k), abs(psi2_k))
        return psi1_new > psi1_k + scale and psi2_new > psi2_k + scale

    if not intervals_empty:
        # First certified candidate wins, keeping the weights inside the
        # analytic intervals; nothing certified means the stepsize must
        # shrink.
        pairs = zip(_interval_candidates(alpha_interval), _interval_candidates(beta_interval))
        for scanned, (alpha, beta) in enumerate(pairs):
            x_new, y_new, psi1_new, psi2_new = evaluator.evaluate(alpha, beta)
            if certified(psi1_new, psi2_new):
                weights = CombinationWeights(alpha, beta, alpha_interval, beta_interval)
                return weights, x_new, y_new, psi1_new, psi2_new
            if scanned == 0 and hopeless(psi1_new, psi2_new):
                break
        raise NoDescentWeightError(
            f"no in-interval weight pair certified descent at nu={constants.nu:.3e}"
        )

    # Empty intervals: the analytic conditions have nothing to offer at this
    # stepsize, so keep the descent contract primary with a coarse certified
    # grid, preferring the pair with the best worst-case objective change.
    best = None
    for scanned, (alpha, beta) in enumerate(
        (a, b) for a in FALLBACK_GRID for b in FALLBACK_GRID
    ):
        x_new, y_new, psi1_new, psi2_new = evaluator.evaluate(alpha, beta)
        if scanned == 0 and hopeless(psi1_new, psi2_new):
            break
        if not certified(psi1_new, psi2_new):
            continue
        score = max(psi1_new - psi1_k, psi2_new - psi2_k)
        if best is None or score < best[0]:
            best = (score, alpha, beta, x_new, y_new, psi1_new, psi2_new)
    if best is not None:
        _, alpha, beta, x_new, y_new, psi1_new, psi2_new = best
        weights = CombinationWeights(alpha, beta, alpha_interval, beta_interval)
        return weights, x_new, y_new, psi1_new, psi2_new

    raise NoDescentWeightError(
        f"no weight pair certified descent at nu={constants.nu:.3e}"
    )


def select_weights(
    constants: DescentConstants,
    state: SolverState,
    problem: BilevelProblem,
    coarse_fallback: bool = True,
) -> CombinationWeights:
    """Certified combination weights for the current tentative iterates."""
    weights, *_ = _select_weights(constants, state, problem, coarse_fallback)
    return weights


def _tentative_steps(state, problem, grad_x):
    """All four prox-gradient steps at the current stepsize."""
    state.x_u = upper_x_step(state, problem, grad_x)
    state.x_l = lower_x_step(state, problem, grad_x)
    grad_y_u = problem.grad_H_y(state.x_u, state.y)
    grad_y_l = problem.grad_H_y(state.x_l, state.y)
    state.y_u = upper_y_step(state, problem, state.x_u, grad_y_u)
    state.y_l = lower_y_step(state, problem, state.x_l, grad_y_l)
    return grad_y_u, grad_y_l


def solve(
    problem: BilevelProblem,
    init_x: np.ndarray,
    init_y: np.ndarray,
    config: SolverConfig | None = None,
    callback: Callable[[SolverState], None] | None = None,
) -> RunReport:
    """Run the two-level iteration until displacement falls below tolerance.

    Every accepted iterate satisfies certified non-increase of both
    objectives.  The stepsize comes from ``config.nu`` when set, otherwise
    from ``problem.stepsize_rule``, and is halved whenever no weight pair
    certifies descent; shrinking below ``config.nu_min`` aborts the run
    with a report flagged non-converged.
    """
    if config is None:
        config = SolverConfig()
    if config.nu is None and problem.stepsize_rule is None:
        raise ValueError("no stepsize available: set config.nu or problem.stepsize_rule")

    x = as_matrix(init_x, "init_x")
    y = as_matrix(init_y, "init_y")
    state = SolverState(x=x, y=y, block_scale=tuple(config.block_scale))
    state.psi1_history.append(problem.psi1(x, y))
    state.psi2_history.append(problem.psi2(x, y))

    alpha_trace: list[float] = []
    beta_trace: list[float] = []
    nu_trace: list[float] = []
    converged = False
    stalled = False
    start = time.perf_counter()

    for iteration in range(1, config.max_iters + 1):
        nu = config.nu if config.nu is not None else problem.stepsize_rule(state)
        grad_x = problem.grad_H_x(state.x, state.y)

        selection = None
        while True:
            state.nu = nu
            grad_y_u, grad_y_l = _tentative_steps(state, problem, grad_x)
            constants = compute_descent_constants(
                state, problem, grad_x, grad_y_u, grad_y_l
            )
            try:
                selection = _select_weights(constants, state, problem)
                break
            except NoDescentWeightError:
                nu *= 0.5
                if nu < config.nu_min:
                    stalled = True
                    break
        if stalled:
            break

        weights, x_new, y_new, psi1_new, psi2_new = selection
        state.weights = weights
        dx = frobenius_norm(x_new - state.x)
        dy = frobenius_norm(y_new - state.y)
        threshold = config.tol * (1.0 + frobenius_norm(state.x) + frobenius_norm(state.y))

        state.x = x_new
        state.y = y_new
        state.iteration = iteration
        state.psi1_history.append(psi1_new)
        state.psi2_history.append(psi2_new)
        alpha_trace.append(weights.alpha)
        beta_trace.append(weights.beta)
        nu_trace.append(nu)
        if callback is not None:
            callback(state)

        if max(dx, dy) <= threshold:
            converged = True
            break

    wall = time.perf_counter() - start
    return RunReport(
        method="binno",
        iterations=state.iteration,
        converged=converged,
        wall_time_seconds=wall,
        psi1_trace=state.psi1_history[1:],
        psi2_trace=state.psi2_history[1:],
        alpha_trace=alpha_trace,
        beta_trace=beta_trace,
        nu_trace=nu_trace,
        final_x=state.x,
        final_y=state.y,
    )
