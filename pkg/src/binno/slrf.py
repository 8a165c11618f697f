"""Sparse low-rank factorization instance of the two-level solver.

Factor a data matrix ``M`` (m x n) as ``X @ Y`` with ``X`` (m x r) and
``Y`` (r x n), where the upper level penalizes entrywise sparsity of both
factors (l1) and the lower level penalizes their rank (nuclear norm),
coupled through the shared term ``0.5 * ||X Y - M||_F^2``.

This module supplies the problem adapter, the closed-form weight intervals
for ``alpha`` and ``beta``, the stepsize lower bounds those intervals need
(in cancellation-free form), and a one-call driver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bilevel
from .bilevel import BilevelProblem, SolverConfig, SolverState
from .exceptions import (
    DegenerateDenominatorError,
    EmptyIntervalError,
    ZeroReferenceError,
)
from .linalg import as_matrix, frobenius_norm, spectral_norm
from .metrics import evaluate
from .prox import l1_prox, nuclear_prox
from .report import RunReport

#: Slack when deciding that interval endpoints crossed.  At the stepsize
#: lower bound the endpoints coincide in exact arithmetic, so a strict
#: comparison would turn on last-ulp rounding.
INTERVAL_ATOL = 1e-12


@dataclass(frozen=True)
class SlrfParams:
    """Problem sizes and regularization weights.

    ``lambda1``/``lambda2`` weight the l1 penalties on X and Y (upper
    level); ``gamma1``/``gamma2`` weight the nuclear penalties (lower
    level).  All weights must be positive and ``rank <= min(m, n)``.
    """

    m: int
    n: int
    rank: int
    lambda1: float = 0.1
    lambda2: float = 0.1
    gamma1: float = 0.1
    gamma2: float = 0.1

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"matrix dimensions must be positive, got {self.m}x{self.n}")
        if not 1 <= self.rank <= min(self.m, self.n):
            raise ValueError(f"rank must lie in [1, min(m, n)], got {self.rank}")
        for name in ("lambda1", "lambda2", "gamma1", "gamma2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    @property
    def c1(self) -> float:
        """Subgradient bound of the X-block l1 term: lambda1 * sqrt(m*r)."""
        return self.lambda1 * math.sqrt(self.m * self.rank)

    @property
    def c2(self) -> float:
        """Subgradient bound of the X-block nuclear term: 2 * gamma1."""
        return 2.0 * self.gamma1

    @property
    def c3(self) -> float:
        """Subgradient bound of the Y-block l1 term: lambda2 * sqrt(r*n)."""
        return self.lambda2 * math.sqrt(self.rank * self.n)

    @property
    def c4(self) -> float:
        """Subgradient bound of the Y-block nuclear term: 2 * gamma2."""
        return 2.0 * self.gamma2


@dataclass(frozen=True)
class SlrfConstants:
    """Iterate-dependent constants: subgradient bounds and smoothness."""

    c1: float
    c2: float
    c3: float
    c4: float
    L1: float
    L2_u: float
    L2_l: float


def constants_at(
    params: SlrfParams, y: np.ndarray, x_u: np.ndarray, x_l: np.ndarray
) -> SlrfConstants:
    """Constants at the current iterates (recomputed every iteration)."""
    return SlrfConstants(
        c1=params.c1,
        c2=params.c2,
        c3=params.c3,
        c4=params.c4,
        L1=spectral_norm(y @ y.T),
        L2_u=spectral_norm(x_u.T @ x_u),
        L2_l=spectral_norm(x_l.T @ x_l),
    )


def build_problem(
    matrix: np.ndarray, params: SlrfParams, safety_factor: float = 1.0
) -> BilevelProblem:
    """Wire the factorization objectives into a two-level problem.

    ``grad_H_x = (XY - M) Y^T`` and ``grad_H_y = X^T (XY - M)``; the block
    smoothness estimates are the spectral norms of the Gram matrices.
    """
    m = as_matrix(matrix, "data matrix")
    if m.shape != (params.m, params.n):
        raise ValueError(f"data shape {m.shape} does not match params ({params.m}, {params.n})")

    problem = BilevelProblem(
        prox_f1=l1_prox(params.lambda1),
        prox_f2=nuclear_prox(params.gamma1),
        prox_g1=l1_prox(params.lambda2),
        prox_g2=nuclear_prox(params.gamma2),
        grad_H_x=lambda x, y: (x @ y - m) @ y.T,
        grad_H_y=lambda x, y: x.T @ (x @ y - m),
        H_value=lambda x, y: 0.5 * frobenius_norm(x @ y - m) ** 2,
        smoothness_x=lambda y: spectral_norm(y @ y.T),
        smoothness_y=lambda x: spectral_norm(x.T @ x),
        subgrad_bound_f1=params.c1,
        subgrad_bound_f2=params.c2,
        subgrad_bound_g1=params.c3,
        subgrad_bound_g2=params.c4,
    )
    problem.stepsize_rule = lambda state: stepsize_rule(state, params, safety_factor)
    return problem


def alpha_interval(params: SlrfParams, l1_smooth: float, nu: float) -> tuple[float, float]:
    """Closed-form admissible range for the X-block weight ``alpha``.

    ``l1_smooth`` is the X-block smoothness constant (spectral norm of
    ``Y Y^T``).  Raises ``EmptyIntervalError`` when the endpoints cross,
    which happens exactly when ``nu`` falls below :func:`nu_min_alpha`.
    """
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    inv_nu = 1.0 / nu
    lo = (inv_nu + l1_smooth) / (params.c1 + inv_nu + 2.0 * l1_smooth)
    hi = (params.gamma1 + l1_smooth) / (params.gamma1 + inv_nu + 2.0 * l1_smooth)
    if lo - hi > INTERVAL_ATOL:
        raise EmptyIntervalError(
            f"alpha interval empty: lo={lo:.6g} > hi={hi:.6g} (nu={nu:.6g} too small)"
        )
    return (lo, hi)


def beta_interval(
    params: SlrfParams, l2_u: float, l2_l: float, nu: float
) -> tuple[float, float]:
    """Closed-form admissible range for the Y-block weight ``beta``.

    ``l2_u``/``l2_l`` are the Y-block smoothness constants at the upper and
    lower tentative X iterates (spectral norms of the Gram matrices).
    """
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    inv_nu = 1.0 / nu
    lo = (inv_nu + l2_u) / (params.c3 + inv_nu + 2.0 * l2_u)
    hi = (params.gamma2 + l2_l) / (params.gamma2 + inv_nu + 2.0 * l2_l)
    if lo - hi > INTERVAL_ATOL:
        raise EmptyIntervalError(
            f"beta interval empty: lo={lo:.6g} > hi={hi:.6g} (nu={nu:.6g} too small)"
        )
    return (lo, hi)


def nu_min_alpha(params: SlrfParams, l1_smooth: float) -> float:
    """Smallest stepsize keeping the alpha interval nonempty.

    Evaluated in the rationalized form
    ``(sqrt((a+c)(a+b)) + a) / (ab + ac + bc)`` with ``a`` the smoothness
    constant, ``b = lambda1*sqrt(m*r)`` and ``c = gamma1``, which avoids the
    catastrophic cancellation of the textbook form
    ``1 / (sqrt((a+c)(a+b)) - a)`` when ``a`` dominates.
    """
    if l1_smooth < 0:
        raise ValueError(f"smoothness constant must be nonnegative, got {l1_smooth}")
    return _nu_min_stable(a=l1_smooth, b=params.c1, c=params.gamma1)


def _nu_min_stable(a: float, b: float, c: float) -> float:
    denominator = a * b + a * c + b * c
    if denominator == 0.0:
        raise DegenerateDenominatorError(
            "stepsize bound undefined: all regularizer terms are zero"
        )
    return (math.sqrt((a + c) * (a + b)) + a) / denominator


def nu_min_beta(params: SlrfParams, l2_u: float, l2_l: float) -> float:
    """Smallest stepsize keeping the beta interval nonempty.

    Rationalized form ``2 (sqrt(N^2 + 4c) + N) / (4c)`` with
    ``N = l2_u + l2_l`` and ``c`` the cross-product sum of the Y-block
    bounds, replacing ``2 / (sqrt(N^2 + 4c) - N)``.
    """
    if l2_u < 0 or l2_l < 0:
        raise ValueError("smoothness constants must be nonnegative")
    cross = (
        params.lambda2 * params.gamma2 * math.sqrt(params.rank * params.n)
        + params.gamma2 * l2_u
        + l2_l * params.c3
    )
    return _nu_min_beta_stable(l2_u + l2_l, cross)


def _nu_min_beta_stable(n_sum: float, cross: float) -> float:
    if cross == 0.0:
        raise DegenerateDenominatorError(
            "stepsize bound undefined: cross-product term is zero"
        )
    return 2.0 * (math.sqrt(n_sum * n_sum + 4.0 * cross) + n_sum) / (4.0 * cross)


def stepsize_rule(
    state: SolverState, params: SlrfParams, safety_factor: float = 1.0
) -> float:
    """Per-iteration stepsize: the larger of the two interval bounds.

    The Y-block smoothness is estimated at the current X (the tentative
    iterates do not exist yet when the stepsize is chosen).
    """
    if safety_factor <= 0:
        raise ValueError(f"safety_factor must be positive, got {safety_factor}")
    l1_smooth = spectral_norm(state.y @ state.y.T)
    l2_smooth = spectral_norm(state.x.T @ state.x)
    return safety_factor * max(
        nu_min_alpha(params, l1_smooth),
        nu_min_beta(params, l2_smooth, l2_smooth),
    )


def default_init(
    matrix: np.ndarray, params: SlrfParams, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded Gaussian factors scaled from the data norm.

    Entries are standard normal times ``||M||_F / sqrt(m r)`` for X and
    ``||M||_F / sqrt(r n)`` for Y; the counter-based generator makes the
    draw reproducible across platforms.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    norm = frobenius_norm(matrix)
    x0 = rng.standard_normal((params.m, params.rank)) * (
        norm / math.sqrt(params.m * params.rank)
    )
    y0 = rng.standard_normal((params.rank, params.n)) * (
        norm / math.sqrt(params.rank * params.n)
    )
    return x0, y0


def solve_slrf(
    matrix: np.ndarray,
    params: SlrfParams,
    config: SolverConfig | None = None,
    init: tuple[np.ndarray, np.ndarray] | None = None,
    callback=None,
) -> tuple[np.ndarray, np.ndarray, RunReport]:
    """Factor ``matrix`` with the two-level solver; returns (X, Y, report).

    The report carries the objective traces plus reconstruction metrics of
    ``X @ Y`` against the input.
    """
    if config is None:
        config = SolverConfig()
    m = as_matrix(matrix, "data matrix")
    problem = build_problem(m, params, safety_factor=config.safety_factor)
    if init is None:
        init = default_init(m, params, seed=config.seed)
    report = bilevel.solve(problem, init[0], init[1], config, callback=callback)
    x, y = report.final_x, report.final_y
    try:
        report.metrics = evaluate(m, x @ y).to_dict()
    except ZeroReferenceError:
        report.metrics = None
    return x, y, report
