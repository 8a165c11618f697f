"""Proximal operators, the prox-gradient map, and Moreau envelope utilities.

A :class:`ProxOperator` bundles the prox map of a convex regularizer with
the regularizer's value function; solvers need both (the value enters the
objective traces and the descent certification).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import frobenius_norm, nuclear_norm, svd


def soft_threshold(a: np.ndarray, tau: float) -> np.ndarray:
    """Entrywise shrinkage ``sign(a) * max(|a| - tau, 0)``.

    This is the prox map of ``tau * ||.||_1``.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    a = np.asarray(a, dtype=np.float64)
    return np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)


def svt(a: np.ndarray, tau: float) -> np.ndarray:
    """Singular value thresholding: soft-threshold the spectrum of *a*.

    This is the prox map of ``tau * ||.||_*`` (nuclear norm).
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    u, sigma, vt = svd(a)
    shrunk = np.maximum(sigma - tau, 0.0)
    return (u * shrunk) @ vt


@dataclass(frozen=True)
class ProxOperator:
    """Prox map of a regularizer plus the regularizer's value function.

    ``apply(point, nu)`` returns ``argmin_z  reg(z) + ||z - point||_F^2 / (2 nu)``
    and ``value(point)`` evaluates the regularizer itself.
    """

    apply: Callable[[np.ndarray, float], np.ndarray]
    value: Callable[[np.ndarray], float]
    name: str = field(default="", compare=False)

    def __call__(self, point: np.ndarray, nu: float) -> np.ndarray:
        if nu <= 0:
            raise ValueError(f"stepsize nu must be positive, got {nu}")
        return self.apply(point, nu)


def l1_prox(weight: float) -> ProxOperator:
    """Prox operator of ``weight * ||.||_1`` (entrywise soft thresholding)."""
    if weight <= 0:
        raise ValueError(f"weight must be positive, got {weight}")
    return ProxOperator(
        apply=lambda p, nu: soft_threshold(p, nu * weight),
        value=lambda p: weight * float(np.sum(np.abs(p))),
        name=f"l1({weight:g})",
    )


def nuclear_prox(weight: float) -> ProxOperator:
    """Prox operator of ``weight * ||.||_*`` (singular value thresholding)."""
    if weight <= 0:
        raise ValueError(f"weight must be positive, got {weight}")
    return ProxOperator(
        apply=lambda p, nu: svt(p, nu * weight),
        value=lambda p: weight * nuclear_norm(p),
        name=f"nuclear({weight:g})",
    )


def zero_prox() -> ProxOperator:
    """Prox operator of the zero regularizer (the identity map)."""
    return ProxOperator(
        apply=lambda p, nu: np.array(p, dtype=np.float64),
        value=lambda p: 0.0,
        name="zero",
    )


def nonnegative_prox() -> ProxOperator:
    """Prox of the nonnegativity indicator (projection onto the orthant)."""

    def value(p: np.ndarray) -> float:
        return 0.0 if np.all(np.asarray(p) >= 0) else float("inf")

    return ProxOperator(
        apply=lambda p, nu: np.maximum(np.asarray(p, dtype=np.float64), 0.0),
        value=value,
        name="nonnegative",
    )


@dataclass(frozen=True)
class GradientMap:
    """Prox-gradient map ``g = (point - prox(point - nu*grad)) / nu``.

    ``prox_point`` is the prox output itself; it equals the induced update
    ``point - nu * g`` exactly (by construction, no rounding in between).
    """

    g: np.ndarray
    nu: float
    point: np.ndarray
    prox_point: np.ndarray

    @property
    def induced_update(self) -> np.ndarray:
        return self.prox_point

    def norm(self) -> float:
        return frobenius_norm(self.g)


def prox_gradient_map(
    x: np.ndarray, grad: np.ndarray, prox: ProxOperator, nu: float
) -> GradientMap:
    """Build the prox-gradient map at *x* for the smooth gradient *grad*."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if x.shape != grad.shape:
        raise ValueError(f"shape mismatch: point {x.shape} vs gradient {grad.shape}")
    if nu <= 0:
        raise ValueError(f"stepsize nu must be positive, got {nu}")
    prox_point = prox(x - nu * grad, nu)
    return GradientMap(g=(x - prox_point) / nu, nu=nu, point=x, prox_point=prox_point)


def moreau_envelope_value(prox: ProxOperator, x: np.ndarray, nu: float) -> float:
    """Value of the Moreau envelope of the regularizer at *x*.

    Evaluates ``reg(p) + ||p - x||_F^2 / (2 nu)`` at the prox point ``p``.
    """
    if nu <= 0:
        raise ValueError(f"stepsize nu must be positive, got {nu}")
    p = prox(x, nu)
    return prox.value(p) + frobenius_norm(p - np.asarray(x)) ** 2 / (2.0 * nu)


def moreau_gradient(prox: ProxOperator, x: np.ndarray, nu: float) -> np.ndarray:
    """Gradient of the Moreau envelope: ``(x - prox(x, nu)) / nu``."""
    if nu <= 0:
        raise ValueError(f"stepsize nu must be positive, got {nu}")
    x = np.asarray(x, dtype=np.float64)
    return (x - prox(x, nu)) / nu
