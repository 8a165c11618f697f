"""Reconstruction fidelity metrics: relative error, MSE, PSNR."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ZeroReferenceError
from .linalg import frobenius_norm


def relative_error(m: np.ndarray, l: np.ndarray) -> float:
    """Frobenius-norm relative error ``||m - l||_F / ||m||_F``."""
    m = np.asarray(m, dtype=np.float64)
    l = np.asarray(l, dtype=np.float64)
    if m.shape != l.shape:
        raise ValueError(f"shape mismatch: {m.shape} vs {l.shape}")
    denom = frobenius_norm(m)
    if denom == 0.0:
        raise ZeroReferenceError("reference matrix has zero norm")
    return frobenius_norm(m - l) / denom


def mean_squared_error(reference: np.ndarray, estimate: np.ndarray) -> float:
    """Mean of squared entrywise differences."""
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {estimate.shape}")
    return float(np.mean(np.square(reference - estimate)))


def psnr(reference: np.ndarray, estimate: np.ndarray, max_value: float) -> float:
    """Peak signal-to-noise ratio ``10 log10(max_value^2 / MSE)`` in dB.

    A perfect reconstruction (zero MSE) returns ``inf``.
    """
    if max_value <= 0:
        raise ValueError(f"max_value must be positive, got {max_value}")
    mse = mean_squared_error(reference, estimate)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


@dataclass(frozen=True)
class MetricReport:
    """Bundle of the fidelity metrics for one reconstruction."""

    relative_error: float
    mse: float
    psnr_db: float
    max_value: float

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(
    reference: np.ndarray, estimate: np.ndarray, max_value: float | None = None
) -> MetricReport:
    """All metrics at once.

    ``max_value`` defaults to the largest absolute entry of the reference
    (use 255 for 8-bit frame data).
    """
    reference = np.asarray(reference, dtype=np.float64)
    if max_value is None:
        max_value = float(np.max(np.abs(reference)))
    return MetricReport(
        relative_error=relative_error(reference, estimate),
        mse=mean_squared_error(reference, estimate),
        psnr_db=psnr(reference, estimate, max_value),
        max_value=max_value,
    )
