"""Run reports: per-iteration traces plus final metrics, JSON-serializable."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RunReport:
    """Outcome of one solver run.

    Two-level runs fill ``psi1_trace``/``psi2_trace`` plus the weight and
    stepsize traces; baselines fill ``objective_trace`` instead.  The final
    iterates ride along for in-process consumers but are never serialized.
    ``wall_time_seconds`` is the only field excluded from determinism
    comparisons.
    """

    method: str
    iterations: int
    converged: bool
    wall_time_seconds: float
    psi1_trace: list[float] | None = None
    psi2_trace: list[float] | None = None
    alpha_trace: list[float] | None = None
    beta_trace: list[float] | None = None
    nu_trace: list[float] | None = None
    objective_trace: list[float] | None = None
    metrics: dict | None = None
    final_x: np.ndarray | None = field(default=None, repr=False)
    final_y: np.ndarray | None = field(default=None, repr=False)

    _JSON_FIELDS = (
        "method",
        "iterations",
        "converged",
        "psi1_trace",
        "psi2_trace",
        "alpha_trace",
        "beta_trace",
        "nu_trace",
        "objective_trace",
        "wall_time_seconds",
        "metrics",
    )

    def to_json_dict(self) -> dict:
        """Serializable dict; trace fields left unset are omitted."""
        out = {}
        for name in self._JSON_FIELDS:
            value = getattr(self, name)
            if value is None:
                continue
            out[name] = value
        return out

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent, sort_keys=True)
