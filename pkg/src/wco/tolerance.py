"""Default numerical tolerances and the comparison helper used everywhere."""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    rel: float = 1e-12      # relative, sums of <= 1e3 terms
    abs: float = 1e-10      # residuals and oracle comparisons
    oracle: float = 1e-9    # dense eigen/SVD oracles
    psd: float = 1e-9       # minimum-eigenvalue threshold for PSD tests
    solver: float = 1e-8    # acceptance residual for solver output
    merge: float = 1e-12    # location merging in probability families

    def as_dict(self) -> dict:
        return asdict(self)

    def with_abs(self, value: float) -> "Tolerances":
        return replace(self, abs=float(value))


DEFAULT = Tolerances()


def from_env(base: Tolerances = DEFAULT) -> Tolerances:
    """Apply the ``WCO_TOL`` environment override to the residual tolerance."""
    raw = os.environ.get("WCO_TOL")
    if raw is None or raw.strip() == "":
        return base
    return base.with_abs(float(raw))


def deviation(a, b) -> float:
    """Largest scaled deviation ``|a-b| / max(1, |a|, |b|)`` over all entries."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.size == 0 and b.size == 0:
        return 0.0
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale))


def close(a, b, tol: float) -> bool:
    return deviation(a, b) <= tol
