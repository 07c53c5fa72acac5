"""Phase-one simplex for equality-constrained feasibility problems.

Finds ``x >= 0`` with ``A x = b`` or reports the smallest total artificial
infeasibility reached. Dense tableau with Dantzig pricing; after a run of
degenerate pivots it switches to Bland's rule for good, which rules out
cycling. Deterministic, and adequate for a few hundred unknowns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    x: np.ndarray
    infeasibility: float  # phase-one objective: sum of artificial variables
    iterations: int


def phase_one(
    a_eq,
    b_eq,
    *,
    tol: float = 1e-9,
    pivot_tol: float = 1e-11,
    max_iter: int | None = None,
) -> FeasibilityResult:
    a = np.array(a_eq, dtype=float, copy=True)
    b = np.array(b_eq, dtype=float, copy=True)
    m, n = a.shape
    if b.shape != (m,):
        raise ValueError("b_eq must have one entry per row of a_eq")

    # scale rows, then make the right-hand side nonnegative
    scale = np.max(np.abs(a), axis=1, initial=0.0)
    scale = np.where(scale > 0, scale, np.maximum(np.abs(b), 1.0))
    a /= scale[:, None]
    b /= scale
    neg = b < 0
    a[neg] *= -1
    b[neg] *= -1

    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n:n + m] = np.eye(m)
    tab[:m, -1] = b
    # reduced costs of the phase-one objective (sum of artificials)
    tab[m, :n] = -a.sum(axis=0)
    tab[m, -1] = -b.sum()
    basis = list(range(n, n + m))

    limit = max_iter if max_iter is not None else 50 * (n + m) + 100
    bland = False
    stall = 0
    it = 0
    while it < limit:
        cost = tab[m, :-1]
        entering = np.flatnonzero(cost < -pivot_tol)
        if entering.size == 0:
            break
        j = int(entering[0]) if bland else int(entering[np.argmin(cost[entering])])
        col = tab[:m, j]
        rows = np.flatnonzero(col > pivot_tol)
        if rows.size == 0:
            # cannot happen for a phase-one problem (objective bounded below)
            break
        ratios = tab[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + pivot_tol * max(1.0, abs(best))]
        i = int(min(ties, key=lambda r: basis[r]))
        if best <= pivot_tol:
            stall += 1
            bland = bland or stall > 50
        else:
            stall = 0
        pivot = tab[i] / tab[i, j]
        factor = tab[:, j].copy()
        factor[i] = 0.0
        tab -= np.outer(factor, pivot)
        tab[i] = pivot
        basis[i] = j
        it += 1

    x = np.zeros(n + m)
    x[basis] = tab[:m, -1]
    infeasibility = float(np.sum(np.clip(x[n:], 0.0, None)))
    return FeasibilityResult(infeasibility <= tol, x[:n], infeasibility, it)
