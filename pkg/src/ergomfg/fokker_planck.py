"""Stationary Fokker-Planck equation ``-Delta m - div(m b) = 0``.

The discrete FP operator is the adjoint of the transport operator of
:mod:`ergomfg.linearized`, acting on nodal masses ``V_i m_i``.  The zero-flux
closure on ``{d = eps}`` is whatever that adjoint encodes, so testing the
density against any grid function reproduces the weak formulation exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .asymptotics import RateFit, RateFitError, default_window, fit_power_law
from .domain import Grid, mass_inside
from .linearized import (
    SCHEMES,
    adjoint_invariant_measure,
    bordered_ergodic_solve,
    drift_free_rows,
    transport_matrix,
)

__all__ = [
    "FpSolution",
    "fp_matrix",
    "solve_fp",
    "density_rate_fit",
    "mass_tail",
    "weak_residual",
    "DEFAULT_TAIL_ETAS",
]

DEFAULT_TAIL_ETAS = (0.05, 0.1, 0.2)


@dataclass
class FpSolution:
    m: np.ndarray
    mass: float
    eps: float
    rate_fit: Optional[RateFit]
    tail_masses: List[Tuple[float, float]] = field(default_factory=list)
    grid: Optional[Grid] = field(default=None, repr=False)


def fp_matrix(b: np.ndarray, grid: Grid, scheme: str = "hybrid") -> sp.csr_matrix:
    """Mass-balance matrix of the discrete FP equation.

    Built from the jump rates of the discrete diffusion: a node sends mass
    to each neighbour at the diffusive rate plus the drift share of the
    chosen stencil.  Row ``j`` of the result is outflow minus inflow at ``j``.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    b = np.where(drift_free_rows(grid), 0.0, np.asarray(b, dtype=float))
    h, n = grid.h, grid.size
    k = grid.faces / grid.h
    vol = grid.volumes

    diff_right = np.zeros(n)
    diff_left = np.zeros(n)
    diff_right[:-1] = k / vol[:-1]
    diff_left[1:] = k / vol[1:]

    central = np.abs(b) * h <= 2.0 if scheme == "hybrid" else np.full(n, scheme == "central")
    # drift -b moves mass right where b < 0
    drift_right = np.where(central, -b / (2 * h), np.maximum(-b, 0.0) / h)
    drift_left = np.where(central, b / (2 * h), np.maximum(b, 0.0) / h)
    right = diff_right + drift_right
    left = diff_left + drift_left
    right[-1] = 0.0
    left[0] = 0.0

    out = left + right
    rows = np.concatenate((np.arange(n), np.arange(1, n), np.arange(n - 1)))
    cols = np.concatenate((np.arange(n), np.arange(n - 1), np.arange(1, n)))
    # inflow to j+1 from j (rate right[j]) and to j-1 from j (rate left[j])
    vals = np.concatenate((out, -right[:-1], -left[1:]))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _fit_window_mask(grid: Grid) -> np.ndarray:
    mask = np.ones(grid.size, dtype=bool)
    # truncation-dominated nodes next to {d = eps}
    for i in grid.boundary_nodes:
        mask[i] = False
        mask[i - 1 if i > 0 else i + 1] = False
    return mask


def density_rate_fit(m: np.ndarray, grid: Grid, window=None) -> Optional[RateFit]:
    window = default_window(grid.eps) if window is None else window
    mask = _fit_window_mask(grid)
    try:
        return fit_power_law(grid.d[mask], np.asarray(m)[mask], window)
    except RateFitError:
        return None


def solve_fp(
    b: np.ndarray,
    grid: Grid,
    scheme: str = "hybrid",
    *,
    window: Optional[Tuple[float, float]] = None,
    tail_etas: Sequence[float] = DEFAULT_TAIL_ETAS,
) -> FpSolution:
    """Invariant density for drift ``b`` (dynamics ``dX = -b dt + sqrt(2) dB``)."""
    m = adjoint_invariant_measure(b, grid, scheme)
    tails = [(float(eta), 1.0 - mass_inside(grid, m, eta)) for eta in tail_etas if eta > grid.eps]
    return FpSolution(
        m=m,
        mass=grid.integrate(m),
        eps=grid.eps,
        rate_fit=density_rate_fit(m, grid, window),
        tail_masses=tails,
        grid=grid,
    )


def mass_tail(solutions: Sequence[FpSolution], eta: float) -> List[float]:
    """Mass of each ``m_eps`` inside ``{d > eta}``."""
    out = []
    for s in solutions:
        if s.grid is None:
            raise ValueError("solution does not carry its grid")
        if eta <= s.eps:
            raise ValueError(f"eta={eta} must exceed every eps (got eps={s.eps})")
        out.append(mass_inside(s.grid, s.m, eta))
    return out


def weak_residual(
    sol: FpSolution,
    b: np.ndarray,
    grid: Grid,
    tests: Sequence[np.ndarray],
    scheme: str = "hybrid",
) -> float:
    """``max_k |<g_k, m> + lambda_k|`` with ``lambda_k`` from bordered solves.

    ``lambda_k`` is the ergodic constant of ``-Delta phi + b . grad phi = g_k +
    lambda_k`` computed without the invariant measure, so this checks the
    duality between the two routes.
    """
    A = transport_matrix(b, grid, 0.0, scheme)
    worst = 0.0
    for g in tests:
        g = np.asarray(g, dtype=float)
        _, lam = bordered_ergodic_solve(A, g, grid.center_index)
        worst = max(worst, abs(grid.integrate(g * sol.m) + lam))
    return worst
