"""Linear transport-diffusion ``-Delta phi + b . grad phi + delta phi = g``.

The discrete operator is the matrix of :func:`transport_matrix`: finite-volume
diffusion with zero-flux closure on ``{d = eps}`` plus a nodal drift term that
vanishes on the boundary nodes (``grad phi . nu = 0`` there) and at the disk
centre (symmetry).  Rows sum to ``delta``, so for ``delta = 0`` constants are
in the kernel and the transpose carries the invariant measure.

Drift stencils:

``central``
    second order; an M-matrix only while ``|b| h / 2 <= 1``.
``upwind``
    first order, always an M-matrix.
``hybrid`` (default)
    central where ``|b| h / 2 <= 1`` and upwind elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .asymptotics import default_window
from .domain import Grid, centered_gradient, laplacian_matrix

__all__ = [
    "SCHEMES",
    "LinearProblem",
    "ErgodicLinearSolution",
    "DriftReport",
    "SingularOperatorError",
    "transport_matrix",
    "drift_free_rows",
    "solve_linear",
    "adjoint_invariant_measure",
    "solve_linear_ergodic",
    "bordered_ergodic_solve",
    "check_drift_conditions",
]

SCHEMES = ("hybrid", "upwind", "central")


class SingularOperatorError(RuntimeError):
    """The discrete operator lost its expected kernel structure."""


def drift_free_rows(grid: Grid) -> np.ndarray:
    """Boolean mask of nodes whose row carries no drift term."""
    mask = np.zeros(grid.size, dtype=bool)
    mask[list(grid.boundary_nodes)] = True
    if grid.is_disk:
        mask[0] = True
    return mask


def _drift_weights(b: np.ndarray, grid: Grid, scheme: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coefficients (lower, diag, upper) of the drift stencil per row."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown drift scheme {scheme!r}; choose from {SCHEMES}")
    h = grid.h
    b = np.where(drift_free_rows(grid), 0.0, b)
    if scheme == "central":
        use_central = np.ones(b.size, dtype=bool)
    elif scheme == "upwind":
        use_central = np.zeros(b.size, dtype=bool)
    else:
        use_central = np.abs(b) * h <= 2.0

    lower = np.where(use_central, -b / (2 * h), -np.maximum(b, 0.0) / h)
    upper = np.where(use_central, b / (2 * h), np.minimum(b, 0.0) / h)
    diag = np.where(use_central, 0.0, np.abs(b) / h)
    return lower, diag, upper


def transport_matrix(b: np.ndarray, grid: Grid, delta: float = 0.0, scheme: str = "hybrid") -> sp.csr_matrix:
    """Sparse matrix of ``-Delta_h + b . grad_h + delta``."""
    b = np.asarray(b, dtype=float)
    if b.shape != (grid.size,):
        raise ValueError(f"drift has shape {b.shape}, grid has {grid.size} nodes")
    if not np.all(np.isfinite(b)):
        raise ValueError("drift must be finite on every node")
    lower, diag, upper = _drift_weights(b, grid, scheme)
    n = grid.size
    drift = sp.diags(
        [lower[1:], diag + delta, upper[:-1]],
        offsets=[-1, 0, 1],
        shape=(n, n),
    )
    return (laplacian_matrix(grid) + drift).tocsr()


@dataclass
class LinearProblem:
    grid: Grid
    b: np.ndarray
    g: np.ndarray
    delta: float = 0.0
    scheme: str = "hybrid"

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        if self.g.shape != (self.grid.size,) or not np.all(np.isfinite(self.g)):
            raise ValueError("g must be a finite field on the grid")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    def matrix(self) -> sp.csr_matrix:
        return transport_matrix(self.b, self.grid, self.delta, self.scheme)


@dataclass
class ErgodicLinearSolution:
    phi: np.ndarray
    lambda_g: float
    rho: np.ndarray
    lambda_bordered: float
    residual: float
    gauge_node: int


def solve_linear(problem: LinearProblem) -> np.ndarray:
    """Solve the ``delta > 0`` problem with zero-flux closure."""
    if problem.delta <= 0:
        raise ValueError("solve_linear needs delta > 0; use solve_linear_ergodic for delta = 0")
    A = problem.matrix().tocsc()
    try:
        phi = spla.spsolve(A, problem.g)
    except RuntimeError as exc:
        raise SingularOperatorError(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(phi)):
        raise SingularOperatorError("linear solve returned non-finite values")
    return phi


def _solve_refined(K: sp.spmatrix, rhs: np.ndarray, steps: int = 2) -> np.ndarray:
    """Sparse LU solve with a few rounds of iterative refinement."""
    K = K.tocsc()
    try:
        lu = spla.splu(K)
    except RuntimeError as exc:
        raise SingularOperatorError(f"bordered system is singular: {exc}") from exc
    x = lu.solve(rhs)
    for _ in range(steps):
        x += lu.solve(rhs - K @ x)
    if not np.all(np.isfinite(x)):
        raise SingularOperatorError("bordered solve returned non-finite values")
    return x


def adjoint_invariant_measure(
    b: np.ndarray,
    grid: Grid,
    scheme: str = "hybrid",
    *,
    matrix: Optional[sp.spmatrix] = None,
) -> np.ndarray:
    """Unit-mass density ``m`` with ``A^T (V m) = 0``.

    ``V`` are the cell volumes, so ``V m`` is the nodal mass vector that the
    transposed operator annihilates.  The null vector is obtained from the
    bordered system ``[[A^T, 1], [1^T, 0]]``, which is nonsingular exactly
    when the kernel is one-dimensional.
    """
    A = transport_matrix(b, grid, 0.0, scheme) if matrix is None else matrix
    n = grid.size
    ones = np.ones((n, 1))
    K = sp.bmat([[A.T, ones], [ones.T, None]])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    sol = _solve_refined(K, rhs)
    mass = sol[:n]
    floor = 1e-12 * np.abs(mass).max()
    if mass.min() < -floor:
        raise SingularOperatorError(
            f"invariant measure has negative mass {mass.min():.3e}; the drift stencil is not monotone"
        )
    mass = np.clip(mass, 0.0, None)
    mass /= mass.sum()
    return mass / grid.volumes


def bordered_ergodic_solve(A: sp.spmatrix, g: np.ndarray, gauge: int) -> Tuple[np.ndarray, float]:
    """Solve ``A phi = g + lam`` with ``phi[gauge] = 0`` for ``(phi, lam)``.

    This route never touches the invariant measure.
    """
    n = A.shape[0]
    col = -np.ones((n, 1))
    row = np.zeros((1, n))
    row[0, gauge] = 1.0
    K = sp.bmat([[A, col], [sp.csr_matrix(row), None]])
    sol = _solve_refined(K, np.concatenate((g, [0.0])))
    return sol[:n], float(sol[n])


def solve_linear_ergodic(problem: LinearProblem, gauge: Optional[int] = None) -> ErgodicLinearSolution:
    """Ergodic constant and corrector for the ``delta = 0`` problem.

    ``lambda_g = -<g, rho>`` comes from the invariant measure; ``phi`` and an
    independent ``lambda_bordered`` come from the bordered linear system.
    """
    if problem.delta != 0:
        raise ValueError("solve_linear_ergodic needs delta = 0")
    grid = problem.grid
    gauge = grid.center_index if gauge is None else gauge
    A = problem.matrix()
    rho = adjoint_invariant_measure(problem.b, grid, problem.scheme, matrix=A)
    lam = -grid.integrate(rho * problem.g)
    phi, lam_b = bordered_ergodic_solve(A, problem.g, gauge)
    resid = float(np.abs(A @ phi - problem.g - lam).max())
    return ErgodicLinearSolution(
        phi=phi, lambda_g=lam, rho=rho, lambda_bordered=lam_b, residual=resid, gauge_node=gauge
    )


@dataclass
class DriftReport:
    window: Tuple[float, float]
    invariance_margin: float
    invariance_C: float
    strong_ratio_min: float
    jacobian_C: float
    invariance_holds: bool
    strong_holds: bool
    jacobian_holds: bool
    node_margins: dict = field(default_factory=dict, repr=False)


def check_drift_conditions(
    b: np.ndarray,
    grid: Grid,
    gamma0: float,
    beta0: float,
    *,
    window: Optional[Tuple[float, float]] = None,
    c_allow: float = 100.0,
    slack: float = 0.05,
) -> DriftReport:
    """Evaluate the invariance, strong invariance and Jacobian conditions.

    Over nodes with ``d`` in ``window`` (default ``[2 eps, 20 eps]``):

    * ``invariance_margin`` is ``min(d * (Delta d - b . grad d) - 1)``, the
      margin with ``C = 0``; ``invariance_C`` is the smallest ``C`` making
      ``Delta d - b . grad d >= 1/d - C d`` hold on the window.
    * ``strong_ratio_min`` is ``min(d * (Delta d - b . grad d))``, to be
      compared with ``beta0`` up to a relative ``slack`` for the ``o(1)``.
    * ``jacobian_C`` is the smallest ``C`` with ``Jac b >= -C d**(gamma0-2)``.

    The conditions "hold" when the inferred constants stay below ``c_allow``.
    """
    if gamma0 <= 0 or beta0 <= 0:
        raise ValueError("gamma0 and beta0 must be positive")
    b = np.asarray(b, dtype=float)
    d = grid.d
    lo, hi = default_window(grid.eps) if window is None else window
    sel = (d >= lo * (1 - 1e-9)) & (d <= hi * (1 + 1e-9))
    if grid.is_disk:
        sel &= grid.nodes > 0
    dd = d[sel]

    a = grid.laplacian_d[sel] - b[sel] * grid.grad_d[sel]
    inv_margin = dd * a - 1.0
    inv_C = float(max(0.0, np.max((1.0 / dd - a) / dd)))
    ratio = dd * a

    db = centered_gradient(b, grid)
    jac_min = db.copy()
    if grid.is_disk:
        with np.errstate(divide="ignore", invalid="ignore"):
            tangential = np.where(grid.nodes > 0, b / grid.nodes, db)
        jac_min = np.minimum(db, tangential)
    jac_C = float(max(0.0, np.max(-jac_min[sel] * dd ** (2.0 - gamma0))))

    return DriftReport(
        window=(lo, hi),
        invariance_margin=float(inv_margin.min()),
        invariance_C=inv_C,
        strong_ratio_min=float(ratio.min()),
        jacobian_C=jac_C,
        invariance_holds=bool(inv_margin.min() > 0 or inv_C <= c_allow),
        strong_holds=bool(ratio.min() >= beta0 * (1 - slack)),
        jacobian_holds=bool(jac_C <= c_allow),
        node_margins={"d": dd, "invariance": inv_margin, "strong_ratio": ratio, "jacobian": jac_min[sel]},
    )
