"""Ergodic Hamilton-Jacobi-Bellman equation on ``Omega_eps``.

Solves ``-Delta u + |grad u|**p + lam = f`` for the pair ``(u, lam)`` with the
gauge ``u[i0] = 0``.  The blow-up boundary condition of the full problem is
replaced by data on ``{d = eps}`` taken from the boundary asymptotics:

``matched_neumann`` (default)
    outward normal derivative ``((p-1) eps)**(1-p')``.
``matched_dirichlet``
    value ``c_p * phi_p(eps)``.
``penalized_dirichlet``
    a large constant value ``M``.

The unknown ``lam`` is handled by Newton on the bordered system
``[[J, 1], [e_i0^T, 0]]``.  For ``p < 2`` the Hamiltonian is regularised as
``(q**2 + eta**2)**(p/2) - eta**p`` and ``eta`` is driven to zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .asymptotics import AsymptoticModel
from .domain import DomainSpec, Grid, Interval, build_grid, centered_gradient, laplacian_matrix
from .linearized import drift_free_rows

__all__ = [
    "BOUNDARY_MODES",
    "HjbProblem",
    "HjbSolution",
    "HjbConvergenceError",
    "HjbTemplate",
    "ContinuationResult",
    "solve_ergodic_hjb",
    "compute_drift",
    "hjb_residual",
    "hjb_jacobian",
    "is_m_matrix",
    "initial_profile",
    "max_spacing",
    "continuation_in_eps",
    "richardson",
]

log = logging.getLogger(__name__)

BOUNDARY_MODES = ("matched_neumann", "matched_dirichlet", "penalized_dirichlet")
ETA_SCHEDULE = (1e-2, 1e-4, 1e-6, 1e-8)


class HjbConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


def max_spacing(eps: float, p: float) -> float:
    """Largest grid spacing that resolves the boundary layer.

    In the half cell next to ``{d = eps}`` the imposed flux contributes
    ``2 g / h`` and the Hamiltonian ``g**p`` with ``g = ((p-1) eps)**(1-p')``.
    Once ``h > 2 (p-1) eps`` the Hamiltonian wins, ``u`` must decrease toward
    the wall and Newton lands on spurious roots.  Half that bound is kept as
    a safety margin.
    """
    return (p - 1.0) * eps


@dataclass
class HjbProblem:
    grid: Grid
    p: float
    f: np.ndarray
    boundary_mode: str = "matched_neumann"
    penalty: float = 1e3
    gauge: Optional[int] = None
    max_iter: int = 100
    tol: float = 1e-10
    eta: float = 0.0
    hamiltonian: str = "central"

    def __post_init__(self):
        self.model = AsymptoticModel(self.p)
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (self.grid.size,) or not np.all(np.isfinite(self.f)):
            raise ValueError("f must be a finite field on the grid")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}")
        if self.hamiltonian not in ("central", "godunov"):
            raise ValueError("hamiltonian must be 'central' or 'godunov'")
        if self.gauge is None:
            self.gauge = self.grid.center_index
        if self.gauge in self.grid.boundary_nodes:
            raise ValueError("gauge node must be an interior node")
        if self.tol <= 0 or self.eta < 0:
            raise ValueError("tol must be positive and eta non-negative")
        h_max = max_spacing(self.grid.eps, self.p)
        if self.grid.h > h_max * (1 + 1e-9):
            raise ValueError(
                f"grid spacing {self.grid.h:.3g} does not resolve the boundary layer; "
                f"need h <= (p-1) eps = {h_max:.3g}"
            )

    @property
    def boundary_gradient(self) -> float:
        """Outward normal derivative imposed in ``matched_neumann`` mode."""
        return float(self.model.expansion_gradient(self.grid.eps))

    @property
    def boundary_value(self) -> float:
        if self.boundary_mode == "penalized_dirichlet":
            return float(self.penalty)
        return float(self.model.expansion_u(self.grid.eps))


@dataclass
class HjbSolution:
    u: np.ndarray
    lam: float
    drift_b: np.ndarray
    residual_inf: float
    residual_rel: float
    eps: float
    iterations: int
    hamiltonian: str = "central"
    history: List[float] = field(default_factory=list, repr=False)


def _ham(q, p, eta):
    if eta == 0.0:
        return np.abs(q) ** p
    return (q * q + eta * eta) ** (p / 2) - eta**p


def _dham(q, p, eta):
    if eta == 0.0:
        aq = np.abs(q)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = p * np.where(aq > 0, aq ** (p - 1) * np.sign(q), 0.0)
        return out
    return p * q * (q * q + eta * eta) ** (p / 2 - 1)


class _Operator:
    """Residual and Jacobian of the discrete HJB operator for one problem."""

    def __init__(self, problem: HjbProblem):
        self.pb = problem
        grid = problem.grid
        self.grid = grid
        self.L = laplacian_matrix(grid)
        self.absL = abs(self.L)
        self.n = grid.size
        self.bnd = np.array(grid.boundary_nodes)
        self.dirichlet = problem.boundary_mode != "matched_neumann"
        self.nodrift = drift_free_rows(grid)
        g = problem.boundary_gradient
        # outward flux of u through {d = eps}
        self.flux = -grid.boundary_faces / grid.volumes * g
        self.q_bnd = -grid.grad_d[self.bnd] * g

    def gradient(self, u):
        h = self.grid.h
        q = np.zeros(self.n)
        q[1:-1] = (u[2:] - u[:-2]) / (2 * h)
        q[self.bnd] = self.q_bnd
        if self.grid.is_disk:
            q[0] = 0.0
        return q

    def parts(self, u, eta, hamiltonian):
        """Return (diffusion part, Hamiltonian part, Jacobian of both)."""
        pb, grid, h, n = self.pb, self.grid, self.grid.h, self.n
        diff = self.L @ u + self.flux
        lower = np.zeros(n)
        upper = np.zeros(n)
        diag = np.zeros(n)
        if hamiltonian == "central":
            q = self.gradient(u)
            H = _ham(q, pb.p, eta)
            dH = np.where(self.nodrift, 0.0, _dham(q, pb.p, eta))
            lower = -dH / (2 * h)
            upper = dH / (2 * h)
        else:
            dm = np.zeros(n)
            dp = np.zeros(n)
            dm[1:] = (u[1:] - u[:-1]) / h
            dp[:-1] = (u[1:] - u[:-1]) / h
            a = np.maximum(dm, 0.0)
            c = np.minimum(dp, 0.0)
            Ha, Hc = _ham(a, pb.p, eta), _ham(c, pb.p, eta)
            back = Ha >= Hc
            H = np.where(back, Ha, Hc)
            ka = _dham(a, pb.p, eta) / h
            kc = _dham(c, pb.p, eta) / h
            lower = np.where(back, -ka, 0.0)
            diag = np.where(back, ka, -kc)
            upper = np.where(back, 0.0, kc)
            H[self.bnd] = _ham(self.q_bnd, pb.p, eta)
            lower[self.nodrift] = diag[self.nodrift] = upper[self.nodrift] = 0.0
            if grid.is_disk:
                H[0] = 0.0
        J = self.L + sp.diags([lower[1:], diag, upper[:-1]], [-1, 0, 1], shape=(n, n))
        return diff, H, J.tocsr()

    def residual(self, u, lam, eta, hamiltonian):
        diff, H, J = self.parts(u, eta, hamiltonian)
        r = diff + H + lam - self.pb.f
        # size of the individual stencil terms, i.e. the rounding scale
        scale = 1.0 + self.absL @ np.abs(u) + np.abs(self.flux) + np.abs(H)
        if self.dirichlet:
            h2 = self.grid.h ** 2
            r[self.bnd] = (u[self.bnd] - self.pb.boundary_value) / h2
            scale[self.bnd] = 1.0 / h2
            J = J.tolil()
            for i in self.bnd:
                J.rows[i] = [i]
                J.data[i] = [1.0 / h2]
            J = J.tocsr()
            lam_col = np.ones(self.n)
            lam_col[self.bnd] = 0.0
        else:
            lam_col = np.ones(self.n)
        return r, scale, J, lam_col

    def newton_matrix(self, J, lam_col):
        row = np.zeros((1, self.n))
        row[0, self.pb.gauge] = 1.0
        return sp.bmat([[J, lam_col[:, None]], [sp.csr_matrix(row), None]]).tocsc()


def initial_profile(grid: Grid, p: float) -> np.ndarray:
    """Smooth blow-up profile used as the Newton starting point."""
    model = AsymptoticModel(p)
    if isinstance(grid.spec, Interval):
        x = grid.nodes
        prof = model.expansion_u(x - grid.spec.a) + model.expansion_u(grid.spec.b - x)
    else:
        prof = model.expansion_u(grid.spec.radius - grid.nodes)
    return prof - prof[grid.center_index]


def _newton(op: _Operator, u, lam, eta, hamiltonian, max_iter, tol):
    history = []
    pb = op.pb
    for it in range(max_iter + 1):
        r, scale, J, lam_col = op.residual(u, lam, eta, hamiltonian)
        gauge_r = u[pb.gauge]
        rel = max(float(np.max(np.abs(r) / scale)), abs(gauge_r))
        history.append(rel)
        if not np.isfinite(rel):
            raise HjbConvergenceError("non-finite HJB residual", rel, it)
        if rel <= tol:
            return u, lam, it, history
        if it == max_iter:
            break
        K = op.newton_matrix(J, lam_col)
        try:
            step = spla.spsolve(K, -np.concatenate((r, [gauge_r])))
        except RuntimeError as exc:
            raise HjbConvergenceError(f"singular Newton matrix: {exc}", rel, it) from exc
        du, dlam = step[:-1], step[-1]
        merit0 = np.linalg.norm(r / scale)
        t = 1.0
        while t > 1e-8:
            u_try, lam_try = u + t * du, lam + t * dlam
            r_try = op.residual(u_try, lam_try, eta, hamiltonian)[0]
            merit = np.linalg.norm(r_try / scale)
            if np.isfinite(merit) and merit < (1 - 1e-4 * t) * merit0:
                break
            t *= 0.5
        else:
            raise HjbConvergenceError("line search failed", rel, it)
        u, lam = u_try, lam_try
    raise HjbConvergenceError(f"Newton did not converge in {max_iter} iterations (residual {rel:.3e})", rel, max_iter)


def solve_ergodic_hjb(
    problem: HjbProblem,
    u0: Optional[np.ndarray] = None,
    lam0: Optional[float] = None,
) -> HjbSolution:
    """Solve the truncated ergodic problem; see the module docstring."""
    grid = problem.grid
    op = _Operator(problem)
    u = initial_profile(grid, problem.p) if u0 is None else np.array(u0, dtype=float)
    u = u - u[problem.gauge]
    if lam0 is None:
        diff, H, _ = op.parts(u, 0.0, "central")
        i0 = problem.gauge
        lam0 = problem.f[i0] - diff[i0] - H[i0]
    lam = float(lam0)

    if problem.p == 2.0:
        etas = [0.0]
    else:
        etas = [e for e in ETA_SCHEDULE if e > problem.eta] + [problem.eta]

    hamiltonians = [problem.hamiltonian]
    if problem.hamiltonian == "central":
        hamiltonians.append("godunov")

    last_error = None
    for ham in hamiltonians:
        try:
            uu, ll, total, hist = u, lam, 0, []
            for eta in etas:
                uu, ll, its, h = _newton(op, uu, ll, eta, ham, problem.max_iter, problem.tol)
                total += its
                hist += h
            break
        except HjbConvergenceError as exc:
            last_error = exc
            log.info("HJB Newton with %s Hamiltonian failed: %s", ham, exc)
    else:
        raise last_error

    # the gauge row holds u[i0] to round-off; pin it exactly
    uu = uu - uu[problem.gauge]
    sol = HjbSolution(
        u=uu,
        lam=float(ll),
        drift_b=np.empty(0),
        residual_inf=0.0,
        residual_rel=hist[-1],
        eps=grid.eps,
        iterations=total,
        hamiltonian=ham,
        history=hist,
    )
    sol.drift_b = compute_drift(uu, problem.p, grid, problem.eta)
    if problem.boundary_mode == "matched_neumann":
        # the normal derivative on {d = eps} is known exactly
        sol.drift_b[op.bnd] = _dham(op.q_bnd, problem.p, problem.eta)
    sol.residual_inf = hjb_residual(sol, problem)
    return sol


def compute_drift(u: np.ndarray, p: float, grid: Grid, eta: float = 0.0) -> np.ndarray:
    """Optimal drift ``b = p (|Du|**2 + eta**2)**((p-2)/2) Du`` (the control is ``-b``)."""
    q = centered_gradient(u, grid)
    return _dham(q, p, eta)


def hjb_residual(solution: HjbSolution, problem: HjbProblem, *, scaled: bool = False) -> float:
    """Sup of the discrete HJB residual over nodes off ``{d = eps}``.

    With ``scaled=True`` each node is divided by the magnitude of the terms
    entering it (``1 + |L| |u| + |flux| + H``), which is the quantity the
    solver drives below ``tol``.
    """
    if solution.u.shape != (problem.grid.size,) or solution.eps != problem.grid.eps:
        raise ValueError("solution and problem live on different grids")
    op = _Operator(problem)
    r, scale, _, _ = op.residual(solution.u, solution.lam, problem.eta, solution.hamiltonian)
    mask = np.ones(problem.grid.size, dtype=bool)
    mask[op.bnd] = False
    vals = np.abs(r[mask])
    if scaled:
        vals = vals / scale[mask]
    return float(vals.max())


def hjb_jacobian(solution: HjbSolution, problem: HjbProblem) -> sp.csr_matrix:
    """Jacobian of the discrete operator in ``u`` at the solution."""
    op = _Operator(problem)
    return op.residual(solution.u, solution.lam, problem.eta, solution.hamiltonian)[2]


def is_m_matrix(J: sp.spmatrix, tol: float = 1e-12) -> bool:
    """Non-positive off-diagonal and weakly diagonally dominant rows."""
    J = sp.csr_matrix(J)
    diag = J.diagonal()
    off = J - sp.diags(diag)
    if off.nnz and off.data.max() > tol * np.abs(diag).max():
        return False
    offsum = np.asarray(abs(off).sum(axis=1)).ravel()
    return bool(np.all(diag >= offsum * (1 - tol)))


# ---------------------------------------------------------------------------
# continuation in eps


@dataclass
class HjbTemplate:
    """Problem description independent of a particular grid."""

    spec: DomainSpec
    p: float
    f: Callable[[np.ndarray], np.ndarray] = lambda x: np.zeros_like(x)
    n_cells: Optional[int] = None
    cells_per_eps: Optional[float] = None
    boundary_mode: str = "matched_neumann"
    tol: float = 1e-10
    max_iter: int = 100

    def grid_for(self, eps: float) -> Grid:
        if (self.n_cells is None) == (self.cells_per_eps is None):
            raise ValueError("set exactly one of n_cells and cells_per_eps")
        if self.n_cells is not None:
            n = self.n_cells
        else:
            n = int(round(self.cells_per_eps * self.spec.width / (2 * eps)))
        return build_grid(self.spec, n, eps)

    def problem_for(self, eps: float) -> HjbProblem:
        grid = self.grid_for(eps)
        return HjbProblem(
            grid=grid,
            p=self.p,
            f=np.asarray(self.f(grid.nodes), dtype=float) * np.ones(grid.size),
            boundary_mode=self.boundary_mode,
            tol=self.tol,
            max_iter=self.max_iter,
        )


@dataclass
class ContinuationResult:
    eps: List[float]
    problems: List[HjbProblem]
    solutions: List[HjbSolution]
    lambda_extrapolated: float
    order: float
    monotone: bool

    @property
    def lambdas(self) -> List[float]:
        return [s.lam for s in self.solutions]

    @property
    def observed_order(self) -> Optional[float]:
        """Convergence order estimated from the last three members."""
        if len(self.solutions) < 3:
            return None
        l1, l2, l3 = self.lambdas[-3:]
        r = self.eps[-2] / self.eps[-1]
        if (l1 - l2) * (l2 - l3) <= 0:
            return None
        return float(np.log(abs((l1 - l2) / (l2 - l3))) / np.log(r))


def richardson(coarse: float, fine: float, ratio: float, order: float) -> float:
    """Extrapolate two values with error ``~ C * eps**order``."""
    return fine + (fine - coarse) / (ratio**order - 1.0)


def _transfer(sol: HjbSolution, old: Grid, new: Grid, p: float) -> np.ndarray:
    """Interpolate the regular part ``u - profile`` onto a new grid."""
    regular = sol.u - initial_profile(old, p)
    return np.interp(new.nodes, old.nodes, regular) + initial_profile(new, p)


def continuation_in_eps(
    template: HjbTemplate,
    eps_schedule: Sequence[float],
    *,
    order: float = 1.0,
) -> ContinuationResult:
    """Solve along a decreasing eps schedule with warm starts.

    The limit value is Richardson-extrapolated from the last two members
    assuming an error ``O(eps**order)``.
    """
    eps_schedule = [float(e) for e in eps_schedule]
    if len(eps_schedule) < 2 or any(b >= a for a, b in zip(eps_schedule, eps_schedule[1:])):
        raise ValueError("eps_schedule must be strictly decreasing with at least two entries")
    problems, sols = [], []
    for k, eps in enumerate(eps_schedule):
        pb = template.problem_for(eps)
        if sols:
            u0 = _transfer(sols[-1], problems[-1].grid, pb.grid, template.p)
            shift = float(template.f(pb.grid.nodes[[pb.gauge]])[0]) - float(
                template.f(problems[-1].grid.nodes[[problems[-1].gauge]])[0]
            )
            sol = solve_ergodic_hjb(pb, u0=u0, lam0=sols[-1].lam + shift)
        else:
            sol = solve_ergodic_hjb(pb)
        problems.append(pb)
        sols.append(sol)
    lams = [s.lam for s in sols]
    diffs = np.diff(lams)
    monotone = bool(np.all(diffs >= 0) or np.all(diffs <= 0))
    ratio = eps_schedule[-2] / eps_schedule[-1]
    lam_ex = richardson(lams[-2], lams[-1], ratio, order)
    return ContinuationResult(eps_schedule, problems, sols, lam_ex, order, monotone)
