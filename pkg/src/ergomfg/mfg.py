"""Mean field game equilibrium by damped fixed-point iteration.

One application of the map ``Phi`` freezes the population ``mu``, evaluates
the cost ``F(x, mu)``, solves the ergodic HJB problem, and returns the
invariant density of the resulting optimal dynamics.  The iteration
``mu <- (1 - theta) mu + theta Phi(mu)`` stops when the L1 change of the
density falls below ``tol``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .domain import Grid, centered_gradient
from .fokker_planck import FpSolution, solve_fp
from .hjb import HjbConvergenceError, HjbProblem, HjbSolution, solve_ergodic_hjb
from .linearized import transport_matrix

__all__ = [
    "COUPLING_KINDS",
    "CouplingSpec",
    "MfgEquilibrium",
    "MfgSolverError",
    "eval_coupling",
    "solve_mfg",
    "uniqueness_gap",
    "bregman",
    "monotonicity_pairing",
    "generator_pairing",
]

log = logging.getLogger(__name__)

COUPLING_KINDS = ("none", "local_linear", "nonlocal")

FieldLike = Union[np.ndarray, Callable[[np.ndarray], np.ndarray], float]


class MfgSolverError(RuntimeError):
    def __init__(self, msg: str, iteration: int):
        super().__init__(f"iteration {iteration}: {msg}")
        self.iteration = iteration


@dataclass
class CouplingSpec:
    """Running cost ``F(x, m) = f0(x) + c * K[m](x)``.

    ``kind`` selects ``K``: nothing (``none``), the identity (``local_linear``)
    or Gaussian smoothing of width ``width`` renormalised on the truncated
    domain (``nonlocal``).  On the disk the smoothing kernel acts on the
    radial coordinate only.
    """

    f0: FieldLike = 0.0
    kind: str = "none"
    strength: float = 0.0
    width: float = 0.05

    def __post_init__(self):
        if self.kind not in COUPLING_KINDS:
            raise ValueError(f"coupling kind must be one of {COUPLING_KINDS}")
        if self.kind == "nonlocal" and self.width <= 0:
            raise ValueError("nonlocal coupling needs width > 0")

    @property
    def monotone(self) -> bool:
        return self.kind == "none" or self.strength >= 0

    def base(self, grid: Grid) -> np.ndarray:
        f0 = self.f0
        if callable(f0):
            f0 = f0(grid.nodes)
        out = np.broadcast_to(np.asarray(f0, dtype=float), (grid.size,)).copy()
        if not np.all(np.isfinite(out)):
            raise ValueError("base cost f0 must be finite")
        return out


def _smoothing(grid: Grid, width: float) -> np.ndarray:
    x = grid.nodes
    K = np.exp(-0.5 * ((x[:, None] - x[None, :]) / width) ** 2) * grid.volumes[None, :]
    return K / K.sum(axis=1, keepdims=True)


def eval_coupling(spec: CouplingSpec, m: np.ndarray, grid: Grid) -> np.ndarray:
    f0 = spec.base(grid)
    if spec.kind == "none":
        return f0
    m = np.asarray(m, dtype=float)
    if spec.kind == "local_linear":
        return f0 + spec.strength * m
    return f0 + spec.strength * (_smoothing(grid, spec.width) @ m)


@dataclass
class MfgEquilibrium:
    lam: float
    u: np.ndarray
    m: np.ndarray
    history: List[Tuple[int, float, float]]
    converged: bool
    monotone: bool
    hjb: Optional[HjbSolution] = field(default=None, repr=False)
    fp: Optional[FpSolution] = field(default=None, repr=False)
    mu: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def residual(self) -> float:
        return self.history[-1][1] if self.history else float("inf")


def _l1(grid: Grid, a: np.ndarray) -> float:
    return grid.integrate(np.abs(a))


def solve_mfg(
    grid: Grid,
    p: float,
    spec: CouplingSpec,
    damping: float = 0.5,
    tol: float = 1e-8,
    max_iter: int = 200,
    *,
    mu0: Optional[np.ndarray] = None,
    scheme: str = "hybrid",
    hjb_tol: float = 1e-11,
    boundary_mode: str = "matched_neumann",
) -> MfgEquilibrium:
    """Damped Picard iteration of ``Phi``; starts from the uniform density."""
    if not 0.0 < damping <= 1.0:
        raise ValueError("damping must lie in (0, 1]")
    if not spec.monotone:
        log.warning("non-monotone coupling (strength %g): equilibria may not be unique", spec.strength)

    if mu0 is None:
        mu = np.full(grid.size, 1.0 / grid.total_volume)
    else:
        mu = np.asarray(mu0, dtype=float)
        if mu.shape != (grid.size,) or np.any(mu < 0):
            raise ValueError("mu0 must be a non-negative field on the grid")
        mu = mu / grid.integrate(mu)

    history: List[Tuple[int, float, float]] = []
    u_prev, lam_prev = None, None
    converged = False
    for k in range(1, max_iter + 1):
        F = eval_coupling(spec, mu, grid)
        try:
            pb = HjbProblem(grid, p, F, boundary_mode=boundary_mode, tol=hjb_tol)
            sol = solve_ergodic_hjb(pb, u0=u_prev, lam0=lam_prev)
            fp = solve_fp(sol.drift_b, grid, scheme)
        except (HjbConvergenceError, RuntimeError) as exc:
            raise MfgSolverError(str(exc), k) from exc
        u_prev, lam_prev = sol.u, sol.lam

        if spec.kind == "none":
            # F ignores m, so Phi is constant and Phi(mu0) is the fixed point
            history.append((k, 0.0, sol.lam))
            mu = fp.m
            converged = True
            break
        new = (1.0 - damping) * mu + damping * fp.m
        res = _l1(grid, new - mu)
        history.append((k, res, sol.lam))
        log.debug("mfg iteration %d: L1 change %.3e, lambda %.12g", k, res, sol.lam)
        mu = new
        if res <= tol:
            converged = True
            break

    return MfgEquilibrium(
        lam=sol.lam,
        u=sol.u,
        m=fp.m,
        history=history,
        converged=converged,
        monotone=spec.monotone,
        hjb=sol,
        fp=fp,
        mu=mu,
    )


def bregman(q: np.ndarray, r: np.ndarray, p: float) -> np.ndarray:
    """Convexity gap ``|q|^p - |r|^p - p |r|^(p-2) r (q - r)`` of ``|.|^p``."""
    ar = np.abs(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        dr = p * np.where(ar > 0, ar ** (p - 1) * np.sign(r), 0.0)
    return np.abs(q) ** p - ar**p - dr * (q - r)


def monotonicity_pairing(spec: CouplingSpec, m1: np.ndarray, m2: np.ndarray, grid: Grid) -> float:
    """``int (F(x, m1) - F(x, m2)) (m1 - m2) dx``."""
    dF = eval_coupling(spec, m1, grid) - eval_coupling(spec, m2, grid)
    return grid.integrate(dF * (np.asarray(m1) - np.asarray(m2)))


def uniqueness_gap(
    eq1: MfgEquilibrium,
    eq2: MfgEquilibrium,
    spec: CouplingSpec,
    grid: Grid,
    p: float,
) -> Tuple[float, Tuple[float, float, float]]:
    """Three-term identity used to prove uniqueness, evaluated on the grid.

    Returns ``(T1 + T2 + T3, (T1, T2, T3))`` with ``T1`` the monotonicity
    pairing and ``T2 = int B(Du2, Du1) dm1``, ``T3 = int B(Du1, Du2) dm2``.
    """
    for eq in (eq1, eq2):
        if eq.u.shape != (grid.size,) or eq.m.shape != (grid.size,):
            raise ValueError("equilibrium does not live on this grid")
        if eq.hjb is not None and eq.hjb.eps != grid.eps:
            raise ValueError("equilibrium was computed on a different grid")
    g1 = centered_gradient(eq1.u, grid)
    g2 = centered_gradient(eq2.u, grid)
    t1 = monotonicity_pairing(spec, eq1.m, eq2.m, grid)
    t2 = grid.integrate(bregman(g2, g1, p) * eq1.m)
    t3 = grid.integrate(bregman(g1, g2, p) * eq2.m)
    return t1 + t2 + t3, (t1, t2, t3)


def generator_pairing(eq: MfgEquilibrium, grid: Grid, scheme: str = "hybrid") -> float:
    """``<(-Delta_h + b . grad_h) u, m>`` with the equilibrium's own ``u``."""
    A = transport_matrix(eq.hjb.drift_b, grid, 0.0, scheme)
    return grid.integrate((A @ eq.u) * eq.m)
