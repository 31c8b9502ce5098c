"""Closed-form boundary asymptotics and power-law rate fitting.

With ``p`` in ``(1, 2]`` and its conjugate ``p' = p/(p-1)``, the ergodic
value function blows up like ``c_p * phi_p(d)`` at the boundary, where

    phi_p(x) = x**(2-p') / (p'-2)    for p < 2
    phi_p(x) = -log(x)               for p = 2
    c_p      = (p-1)**(1-p')

The remainder is ``O(gamma_p(d))`` and the relative remainder is
``O(omega_p(d))`` with ``omega_p = gamma_p / phi_p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

__all__ = [
    "AsymptoticModel",
    "RateFit",
    "RateFitError",
    "RateCheck",
    "fit_power_law",
    "default_window",
    "boundary_rate_checks",
]

_P_TOL = 1e-12


class RateFitError(ValueError):
    pass


@dataclass(frozen=True)
class AsymptoticModel:
    """Exponents and prefactors for a given Hamiltonian power ``p``.

    Values of ``p`` in ``(1.999, 2)`` are refused: the power branch of
    ``phi_p`` degenerates toward the logarithm there and fits become
    ill-conditioned.  Use exactly ``p = 2`` for the log branch.
    """

    p: float

    def __post_init__(self):
        p = self.p
        if not (1.0 < p <= 2.0):
            raise ValueError(f"p must lie in (1, 2], got {p}")
        if 1.999 < p < 2.0:
            raise ValueError(f"p in (1.999, 2) is ill-conditioned; use p=2 exactly (got {p})")

    @property
    def p_conj(self) -> float:
        return self.p / (self.p - 1.0)

    @property
    def q(self) -> float:
        """Exponent of the control cost, equal to ``p'``."""
        return self.p_conj

    @property
    def is_log(self) -> bool:
        return self.p == 2.0

    @property
    def c_p(self) -> float:
        return (self.p - 1.0) ** (1.0 - self.p_conj)

    @property
    def beta_p(self) -> float:
        if self.is_log:
            raise ValueError("beta_p is undefined for p = 2")
        return self.c_p / (self.p_conj - 2.0)

    @property
    def cost_constant(self) -> float:
        """Normalisation ``C_q`` of the control cost ``C_q |alpha|^q``."""
        q = self.q
        return 1.0 / (q - 1.0) * (q / (q - 1.0)) ** (-q)

    @property
    def u_exponent(self) -> float:
        """Power of ``d`` in the blow-up of ``u`` (0 stands for the log case)."""
        return 2.0 - self.p_conj

    @property
    def gradient_prefactor(self) -> float:
        """Limit of ``d**(p'-1) |grad u|``."""
        return (self.p - 1.0) ** (1.0 - self.p_conj)

    @property
    def hessian_prefactor(self) -> float:
        """Limit of ``d**p' * d^2u/dnu^2``."""
        return (self.p - 1.0) ** (-self.p_conj)

    def _branch(self) -> str:
        pc = self.p_conj
        if self.is_log:
            return "log"
        if abs(pc - 3.0) < _P_TOL:
            return "critical"
        return "steep" if pc > 3.0 else "mild"

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("phi_p needs x > 0")
        if self.is_log:
            out = -np.log(x)
        else:
            pc = self.p_conj
            out = x ** (2.0 - pc) / (pc - 2.0)
        return out if out.ndim else float(out)

    def dphi(self, x):
        """Derivative ``phi_p'(x) = -x**(1-p')``."""
        x = np.asarray(x, dtype=float)
        out = -(x ** (1.0 - self.p_conj))
        return out if out.ndim else float(out)

    @staticmethod
    def _check_delta(delta):
        delta = np.asarray(delta, dtype=float)
        if np.any((delta <= 0) | (delta >= 1)):
            raise ValueError("delta must lie in (0, 1)")
        return delta

    def gamma(self, delta):
        delta = self._check_delta(delta)
        branch = self._branch()
        if branch == "steep":
            out = delta ** (3.0 - self.p_conj)
        elif branch == "critical":
            out = np.abs(np.log(delta))
        else:
            out = np.ones_like(delta)
        return out if out.ndim else float(out)

    def omega(self, delta):
        delta = self._check_delta(delta)
        branch = self._branch()
        if branch == "steep":
            out = delta.copy()
        elif branch == "critical":
            out = delta * np.abs(np.log(delta))
        elif branch == "mild":
            out = delta ** (self.p_conj - 2.0)
        else:
            out = 1.0 / np.abs(np.log(delta))
        return out if out.ndim else float(out)

    def expansion_u(self, d):
        """Leading-order value ``c_p * phi_p(d)``."""
        d = np.asarray(d, dtype=float)
        if np.any(d <= 0):
            raise ValueError("expansion_u needs d > 0")
        out = self.c_p * np.asarray(self.phi(d))
        return out if out.ndim else float(out)

    def expansion_gradient(self, d):
        """Leading-order ``|grad u| = ((p-1) d)**(1-p')``."""
        d = np.asarray(d, dtype=float)
        out = ((self.p - 1.0) * d) ** (1.0 - self.p_conj)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class RateFit:
    exponent: float
    prefactor: float
    r_squared: float
    window: Tuple[float, float]
    n_samples: int = 0
    max_residual: float = 0.0

    def as_dict(self) -> dict:
        return {
            "exponent": self.exponent,
            "prefactor": self.prefactor,
            "r_squared": self.r_squared,
            "window": list(self.window),
            "n_samples": self.n_samples,
            "max_residual": self.max_residual,
        }


def default_window(eps: float) -> Tuple[float, float]:
    return (2.0 * eps, 20.0 * eps)


def fit_power_law(
    d: Sequence[float] | Iterable[Tuple[float, float]],
    v: Optional[Sequence[float]] = None,
    window: Optional[Tuple[float, float]] = None,
) -> RateFit:
    """Least-squares line through ``(log d, log v)`` restricted to ``window``.

    Accepts either two arrays or a sequence of ``(d, v)`` pairs.  The window
    is closed; a sliver of relative slack absorbs rounding in grid distances.
    """
    if v is None:
        pairs = np.asarray(list(d), dtype=float)
        d, v = pairs[:, 0], pairs[:, 1]
    d = np.asarray(d, dtype=float)
    v = np.asarray(v, dtype=float)
    if window is None:
        window = (float(d.min()), float(d.max()))
    lo, hi = window
    if not lo < hi:
        raise RateFitError(f"empty window ({lo}, {hi})")
    slack = 1e-9 * hi
    sel = (d >= lo - slack) & (d <= hi + slack)
    if sel.sum() < 5:
        raise RateFitError(f"need at least 5 samples in window, got {int(sel.sum())}")
    dv, vv = d[sel], v[sel]
    if np.any(dv <= 0) or np.any(vv <= 0) or not np.all(np.isfinite(vv)):
        raise RateFitError("samples in window must have d > 0 and finite v > 0")

    x, y = np.log(dv), np.log(vv)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_res = float(np.dot(resid, resid))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(
        exponent=float(slope),
        prefactor=float(math.exp(intercept)),
        r_squared=float(min(max(r2, 0.0), 1.0)),
        window=(float(lo), float(hi)),
        n_samples=int(sel.sum()),
        max_residual=float(np.abs(resid).max()),
    )


@dataclass(frozen=True)
class RateCheck:
    name: str
    measured: float
    expected: float
    tolerance: float

    @property
    def rel_error(self) -> float:
        return abs(self.measured - self.expected) / abs(self.expected)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.measured) and self.rel_error <= self.tolerance)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": self.measured,
            "expected": self.expected,
            "rel_error": self.rel_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def boundary_rate_checks(
    d: np.ndarray,
    u: np.ndarray,
    grad_abs: np.ndarray,
    drift_abs: np.ndarray,
    m: np.ndarray,
    p: float,
    window: Tuple[float, float],
    tol: float = 0.05,
) -> List[RateCheck]:
    """Compare computed boundary behaviour with the leading-order theory.

    Power laws are fitted over ``window``; the two prefactor limits are read
    at the innermost sample of the window.  The exponent of ``u`` is checked
    only for ``p < 2`` (for ``p = 2`` the blow-up is logarithmic).
    """
    model = AsymptoticModel(p)
    d = np.asarray(d, dtype=float)
    lo, hi = window
    sel = (d >= lo * (1 - 1e-9)) & (d <= hi * (1 + 1e-9))
    if not sel.any():
        raise RateFitError(f"no samples in window ({lo}, {hi})")
    inner = np.flatnonzero(sel)[np.argmin(d[sel])]
    pc = model.p_conj

    def _exponent(v):
        try:
            return fit_power_law(d, np.asarray(v, dtype=float), window).exponent
        except RateFitError:
            return float("nan")

    checks = [RateCheck("m_exponent", _exponent(m), pc, tol)]
    if not model.is_log:
        checks.append(RateCheck("u_exponent", _exponent(u), model.u_exponent, tol))
    checks.append(
        RateCheck(
            "gradient_prefactor",
            float(d[inner] ** (pc - 1.0) * np.abs(grad_abs[inner])),
            model.gradient_prefactor,
            tol,
        )
    )
    checks.append(RateCheck("drift_blowup", float(d[inner] * np.abs(drift_abs[inner])), pc, tol))
    return checks
