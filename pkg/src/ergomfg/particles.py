"""Monte-Carlo simulation of the controlled diffusion ``dX = alpha dt + sqrt(2) dB``.

The feedback ``alpha`` is a nodal field on the grid (the signed x-component
on an interval, the radial component on a disk), interpolated linearly
between nodes.  Inside the collar ``d < eps`` that the grid does not cover,
``alpha`` is replaced by its leading-order form ``-p' nu / d``.

Each Euler-Maruyama step of length ``dt`` is cut into sub-steps no longer
than ``safety * d / (|alpha| + 1)``, and short enough that the Brownian
increment ``sqrt(2 tau)`` stays below ``noise_safety * d``.  A particle that still lands below
``d_floor`` is mirrored back and the event is counted in ``escape_count``.

Random numbers come from a splitmix64 stream per particle, keyed by the
seed and the particle index, so a particle's path does not depend on how
particles are scheduled.  Particles are processed in fixed blocks with
private integer histograms, merged in block order: results are identical
for any number of threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numba as nb
import numpy as np

from .asymptotics import AsymptoticModel
from .domain import Grid

__all__ = [
    "SdeConfig",
    "EmpiricalMeasure",
    "SimulationError",
    "simulate",
    "empirical_distance",
    "bin_edges",
]

# numba probes TBB first and warns when the installed one is too old; the
# OpenMP or workqueue layer it falls back to is fine for these kernels
warnings.filterwarnings("ignore", message="The TBB threading layer", category=nb.NumbaWarning)

_BLOCK = 64
_MASK64 = (1 << 64) - 1


class SimulationError(RuntimeError):
    """A particle left the finite range; carries the offending particle."""

    def __init__(self, msg: str, particle: int = -1):
        super().__init__(msg)
        self.particle = particle


@dataclass(frozen=True)
class SdeConfig:
    n_particles: int = 10_000
    dt: float = 1e-3
    t_burn: float = 10.0
    t_sample: float = 50.0
    seed: int = 0
    d_floor: Optional[float] = None
    substep_safety: float = 0.1
    noise_safety: float = 0.2

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 100:
            raise ValueError(f"n_particles must be an integer >= 100, got {self.n_particles}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_burn < 0 or self.t_sample <= 0:
            raise ValueError("need t_burn >= 0 and t_sample > 0")
        if not 0.0 < self.substep_safety < 1.0:
            raise ValueError(f"substep_safety must lie in (0, 1), got {self.substep_safety}")
        if not 0.0 < self.noise_safety < 1.0:
            raise ValueError(f"noise_safety must lie in (0, 1), got {self.noise_safety}")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def floor_for(self, grid: Grid) -> float:
        floor = 0.5 * grid.eps if self.d_floor is None else float(self.d_floor)
        if floor < 0.5 * grid.eps * (1 - 1e-12):
            raise ValueError(f"d_floor={floor} is below eps/2={0.5 * grid.eps}")
        if floor >= grid.eps:
            raise ValueError(f"d_floor={floor} must stay below eps={grid.eps}")
        return floor


@dataclass
class EmpiricalMeasure:
    histogram: np.ndarray
    n_samples: int
    escape_count: int
    steps: int
    substeps: int
    min_distance: float
    cost_average: Optional[float] = None
    grid: Optional[Grid] = field(default=None, repr=False)

    @property
    def escape_rate(self) -> float:
        return self.escape_count / self.steps if self.steps else 0.0


def bin_edges(grid: Grid) -> np.ndarray:
    """Dual-cell edges, with the end cells stretched to the true boundary."""
    x = grid.nodes
    edges = np.empty(x.size + 1)
    edges[1:-1] = 0.5 * (x[:-1] + x[1:])
    if grid.is_disk:
        edges[0], edges[-1] = 0.0, grid.spec.radius
    else:
        edges[0], edges[-1] = grid.spec.a, grid.spec.b
    return edges


# ---------------------------------------------------------------- RNG


@nb.njit(cache=True)
def _splitmix(state):
    state = (state + np.uint64(0x9E3779B97F4A7C15)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@nb.njit(cache=True)
def _uniform(state):
    state, z = _splitmix(state)
    # 53 random bits in (0, 1)
    return state, ((z >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True, error_model="numpy")
def _normal_pair(state):
    # Marsaglia polar method: two independent standard normals, no trig
    while True:
        state, u1 = _uniform(state)
        state, u2 = _uniform(state)
        v1 = 2.0 * u1 - 1.0
        v2 = 2.0 * u2 - 1.0
        s = v1 * v1 + v2 * v2
        if 0.0 < s < 1.0:
            f = math.sqrt(-2.0 * math.log(s) / s)
            return state, v1 * f, v2 * f


@nb.njit(cache=True)
def _stream_seed(seed, index):
    _, a = _splitmix(seed ^ (index * np.uint64(0xD1B54A32D192ED03)))
    return a


# ------------------------------------------------------- geometry helpers


@nb.njit(cache=True)
def _interp(v, x0, h, t):
    s = (t - x0) / h
    n = v.size
    if s <= 0.0:
        return v[0]
    if s >= n - 1:
        return v[n - 1]
    i = int(s)
    w = s - i
    return (1.0 - w) * v[i] + w * v[i + 1]


@nb.njit(cache=True)
def _cell(t, x0, h, n):
    # dual cell of a uniform grid: nearest node, end cells unbounded
    i = int(math.floor((t - x0) / h + 0.5))
    return min(max(i, 0), n - 1)


@nb.njit(cache=True)
def _radial_alpha(alpha, x0, h, r, dist, eps, collar, use_collar):
    if dist < eps:
        if use_collar:
            return -collar / dist
        return alpha[alpha.size - 1]
    return _interp(alpha, x0, h, r)


# ---------------------------------------------------------------- kernels


@nb.njit(cache=True)
def _alpha_interval(alpha, x0, h, a, b, eps, collar, use_collar, x):
    dist = min(x - a, b - x)
    if dist < eps and use_collar:
        return collar / dist if x < 0.5 * (a + b) else -collar / dist
    return _interp(alpha, x0, h, x)


@nb.njit(cache=True, error_model="numpy")
def _block_interval(
    k0, k1, hist_row, escapes, subs, dmin, costsum, ok,
    alpha, cost, x0, h, a, b, eps, collar, use_collar,
    dt, n_burn, n_sample, seed, d_floor, safety, noise, cq, q,
):
    """Advance particles ``k0 .. k1-1`` together.

    Paths are independent; stepping them in lockstep only lets the CPU
    overlap their dependency chains.
    """
    nk = k1 - k0
    mid = 0.5 * (a + b)
    inv_h = 1.0 / h
    nn = alpha.size
    st = np.empty(nk, dtype=np.uint64)
    x = np.empty(nk)
    rem = np.empty(nk)
    spare = np.zeros(nk)
    have = np.zeros(nk, dtype=np.bool_)
    for i in range(nk):
        s0 = _stream_seed(np.uint64(seed), np.uint64(k0 + i))
        s0, u = _uniform(s0)
        st[i] = s0
        x[i] = a + eps + (b - a - 2 * eps) * u
    for step in range(n_burn + n_sample):
        rem[:] = dt
        active = nk
        while active > 0:
            active = 0
            for i in range(nk):
                if rem[i] <= 0.0:
                    continue
                xi = x[i]
                dist = min(xi - a, b - xi)
                if dist < eps and use_collar:
                    al = collar / dist if xi < mid else -collar / dist
                else:
                    sx = (xi - x0) * inv_h
                    if sx <= 0.0:
                        al = alpha[0]
                    elif sx >= nn - 1:
                        al = alpha[nn - 1]
                    else:
                        j = int(sx)
                        w = sx - j
                        al = (1.0 - w) * alpha[j] + w * alpha[j + 1]
                tau = min(rem[i], safety * dist / (abs(al) + 1.0), noise * dist * dist)
                if have[i]:
                    z = spare[i]
                    have[i] = False
                else:
                    s0, z, z2 = _normal_pair(st[i])
                    st[i] = s0
                    spare[i] = z2
                    have[i] = True
                xi = xi + al * tau + math.sqrt(2.0 * tau) * z
                rem[i] -= tau
                subs[k0 + i] += 1
                if not math.isfinite(xi):
                    ok[k0 + i] = False
                    return
                dist = min(xi - a, b - xi)
                if dist < dmin[k0 + i]:
                    dmin[k0 + i] = dist
                if dist < d_floor:
                    escapes[k0 + i] += 1
                    # mirror about the floor, then clamp if still outside
                    if xi < mid:
                        xi = min(a + 2 * d_floor - (xi - a), mid)
                    else:
                        xi = max(b - 2 * d_floor + (b - xi), mid)
                x[i] = xi
                if rem[i] > 0.0:
                    active += 1
        if step >= n_burn:
            for i in range(nk):
                hist_row[_cell(x[i], x0, h, nn)] += 1
                if cq > 0.0:
                    al = _alpha_interval(alpha, x0, h, a, b, eps, collar, use_collar, x[i])
                    costsum[k0 + i] += _interp(cost, x0, h, x[i]) + cq * abs(al) ** q


@nb.njit(cache=True)
def _path_ball(
    k, hist_row, x, alpha, cost, h, radius, eps, collar, use_collar,
    dt, n_burn, n_sample, seed, d_floor, safety, noise, cq, q,
):
    dim = x.size
    st = _stream_seed(np.uint64(seed), np.uint64(k))
    # uniform start in the ball of radius R - eps
    for j in range(0, dim, 2):
        st, z1, z2 = _normal_pair(st)
        x[j] = z1
        if j + 1 < dim:
            x[j + 1] = z2
    nrm = math.sqrt(np.sum(x * x))
    st, u = _uniform(st)
    x *= (radius - eps) * u ** (1.0 / dim) / nrm
    escapes = 0
    subs = 0
    dmin = np.inf
    acc = 0.0
    for step in range(n_burn + n_sample):
        rem = dt
        while rem > 0.0:
            r = math.sqrt(np.sum(x * x))
            dist = radius - r
            al = _radial_alpha(alpha, 0.0, h, r, dist, eps, collar, use_collar)
            tau = min(rem, safety * dist / (abs(al) + 1.0), noise * dist * dist)
            sq = math.sqrt(2.0 * tau)
            # radial drift along the pre-step direction (none at the centre)
            drift = al * tau / r if r > 0.0 else 0.0
            for j in range(0, dim, 2):
                st, z1, z2 = _normal_pair(st)
                x[j] += drift * x[j] + sq * z1
                if j + 1 < dim:
                    x[j + 1] += drift * x[j + 1] + sq * z2
            rem -= tau
            subs += 1
            rn = math.sqrt(np.sum(x * x))
            if not math.isfinite(rn):
                return escapes, subs, dmin, acc, False
            dist = radius - rn
            dmin = min(dmin, dist)
            if dist < d_floor:
                escapes += 1
                target = max(radius - 2 * d_floor + (radius - rn), 0.5 * radius)
                x *= target / rn
        if step >= n_burn:
            r = math.sqrt(np.sum(x * x))
            hist_row[_cell(r, 0.0, h, alpha.size)] += 1
            if cq > 0.0:
                al = _radial_alpha(alpha, 0.0, h, r, radius - r, eps, collar, use_collar)
                acc += _interp(cost, 0.0, h, r) + cq * abs(al) ** q
    return escapes, subs, dmin, acc, True


@nb.njit(parallel=True, cache=True)
def _run(
    is_ball, dim, alpha, cost, x0, h, a, b, eps, collar, use_collar,
    n_particles, dt, n_burn, n_sample, seed, d_floor, safety, noise, cq, q,
):
    n_blocks = (n_particles + _BLOCK - 1) // _BLOCK
    hist = np.zeros((n_blocks, alpha.size), dtype=np.int64)
    escapes = np.zeros(n_particles, dtype=np.int64)
    subs = np.zeros(n_particles, dtype=np.int64)
    dmin = np.full(n_particles, np.inf)
    costsum = np.zeros(n_particles)
    ok = np.ones(n_particles, dtype=np.bool_)
    for blk in nb.prange(n_blocks):
        k0, k1 = blk * _BLOCK, min((blk + 1) * _BLOCK, n_particles)
        if not is_ball:
            _block_interval(
                k0, k1, hist[blk], escapes, subs, dmin, costsum, ok,
                alpha, cost, x0, h, a, b, eps, collar, use_collar,
                dt, n_burn, n_sample, seed, d_floor, safety, noise, cq, q,
            )
            continue
        x = np.zeros(dim)
        for k in range(k0, k1):
            e, s_, m_, c_, f_ = _path_ball(
                k, hist[blk], x, alpha, cost, h, b, eps, collar, use_collar,
                dt, n_burn, n_sample, seed, d_floor, safety, noise, cq, q,
            )
            escapes[k], subs[k], dmin[k], costsum[k], ok[k] = e, s_, m_, c_, f_
    return hist, escapes, subs, dmin, costsum, ok


def simulate(
    config: SdeConfig,
    alpha: np.ndarray,
    grid: Grid,
    p: Optional[float] = None,
    *,
    running_cost: Optional[np.ndarray] = None,
    threads: Optional[int] = None,
) -> EmpiricalMeasure:
    """Sample the invariant measure of the controlled dynamics.

    Parameters
    ----------
    config
        Particle count, step, horizons, seed, floor and sub-step safety.
    alpha
        Nodal feedback, typically ``-solution.drift_b``.
    grid
        Grid of ``Omega_eps``; its dual cells are the histogram bins.
    p
        Hamiltonian power.  When given, the collar ``d < eps`` uses the
        leading-order feedback ``-p' nu / d``; otherwise the feedback of the
        extreme node is held constant there.
    running_cost
        Optional nodal ``F``.  When given, the time average of
        ``F + C_q |alpha|^q`` along the sampled paths is reported.
    threads
        Number of numba threads; results do not depend on it.
    """
    alpha = np.ascontiguousarray(alpha, dtype=float)
    if alpha.shape != (grid.size,):
        raise ValueError(f"alpha has shape {alpha.shape}, grid has {grid.size} nodes")
    if not np.all(np.isfinite(alpha)):
        raise ValueError("alpha must be finite on every node")
    d_floor = config.floor_for(grid)
    use_collar = p is not None
    collar = AsymptoticModel(p).p_conj if use_collar else 0.0
    if running_cost is not None:
        cost = np.ascontiguousarray(running_cost, dtype=float)
        if cost.shape != (grid.size,):
            raise ValueError("running_cost must be a nodal field")
        if p is None:
            raise ValueError("running cost display needs p")
        cq, q = AsymptoticModel(p).cost_constant, AsymptoticModel(p).q
    else:
        cost, cq, q = np.zeros(grid.size), 0.0, 1.0

    n_burn = int(round(config.t_burn / config.dt))
    n_sample = max(1, int(round(config.t_sample / config.dt)))
    args = (
        config.n_particles, config.dt, n_burn, n_sample, int(config.seed),
        d_floor, config.substep_safety, 0.5 * config.noise_safety**2, cq, q,
    )
    previous = nb.get_num_threads()
    if threads is not None:
        nb.set_num_threads(max(1, min(int(threads), nb.config.NUMBA_NUM_THREADS)))
    try:
        if grid.is_disk:
            geom = (True, grid.spec.dim, alpha, cost, 0.0, grid.h, 0.0, grid.spec.radius)
        else:
            geom = (False, 1, alpha, cost, grid.nodes[0], grid.h, grid.spec.a, grid.spec.b)
        out = _run(*geom, grid.eps, collar, use_collar, *args)
    finally:
        nb.set_num_threads(previous)
    hist, escapes, subs, dmin, costsum, ok = out

    if not ok.all():
        k = int(np.flatnonzero(~ok)[0])
        raise SimulationError(f"particle {k} reached a non-finite position (seed={config.seed}, dt={config.dt})", k)
    counts = hist.sum(axis=0)
    n_samples = int(counts.sum())
    return EmpiricalMeasure(
        histogram=counts / n_samples,
        n_samples=n_samples,
        escape_count=int(escapes.sum()),
        steps=config.n_particles * (n_burn + n_sample),
        substeps=int(subs.sum()),
        min_distance=float(dmin.min()),
        cost_average=float(costsum.sum() / n_samples) if running_cost is not None else None,
        grid=grid,
    )


def empirical_distance(emp: EmpiricalMeasure, m) -> float:
    """L1 distance between the histogram and the cell masses ``V_i m_i``.

    ``m`` is an :class:`~ergomfg.fokker_planck.FpSolution` or a nodal
    density on the histogram's grid.
    """
    grid = emp.grid
    dens = getattr(m, "m", m)
    other = getattr(m, "grid", None)
    if grid is None:
        raise ValueError("empirical measure does not carry its grid")
    if other is not None and not grid.same_as(other):
        raise ValueError("histogram and density live on different grids")
    dens = np.asarray(dens, dtype=float)
    if dens.shape != emp.histogram.shape:
        raise ValueError(f"binning mismatch: {emp.histogram.size} bins vs {dens.size} nodes")
    return float(np.abs(emp.histogram - grid.volumes * dens).sum())
