import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import PI2, hopf_cole_density, hopf_cole_value

import ergomfg.mfg as mfg_mod
from ergomfg.domain import Interval, build_grid
from ergomfg.fokker_planck import weak_residual
from ergomfg.hjb import HjbConvergenceError, HjbProblem, hjb_residual
from ergomfg.mfg import (
    CouplingSpec,
    MfgEquilibrium,
    MfgSolverError,
    bregman,
    eval_coupling,
    generator_pairing,
    monotonicity_pairing,
    solve_mfg,
    uniqueness_gap,
)

GRID = build_grid(Interval(0, 1), 512, 1 / 128)


def l1(a, b):
    return GRID.integrate(np.abs(a - b))


@pytest.fixture(scope="module")
def coupled():
    spec = CouplingSpec(kind="local_linear", strength=1.0)
    eq = solve_mfg(GRID, 2.0, spec, damping=0.5, tol=1e-10)
    return spec, eq


@pytest.fixture(scope="module")
def coupled_boundary_start(coupled):
    spec, _ = coupled
    mu0 = 1.0 + 50.0 * (GRID.d < 0.1)
    return solve_mfg(GRID, 2.0, spec, damping=0.5, tol=1e-10, mu0=mu0)


# -- eval_coupling


def test_none_returns_f0():
    f0 = np.cos(GRID.nodes)
    spec = CouplingSpec(f0=f0, kind="none", strength=5.0)
    assert np.array_equal(eval_coupling(spec, np.ones(GRID.size), GRID), f0)


def test_local_linear_example():
    spec = CouplingSpec(kind="local_linear", strength=1.0)
    F = eval_coupling(spec, hopf_cole_density(GRID.nodes), GRID)
    assert F[GRID.center_index] == pytest.approx(2.0, rel=1e-12)


def test_nonlocal_narrow_kernel_limit():
    m = hopf_cole_density(GRID.nodes)
    local = eval_coupling(CouplingSpec(kind="local_linear", strength=1.0), m, GRID)
    gaps = [
        l1(eval_coupling(CouplingSpec(kind="nonlocal", strength=1.0, width=w), m, GRID), local)
        for w in (0.1, 0.03, 0.01, 1e-4)
    ]
    assert np.all(np.diff(gaps) < 0)
    assert gaps[-1] < 1e-12


def test_callable_base_cost():
    spec = CouplingSpec(f0=lambda x: x**2)
    np.testing.assert_allclose(spec.base(GRID), GRID.nodes**2)


def test_coupling_validation():
    with pytest.raises(ValueError):
        CouplingSpec(kind="quadratic")
    with pytest.raises(ValueError):
        CouplingSpec(kind="nonlocal", width=0.0)
    with pytest.raises(ValueError):
        CouplingSpec(f0=np.inf).base(GRID)
    assert CouplingSpec(kind="local_linear", strength=-1).monotone is False
    assert CouplingSpec(kind="none", strength=-1).monotone is True


@given(st.floats(0, 10), arrays(float, GRID.size, elements=st.floats(0, 5)))
def test_monotonicity_certificate(c, m1):
    spec = CouplingSpec(kind="local_linear", strength=c)
    m2 = hopf_cole_density(GRID.nodes)
    val = monotonicity_pairing(spec, m1, m2, GRID)
    ref = c * GRID.integrate((m1 - m2) ** 2)
    assert val == pytest.approx(ref, rel=1e-12, abs=1e-12)
    assert val >= 0


# -- solve_mfg


def test_decoupled_single_iteration():
    eq = solve_mfg(GRID, 2.0, CouplingSpec(kind="none"))
    assert eq.iterations == 1 and eq.converged
    assert eq.lam == pytest.approx(PI2, rel=0.01)


def test_zero_strength_is_hopf_cole():
    eq = solve_mfg(GRID, 2.0, CouplingSpec(kind="local_linear", strength=0.0), tol=1e-10)
    assert eq.converged
    assert eq.lam == pytest.approx(PI2, rel=0.01)
    ref = hopf_cole_value(GRID.nodes)
    inner = GRID.d > 0.05
    assert np.abs(eq.u - (ref - ref[GRID.center_index]))[inner].max() < 1e-2
    assert np.abs(eq.m - hopf_cole_density(GRID.nodes))[inner].max() < 1e-2


def test_coupled_convergence(coupled):
    _, eq = coupled
    assert eq.converged
    assert eq.residual < 1e-8
    assert eq.iterations <= 60
    assert eq.lam > PI2


def test_initialisations_agree(coupled, coupled_boundary_start):
    _, eq = coupled
    assert coupled_boundary_start.converged
    assert l1(eq.m, coupled_boundary_start.m) < 1e-6


def test_damping_consistency(coupled):
    spec, eq = coupled
    eq1 = solve_mfg(GRID, 2.0, spec, damping=1.0, tol=1e-10)
    assert eq1.converged
    assert l1(eq.m, eq1.m) < 1e-6


def test_history_and_residual(coupled):
    _, eq = coupled
    ks = [k for k, _, _ in eq.history]
    assert ks == list(range(1, eq.iterations + 1))
    assert eq.history[-1][1] <= 1e-10


def test_iterates_are_probabilities():
    seen = []
    real = mfg_mod.solve_fp

    def spy(b, grid, scheme):
        out = real(b, grid, scheme)
        seen.append(out.m)
        return out

    mfg_mod.solve_fp, saved = spy, mfg_mod.solve_fp
    try:
        solve_mfg(GRID, 2.0, CouplingSpec(kind="local_linear", strength=1.0), max_iter=5, tol=0.0)
    finally:
        mfg_mod.solve_fp = saved
    mu = np.full(GRID.size, 1 / GRID.total_volume)
    for m in seen:
        mu = 0.5 * mu + 0.5 * m
        assert mu.min() >= 0
        assert GRID.integrate(mu) == pytest.approx(1.0, abs=1e-12)


def test_equilibrium_residuals(coupled):
    spec, eq = coupled
    F = eval_coupling(spec, eq.m, GRID)
    pb = HjbProblem(GRID, 2.0, F)
    # the last HJB solve used the previous iterate, one tol away from m
    assert hjb_residual(eq.hjb, pb) < 1e-6
    assert weak_residual(eq.fp, eq.hjb.drift_b, GRID, [GRID.nodes, np.cos(3 * GRID.nodes)]) < 1e-10


def test_generator_pairing_vanishes(coupled):
    _, eq = coupled
    assert abs(generator_pairing(eq, GRID)) < 1e-8


def test_max_iter_reports_not_converged():
    eq = solve_mfg(GRID, 2.0, CouplingSpec(kind="local_linear", strength=1.0), max_iter=2)
    assert not eq.converged
    assert eq.iterations == 2


def test_non_monotone_flagged(caplog):
    with caplog.at_level(logging.WARNING, logger="ergomfg.mfg"):
        eq = solve_mfg(GRID, 2.0, CouplingSpec(kind="local_linear", strength=-0.5), max_iter=3)
    assert not eq.monotone
    assert any("non-monotone" in r.message for r in caplog.records)


def test_inner_failure_carries_iteration(monkeypatch):
    calls = {"n": 0}
    real = mfg_mod.solve_ergodic_hjb

    def flaky(pb, u0=None, lam0=None):
        calls["n"] += 1
        if calls["n"] == 3:
            raise HjbConvergenceError("stalled", 1.0, 5)
        return real(pb, u0=u0, lam0=lam0)

    monkeypatch.setattr(mfg_mod, "solve_ergodic_hjb", flaky)
    with pytest.raises(MfgSolverError) as info:
        solve_mfg(GRID, 2.0, CouplingSpec(kind="local_linear", strength=1.0))
    assert info.value.iteration == 3


def test_argument_validation():
    with pytest.raises(ValueError):
        solve_mfg(GRID, 2.0, CouplingSpec(), damping=0.0)
    with pytest.raises(ValueError):
        solve_mfg(GRID, 2.0, CouplingSpec(), mu0=-np.ones(GRID.size))


# -- uniqueness identity


def test_gap_of_identical_equilibria(coupled):
    spec, eq = coupled
    total, terms = uniqueness_gap(eq, eq, spec, GRID, 2.0)
    assert total == 0.0 and terms == (0.0, 0.0, 0.0)


def test_gap_of_independent_runs(coupled, coupled_boundary_start):
    spec, eq = coupled
    total, terms = uniqueness_gap(eq, coupled_boundary_start, spec, GRID, 2.0)
    assert abs(total) < 1e-6
    assert min(terms) >= -1e-12


@pytest.mark.parametrize("p", [1.25, 1.5, 2.0])
def test_bregman_terms_nonnegative_for_perturbed_pair(p):
    u1 = hopf_cole_value(GRID.nodes)
    u2 = u1 + 0.3 * np.sin(5 * GRID.nodes)
    m1 = hopf_cole_density(GRID.nodes)
    m2 = m1 * (1 + 0.2 * np.cos(3 * GRID.nodes))
    m2 /= GRID.integrate(m2)
    eq1 = MfgEquilibrium(0.0, u1, m1, [], True, True)
    eq2 = MfgEquilibrium(0.0, u2, m2, [], True, True)
    _, (t1, t2, t3) = uniqueness_gap(eq1, eq2, CouplingSpec(kind="local_linear", strength=1.0), GRID, p)
    assert t1 >= 0 and t2 > 0 and t3 > 0


@given(
    st.floats(1.01, 2.0),
    arrays(float, 16, elements=st.floats(-100, 100)),
    arrays(float, 16, elements=st.floats(-100, 100)),
)
def test_bregman_convexity(p, q, r):
    scale = np.abs(q) ** p + np.abs(r) ** p + 1.0
    assert np.all(bregman(q, r, p) >= -1e-12 * scale)


def test_gap_grid_mismatch(coupled):
    spec, eq = coupled
    other = build_grid(Interval(0, 1), 256, 1 / 128)
    with pytest.raises(ValueError):
        uniqueness_gap(eq, eq, spec, other, 2.0)
