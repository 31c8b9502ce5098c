import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import J01_SQUARED, PI2, hopf_cole_drift, hopf_cole_value, interval_ergodic_constant

from ergomfg.asymptotics import AsymptoticModel, boundary_rate_checks, fit_power_law
from ergomfg.domain import Interval, RadialDisk, build_grid, centered_gradient
from ergomfg.hjb import (
    HjbConvergenceError,
    HjbProblem,
    HjbSolution,
    HjbTemplate,
    compute_drift,
    continuation_in_eps,
    hjb_jacobian,
    hjb_residual,
    is_m_matrix,
    richardson,
    solve_ergodic_hjb,
)

_cache = {}


def solve_interval(p, eps, n, f=0.0, **kw):
    key = (p, eps, n, f, tuple(sorted(kw.items())))
    if key not in _cache:
        g = build_grid(Interval(0.0, 1.0), n, eps)
        pb = HjbProblem(g, p, np.full(g.size, f), **kw)
        _cache[key] = (g, pb, solve_ergodic_hjb(pb))
    return _cache[key]


# -- solve_ergodic_hjb examples


def test_hopf_cole_lambda(hopf_cole):
    g, pb, sol, _ = hopf_cole
    assert sol.lam == pytest.approx(PI2, rel=0.01)
    assert sol.u[pb.gauge] == 0.0
    assert sol.residual_rel <= pb.tol
    assert np.all(np.isfinite(sol.drift_b))


def test_hopf_cole_profile(hopf_cole):
    g, pb, sol, _ = hopf_cole
    ref = hopf_cole_value(g.nodes)
    ref -= ref[pb.gauge]
    inner = g.d > 0.05
    assert np.abs(sol.u - ref)[inner].max() < 1e-2


def test_disk_lambda(disk_solution):
    g, pb, sol = disk_solution
    assert J01_SQUARED == pytest.approx(5.783186, abs=1e-6)
    assert sol.lam == pytest.approx(J01_SQUARED, rel=0.01)


def test_ball_lambda():
    g = build_grid(RadialDisk(1.0, 3), 512, 1 / 128)
    sol = solve_ergodic_hjb(HjbProblem(g, 2.0, np.zeros(g.size)))
    assert sol.lam == pytest.approx(PI2, rel=0.01)


@pytest.mark.parametrize("p", [1.25, 1.5, 1.75])
def test_power_lambda_matches_quadrature_oracle(p):
    g, pb, sol = solve_interval(p, 1 / 256, 4096)
    assert sol.lam == pytest.approx(interval_ergodic_constant(p), rel=0.01)
    assert sol.residual_rel <= pb.tol


def test_oracle_frozen_values():
    assert interval_ergodic_constant(2.0) == pytest.approx(PI2, rel=1e-12)
    assert interval_ergodic_constant(1.5) == pytest.approx(113.155, rel=1e-5)
    assert interval_ergodic_constant(1.25) == pytest.approx(45735.75, rel=1e-6)


@settings(max_examples=10)
@given(st.floats(-50, 50), st.sampled_from([2.0, 1.5, 1.25]))
def test_shift_equivariance(c, p):
    g, pb, base = solve_interval(p, 1 / 64, 256)
    sol = solve_ergodic_hjb(HjbProblem(g, p, pb.f + c))
    scale = max(abs(base.lam), abs(c), 1.0)
    assert abs(sol.lam - (base.lam + c)) <= 1e-13 * scale * 100
    assert np.abs(sol.u - base.u).max() <= 1e-6


def test_gauge_invariance_of_initial_guess():
    g, pb, base = solve_interval(1.5, 1 / 64, 256)
    from ergomfg.hjb import initial_profile

    sol = solve_ergodic_hjb(pb, u0=initial_profile(g, 1.5) + 17.0)
    assert sol.u[pb.gauge] == 0.0
    assert sol.lam == pytest.approx(base.lam, rel=1e-10)
    np.testing.assert_allclose(sol.drift_b, base.drift_b, rtol=1e-7, atol=1e-7)


def test_blow_up_shape(hopf_cole):
    g, pb, sol, _ = hopf_cole
    i0 = int(np.argmin(sol.u))
    assert abs(g.nodes[i0] - 0.5) < 2 * g.h
    window = g.d <= 20 * g.eps
    left = window & (g.nodes < 0.5)
    assert np.all(np.diff(sol.u[left]) < 0)
    right = window & (g.nodes > 0.5)
    assert np.all(np.diff(sol.u[right]) > 0)


# -- compute_drift


def test_drift_of_hopf_cole_value():
    # 3968 cells on (1/64, 63/64) put a node at x = 1/4
    g = build_grid(Interval(0, 1), 3968, 1 / 64)
    b = compute_drift(hopf_cole_value(g.nodes), 2.0, g)
    i = int(np.argmin(np.abs(g.nodes - 0.25)))
    assert g.nodes[i] == pytest.approx(0.25, abs=1e-14)
    assert b[i] == pytest.approx(-2 * np.pi, rel=1e-5)
    assert hopf_cole_drift(0.25) == pytest.approx(-6.2832, abs=1e-4)


@pytest.mark.parametrize("p", [1.2, 1.5, 2.0])
def test_drift_of_constant_is_zero(p):
    g = build_grid(Interval(0, 1), 64, 0.1)
    assert np.all(compute_drift(np.full(g.size, 3.0), p, g) == 0.0)
    assert np.all(compute_drift(np.full(g.size, 3.0), p, g, eta=1e-3) == 0.0)


def test_drift_blowup_rate_of_oracle():
    x = np.array([1e-2, 1e-3, 1e-4])
    vals = x * -hopf_cole_drift(x)
    assert np.all(np.diff(np.abs(vals - 2.0)) < 0)
    assert vals[-1] == pytest.approx(2.0, abs=1e-6)


def test_solution_drift_blowup(hopf_cole):
    g, pb, sol, _ = hopf_cole
    near = (g.d > 2 * g.eps) & (g.d < 4 * g.eps)
    assert np.all(np.abs(g.d[near] * np.abs(sol.drift_b[near]) - 2.0) < 0.05)


def test_feedback_remainder_bounded(hopf_cole):
    # b = p'/d nu + bounded: the remainder d-independent over the window
    g, pb, sol, _ = hopf_cole
    mask = (g.d >= 2 * g.eps) & (g.d <= 0.25)
    psi = sol.drift_b + 2.0 / g.d * g.grad_d
    assert np.abs(psi[mask]).max() < 10.0


# -- hjb_residual


def test_residual_of_solution(hopf_cole):
    g, pb, sol, _ = hopf_cole
    assert hjb_residual(sol, pb, scaled=True) <= pb.tol
    assert hjb_residual(sol, pb) < 1e-6


def test_residual_of_perturbation(hopf_cole):
    g, pb, sol, _ = hopf_cole
    i = g.center_index + 7
    for delta in (1e-6, 1e-5):
        bumped = HjbSolution(sol.u.copy(), sol.lam, sol.drift_b, 0, 0, sol.eps, 0)
        bumped.u[i] += delta
        r = hjb_residual(bumped, pb)
        assert 1.0 < r / (delta / g.h**2) < 3.0


def test_residual_grid_mismatch(hopf_cole):
    g, pb, sol, _ = hopf_cole
    other = HjbProblem(build_grid(Interval(0, 1), 256, 1 / 128), 2.0, np.zeros(257))
    with pytest.raises(ValueError):
        hjb_residual(sol, other)


def test_injected_oracle_residual_is_second_order():
    res = []
    for n in (256, 512, 1024):
        g = build_grid(Interval(0, 1), n, 0.125)
        pb = HjbProblem(g, 2.0, np.zeros(g.size))
        u = hopf_cole_value(g.nodes)
        fake = HjbSolution(u - u[pb.gauge], PI2, np.zeros(g.size), 0, 0, g.eps, 0)
        res.append(hjb_residual(fake, pb))
    rates = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(np.abs(rates - 2.0) < 0.1)


# -- boundary asymptotics


def _checks(p, eps, n):
    g, pb, sol = solve_interval(p, eps, n)
    grad = np.abs(centered_gradient(sol.u, g))
    grad[list(g.boundary_nodes)] = pb.boundary_gradient
    return g, sol, grad


@pytest.mark.parametrize("p,eps", [(1.25, 1 / 1024), (1.5, 1 / 1024)])
def test_u_exponent(p, eps):
    g, sol, grad = _checks(p, eps, int(16 / eps))
    m = AsymptoticModel(p)
    left = g.nodes < 0.5
    fit = fit_power_law(g.d[left], sol.u[left] - sol.u.min() + 1e-300, (2 * eps, 20 * eps))
    assert fit.exponent == pytest.approx(m.u_exponent, rel=0.05)


def test_log_band_p2():
    eps = 1 / 512
    g, sol, _ = _checks(2.0, eps, 8192)
    mask = (g.d >= 2 * eps) & (g.d <= 20 * eps)
    band = sol.u[mask] + np.log(g.d[mask])
    assert band.max() - band.min() <= 0.01


@pytest.mark.parametrize("p,eps", [(2.0, 1 / 512), (1.5, 1 / 1024), (1.25, 1 / 1024)])
def test_gradient_and_hessian_prefactors(p, eps):
    g, sol, grad = _checks(p, eps, int(16 / eps))
    m = AsymptoticModel(p)
    i = int(np.argmin(np.abs(g.d - 2 * eps) + (g.nodes > 0.5)))
    pref = g.d[i] ** (m.p_conj - 1) * grad[i]
    assert pref == pytest.approx((p - 1) ** (1 - m.p_conj), rel=0.05)
    u2 = (sol.u[i - 1] - 2 * sol.u[i] + sol.u[i + 1]) / g.h**2
    assert g.d[i] ** m.p_conj * u2 == pytest.approx(m.hessian_prefactor, rel=0.10)


@pytest.mark.parametrize("p,eps", [(2.0, 1 / 512), (1.5, 1 / 1024)])
def test_boundary_rate_checks_on_solution(p, eps, request):
    from ergomfg.fokker_planck import solve_fp

    g, sol, grad = _checks(p, eps, int(16 / eps))
    fp = solve_fp(sol.drift_b, g)
    left = g.nodes <= 0.5
    checks = boundary_rate_checks(
        g.d[left], sol.u[left], grad[left], np.abs(sol.drift_b[left]), fp.m[left], p, (2 * eps, 20 * eps)
    )
    for c in checks:
        assert c.passed, c.as_dict()


# -- monotone scheme


@pytest.mark.parametrize("p", [2.0, 1.5])
def test_jacobian_is_m_matrix(p):
    g, pb, sol = solve_interval(p, 1 / 128, 512)
    assert is_m_matrix(hjb_jacobian(sol, pb))


def test_m_matrix_detector():
    import scipy.sparse as sp

    assert is_m_matrix(sp.diags([-1, 2, -1], [-1, 0, 1], shape=(5, 5)))
    assert not is_m_matrix(sp.diags([1, 2, -1], [-1, 0, 1], shape=(5, 5)))
    assert not is_m_matrix(sp.diags([-1, 1, -1], [-1, 0, 1], shape=(5, 5)))


# -- continuation


@pytest.fixture(scope="module")
def hc_continuation():
    tpl = HjbTemplate(Interval(0, 1), 2.0, n_cells=512)
    return continuation_in_eps(tpl, [1 / 32, 1 / 64, 1 / 128])


def test_continuation_extrapolates(hc_continuation):
    res = hc_continuation
    assert res.lambda_extrapolated == pytest.approx(PI2, rel=0.002)
    assert res.monotone
    assert len(res.solutions) == 3


def test_continuation_shift():
    tpl0 = HjbTemplate(Interval(0, 1), 2.0, n_cells=256)
    tpl1 = HjbTemplate(Interval(0, 1), 2.0, f=lambda x: np.ones_like(x), n_cells=256)
    sched = [1 / 32, 1 / 64]
    l0 = continuation_in_eps(tpl0, sched).lambdas
    l1 = continuation_in_eps(tpl1, sched).lambdas
    np.testing.assert_allclose(np.array(l1), np.array(l0) + 1.0, rtol=1e-12)


def test_continuation_cauchy(hc_continuation):
    res = hc_continuation
    x = 0.3
    vals = [np.interp(x, pb.grid.nodes, s.u) for pb, s in zip(res.problems, res.solutions)]
    assert abs(vals[1] - vals[2]) < abs(vals[0] - vals[1])


def test_continuation_errors():
    tpl = HjbTemplate(Interval(0, 1), 2.0, n_cells=256)
    with pytest.raises(ValueError):
        continuation_in_eps(tpl, [1 / 64, 1 / 32])
    with pytest.raises(ValueError):
        continuation_in_eps(tpl, [1 / 64])
    with pytest.raises(ValueError):
        HjbTemplate(Interval(0, 1), 2.0).grid_for(0.1)


def test_richardson_exact_for_model_error():
    lam, c = 3.0, 0.7
    e1, e2 = 0.1, 0.05
    assert richardson(lam + c * e1, lam + c * e2, 2.0, 1.0) == pytest.approx(lam)
    assert richardson(lam + c * e1**2, lam + c * e2**2, 2.0, 2.0) == pytest.approx(lam)


def test_cells_per_eps_template():
    tpl = HjbTemplate(Interval(0, 1), 2.0, cells_per_eps=8)
    assert tpl.grid_for(1 / 64).n_cells == 256


# -- boundary modes


@pytest.mark.parametrize("mode", ["matched_dirichlet", "penalized_dirichlet"])
def test_dirichlet_modes_converge_to_same_lambda(mode):
    errs = []
    for eps in (1 / 64, 1 / 128, 1 / 256):
        g, pb, sol = solve_interval(2.0, eps, int(16 / eps), boundary_mode=mode)
        errs.append(abs(sol.lam - PI2) / PI2)
    assert errs[0] > errs[1] > errs[2]
    assert errs[1] / errs[2] == pytest.approx(2.0, rel=0.2)


def test_neumann_mode_is_sharp():
    g, pb, sol = solve_interval(2.0, 1 / 128, 2048)
    assert abs(sol.lam - PI2) / PI2 < 1e-4


# -- errors


def test_problem_validation():
    g = build_grid(Interval(0, 1), 64, 0.1)
    f = np.zeros(g.size)
    with pytest.raises(ValueError):
        HjbProblem(g, 2.5, f)
    with pytest.raises(ValueError):
        HjbProblem(g, 2.0, f[:-1])
    bad = f.copy()
    bad[3] = np.nan
    with pytest.raises(ValueError):
        HjbProblem(g, 2.0, bad)
    with pytest.raises(ValueError):
        HjbProblem(g, 2.0, f, boundary_mode="robin")
    with pytest.raises(ValueError):
        HjbProblem(g, 2.0, f, gauge=0)
    with pytest.raises(ValueError):
        HjbProblem(g, 2.0, f, tol=0.0)


def test_newton_failure_reports_residual():
    g = build_grid(Interval(0, 1), 256, 1 / 64)
    pb = HjbProblem(g, 1.5, np.zeros(g.size), max_iter=1, tol=1e-14)
    with pytest.raises(HjbConvergenceError) as info:
        solve_ergodic_hjb(pb)
    assert info.value.residual > pb.tol
