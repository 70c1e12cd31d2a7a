"""Saddle solver, analytic branches and boundary tracing."""

import math

import numpy as np
import pytest

from csphase.replica import (
    ModelParams,
    NonconvergenceError,
    OrderParameters,
    alpha_c,
    at_condition,
    free_energy,
    l1_alpha_c,
    l1_success_chihat,
    solve_saddle,
    stationarity_residuals,
    success_solution,
    trace_boundary,
    worst_case_alpha,
)
from csphase.scalar_maps import Norm, gauss_pdf, gauss_tail, gauss_dz_rule

RULE = gauss_dz_rule(201)


def random_theta(rng) -> OrderParameters:
    return OrderParameters(
        Q=rng.uniform(0.05, 2.0),
        chi=rng.uniform(0.05, 2.0),
        m=rng.uniform(-0.5, 1.0),
        Qhat=rng.uniform(0.2, 5.0),
        chihat=rng.uniform(0.05, 5.0),
        mhat=rng.uniform(0.2, 5.0),
    )


def fd_gradient(theta, params, step=1e-5):
    base = theta.as_array()
    grad = np.zeros(6)
    for i in range(6):
        hi = base.copy(); hi[i] += step
        lo = base.copy(); lo[i] -= step
        grad[i] = (free_energy(OrderParameters.from_array(hi), params, RULE)
                   - free_energy(OrderParameters.from_array(lo), params, RULE)) / (2 * step)
    return grad


# --------------------------
# stationarity vs finite differences
# --------------------------

@pytest.mark.parametrize("norm", [Norm.L0, Norm.L1, Norm.L2])
def test_residuals_match_finite_differences(norm):
    rng = np.random.default_rng(101 + norm.value)
    worst = 0.0
    for _ in range(34):
        theta = random_theta(rng)
        params = ModelParams(rng.uniform(0.2, 1.0), rng.uniform(0.1, 0.9), norm)
        got = stationarity_residuals(theta, params, RULE)
        want = fd_gradient(theta, params)
        worst = max(worst, np.abs(got - want).max())
    assert worst < 1e-6


def test_residuals_large_away_from_saddle():
    rng = np.random.default_rng(5)
    params = ModelParams(0.6, 0.4, Norm.L1)
    hits = 0
    for _ in range(20):
        r = stationarity_residuals(random_theta(rng), params, RULE)
        if np.abs(r).max() > 1e-3:
            hits += 1
    assert hits == 20  # generic points are nowhere near stationary


def test_free_energy_domain_errors():
    params = ModelParams(0.6, 0.4, Norm.L1)
    bad = OrderParameters(0.4, 0.0, 0.2, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        free_energy(bad, params, RULE)
    inf_theta = OrderParameters(0.4, 0.1, 0.2, math.inf, 1.0, math.inf)
    with pytest.raises(ValueError):
        free_energy(inf_theta, params, RULE)


def test_free_energy_dense_signal_drops_zero_site_term():
    # at rho = 1 the zero-signal average has no weight: chihat enters only
    # through the quadratic term and the signal-site field scale
    params = ModelParams(0.8, 1.0, Norm.L1)
    theta = OrderParameters(0.9, 0.4, 0.6, 1.3, 0.7, 1.1)
    from csphase.replica import _mean_phi_quad, _field_scales
    a1, a2 = _field_scales(theta)
    manual = (params.alpha * (theta.Q - 2 * theta.m + 1.0) / (2 * theta.chi)
              + theta.mhat * theta.m - theta.Qhat * theta.Q / 2
              + theta.chihat * theta.chi / 2
              + _mean_phi_quad(Norm.L1, a2, theta.Qhat, RULE))
    assert free_energy(theta, params, RULE) == pytest.approx(manual, abs=1e-15)


# --------------------------
# saddle solves
# --------------------------

def test_solve_l1_above_and_below_threshold():
    above = solve_saddle(ModelParams(0.9, 0.5, Norm.L1))
    assert above.is_success and above.mse < 1e-8
    assert not above.theta.is_finite()  # conjugates diverge at success
    below = solve_saddle(ModelParams(0.7, 0.5, Norm.L1))
    assert not below.is_success and below.mse > 1e-3
    assert below.residual < 1e-10
    # quadrature route agrees with the solver's own residual
    assert np.abs(stationarity_residuals(below.theta, below.params, RULE)).max() < 1e-9


def test_solved_saddle_is_stationary_for_free_energy():
    sol = solve_saddle(ModelParams(0.7, 0.5, Norm.L1))
    assert np.abs(fd_gradient(sol.theta, sol.params)).max() < 1e-6
    # non-degeneracy: Q enters the extremand with a generically nonzero
    # coefficient (it is exactly the Q-residual, which vanishes only at
    # the saddle), so perturbing Q off-saddle strictly changes the value
    off = OrderParameters.from_array(sol.theta.as_array() * 1.3 + 0.05)
    bumped = OrderParameters.from_array(off.as_array() + np.array([1e-3, 0, 0, 0, 0, 0]))
    assert abs(free_energy(bumped, sol.params, RULE)
               - free_energy(off, sol.params, RULE)) > 1e-9


def test_solve_l2_success_iff_alpha_at_least_one():
    for alpha, expect in [(0.9, False), (0.99, False), (1.0, True), (1.2, True)]:
        sol = solve_saddle(ModelParams(alpha, 0.5, Norm.L2))
        assert sol.is_success is expect, (alpha, sol.mse)
    # overdetermined dense-signal case: success with finite chihat
    sol = solve_saddle(ModelParams(1.5, 1.0, Norm.L2))
    assert sol.is_success
    assert math.isfinite(sol.theta.chihat)


def test_l2_failure_branch_closed_form():
    # the finite extremum at alpha < 1 has mse = rho (1 - alpha),
    # chi = (1 - alpha)/2, Qhat = 2 alpha/(1 - alpha), Q = m + ... = rho alpha
    for alpha, rho in [(0.3, 0.8), (0.6, 0.5), (0.9, 0.2)]:
        sol = solve_saddle(ModelParams(alpha, rho, Norm.L2))
        assert sol.mse == pytest.approx(rho * (1 - alpha), abs=1e-8)
        assert sol.theta.chi == pytest.approx((1 - alpha) / 2, abs=1e-8)
        assert sol.theta.Qhat == pytest.approx(2 * alpha / (1 - alpha), rel=1e-7)
        assert sol.theta.Q == pytest.approx(rho * alpha, abs=1e-8)


def test_solve_l0_success_and_failure_sides():
    sol = solve_saddle(ModelParams(0.75, 0.5, Norm.L0))
    assert sol.is_success
    assert sol.at_value == math.inf and not sol.at_stable
    # below the counting bound no finite extremum exists: the
    # zero-temperature response over the degenerate solution set diverges
    with pytest.raises(NonconvergenceError) as err:
        solve_saddle(ModelParams(0.3, 0.5, Norm.L0))
    assert err.value.theta is not None
    assert err.value.residual > 0


def test_eq9_identity_and_success_characterization():
    rng = np.random.default_rng(42)
    for _ in range(12):
        rho = rng.uniform(0.1, 0.9)
        alpha = rng.uniform(0.15, 1.0)
        if abs(alpha - l1_alpha_c(rho)) < 5e-3:
            continue
        sol = solve_saddle(ModelParams(alpha, rho, Norm.L1))
        t = sol.theta
        assert sol.mse == pytest.approx(t.Q - 2 * t.m + rho, abs=1e-12)
        near_success = abs(t.Q - rho) < 1e-6 and abs(t.m - rho) < 1e-6
        assert sol.is_success == near_success


def test_mse_continuity_and_monotonicity_near_l1_boundary():
    rho = 0.5
    ac = l1_alpha_c(rho)
    near = solve_saddle(ModelParams(ac - 1e-3, rho, Norm.L1))
    assert not near.is_success
    assert near.mse < 0.05
    mses = [solve_saddle(ModelParams(a, rho, Norm.L1)).mse
            for a in np.linspace(0.55, ac - 2e-3, 8)]
    assert all(b < a for a, b in zip(mses, mses[1:]))


# --------------------------
# analytic L1 threshold
# --------------------------

def test_l1_success_chihat_dense_signal_reduction():
    # at rho = 1 the condition collapses to chihat = (chihat + 1)/alpha
    assert l1_success_chihat(ModelParams(2.0, 1.0, Norm.L1)) == pytest.approx(1.0, rel=1e-10)
    assert l1_success_chihat(ModelParams(1.25, 1.0, Norm.L1)) == pytest.approx(4.0, rel=1e-10)


def test_l1_success_chihat_self_consistency():
    alpha, rho = 0.84, 0.5
    ch = l1_success_chihat(ModelParams(alpha, rho, Norm.L1))
    t = ch ** -0.5
    rhs = (2 * (1 - rho) * ((ch + 1) * gauss_tail(t) - math.sqrt(ch) * gauss_pdf(t))
           + rho * (ch + 1)) / alpha
    assert abs(rhs - ch) < 1e-10


def test_l1_success_chihat_requires_alpha_above_boundary():
    with pytest.raises(ValueError):
        l1_success_chihat(ModelParams(0.5, 0.5, Norm.L1))
    with pytest.raises(ValueError):
        l1_success_chihat(ModelParams(0.82, 0.5, Norm.L1))  # below alpha_c = 0.83129


def test_l1_alpha_c_endpoints_and_monotonicity():
    assert l1_alpha_c(1.0) == 1.0
    assert l1_alpha_c(0.999) == pytest.approx(1.0, abs=2e-3)
    assert l1_alpha_c(1e-4) < 0.01
    rhos = np.linspace(0.05, 0.95, 10)
    vals = [l1_alpha_c(r) for r in rhos]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(v > r for v, r in zip(vals, rhos))


def test_alpha_c_dispatch():
    assert alpha_c(0.3, Norm.L0) == (0.3, False)
    assert alpha_c(0.3, Norm.L2) == (1.0, True)
    a, valid = alpha_c(0.5, Norm.L1)
    assert valid and 0.83 < a < 0.832


def test_boundary_ordering_across_norms():
    for rho in np.linspace(0.1, 0.9, 5):
        a0, _ = alpha_c(rho, Norm.L0)
        a1, _ = alpha_c(rho, Norm.L1)
        a2, _ = alpha_c(rho, Norm.L2)
        assert a0 <= a1 <= a2 == 1.0


# --------------------------
# AT stability
# --------------------------

def test_at_condition_branches():
    # success branch exactly at the L1 boundary sits at criticality
    rho = 0.5
    ac = l1_alpha_c(rho, tol=1e-8)
    sol = success_solution(ModelParams(ac, rho, Norm.L1))
    assert at_condition(sol, RULE) == pytest.approx(1.0, abs=1e-3)
    # L2: stable success above 1 (ratio 1/alpha), marginal at 1
    sol = solve_saddle(ModelParams(1.2, 0.5, Norm.L2))
    assert at_condition(sol, RULE) == pytest.approx(1 / 1.2, rel=1e-9)
    assert sol.at_stable
    # L0 success: discontinuous minimizer, always unstable
    for alpha in (0.6, 0.8, 0.95):
        sol = success_solution(ModelParams(alpha, 0.5, Norm.L0))
        assert at_condition(sol, RULE) > 1.0
        assert not sol.at_stable


def test_at_condition_l1_failure_branch_is_marginal():
    # the 0-or-1/Qhat slope ties the squared-slope average to the chi
    # stationarity condition, so the ratio is exactly 1 on this branch
    sol = solve_saddle(ModelParams(0.7, 0.5, Norm.L1))
    assert at_condition(sol, RULE) == pytest.approx(1.0, abs=1e-8)
    assert sol.at_stable


# --------------------------
# worst case curve
# --------------------------

def test_worst_case_side_condition_excludes_moderate_rho():
    assert worst_case_alpha(0.1) is None
    assert worst_case_alpha(0.5) is None


def test_worst_case_bisection_contract():
    # the sufficient condition admits alpha <= 1 only at very small rho
    # (the exponent margin at alpha = 1 turns positive near rho ~ 7e-4)
    tol = 1e-6
    rho = 3e-4
    a = worst_case_alpha(rho, tol)
    side = 2 * rho / (2 ** 0.25 - 1) ** 2
    assert a is not None and side < a <= 1.0
    from csphase.replica import _worst_case_margin
    assert _worst_case_margin(a, rho) < 0.0
    # one step below the returned value some inequality fails
    assert _worst_case_margin(a - tol, rho) >= 0.0 or a - tol <= side


def test_worst_case_monotone_in_rho():
    rhos = np.linspace(5e-5, 6e-4, 12)
    vals = [worst_case_alpha(r) for r in rhos]
    vals = [v for v in vals if v is not None]
    assert len(vals) >= 6
    assert all(b > a for a, b in zip(vals, vals[1:]))


# --------------------------
# boundary tracing
# --------------------------

def test_trace_boundary_l1_increasing():
    grid = np.linspace(0.1, 0.9, 9)
    b = trace_boundary(Norm.L1, "typical_rs", grid)
    alphas = [a for _, a in b.points]
    assert all(y > x for x, y in zip(alphas, alphas[1:]))
    assert all(b.at_valid)
    assert all(a >= r for (r, a) in b.points)


def test_trace_boundary_l2_constant_and_l0_identity():
    grid = np.linspace(0.2, 0.8, 4)
    b2 = trace_boundary(Norm.L2, "typical_rs", grid)
    assert all(a == 1.0 for _, a in b2.points)
    b0 = trace_boundary(Norm.L0, "typical_rs", grid)
    assert all(a == r for r, a in b0.points)
    assert not any(b0.at_valid)


def test_trace_boundary_validation():
    with pytest.raises(ValueError):
        trace_boundary(Norm.L1, "typical_rs", [0.5, 0.4])
    with pytest.raises(ValueError):
        trace_boundary(Norm.L2, "worst_case", [0.001, 0.002])
