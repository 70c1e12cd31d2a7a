"""Replica-symmetric saddle-point analysis of L_p reconstruction thresholds.

For a random P x N measurement of an N-vector with density rho of nonzero
Gaussian entries, the typical behavior of "minimize ||x||_p subject to
F x = y" at compression rate alpha = P/N is governed by the extremization of
a free energy over six order parameters

    Theta = (Q, chi, m, Qhat, chihat, mhat):

    C_p = extr { alpha (Q - 2m + rho)/(2 chi) + mhat m - Qhat Q / 2
                 + chihat chi / 2
                 + (1 - rho) E_z phi_p(sqrt(chihat) z; Qhat)
                 + rho    E_z phi_p(sqrt(chihat + mhat^2) z; Qhat) }

with phi_p the single-site minimum from :mod:`csphase.scalar_maps` and E_z
the unit Gaussian average.  The mean square error per component of the
reconstruction is MSE = Q - 2m + rho; perfect recovery corresponds to the
"success" extremum Q = m = rho where Qhat and mhat diverge.

This module solves the stationarity conditions by damped fixed-point
iteration, evaluates the replica-symmetry-breaking (AT) stability ratio,
provides the closed-form threshold branches for all three norms, and traces
phase boundaries alpha_c(rho), including the worst-case sufficient-condition
curve for L1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .scalar_maps import (
    Norm,
    QuadratureRule,
    expect_dz,
    gauss_dz_rule,
    gauss_pdf,
    gauss_tail,
    phi_value,
    x_star_slope_value,
    x_star_threshold,
    x_star_value,
)

__all__ = [
    "OrderParameters",
    "ModelParams",
    "SaddleSolution",
    "PhaseBoundary",
    "NonconvergenceError",
    "free_energy",
    "stationarity_residuals",
    "solve_saddle",
    "success_solution",
    "l1_success_chihat",
    "l1_alpha_c",
    "alpha_c",
    "at_condition",
    "worst_case_alpha",
    "trace_boundary",
]

DEFAULT_RULE = gauss_dz_rule(201)

# Conjugate parameters past this size are treated as the diverging success
# branch (perfect reconstruction); see solve_saddle.
QHAT_CAP = 1e8
MSE_SUCCESS = 1e-8
# Stability comparisons tolerate solver/quadrature noise: the L1 failure
# branch is exactly marginal (its 0-or-1/Qhat slope makes the squared-slope
# average proportional to the chi stationarity condition), so the ratio sits
# at 1 up to roundoff there.
AT_MARGIN = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Problem parameters: compression rate alpha = P/N, signal density rho.

    alpha in (0, 1] is the compressed regime; alpha > 1 (overdetermined) is
    accepted so the trivial recovery region can be probed too.
    """

    alpha: float
    rho: float
    norm: Norm

    def __post_init__(self):
        if not self.alpha > 0.0 or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if not isinstance(self.norm, Norm):
            raise ValueError(f"norm must be a Norm, got {self.norm!r}")


@dataclass(frozen=True)
class OrderParameters:
    """The six saddle variables; Qhat, chihat, mhat may be math.inf on the
    success branch where the conjugates diverge."""

    Q: float
    chi: float
    m: float
    Qhat: float
    chihat: float
    mhat: float

    def __post_init__(self):
        if self.Q < 0.0 or self.chi < 0.0:
            raise ValueError("Q and chi must be nonnegative")
        if self.Qhat < 0.0 or self.chihat < 0.0 or self.mhat < 0.0:
            raise ValueError("conjugate parameters must be nonnegative (possibly inf)")

    def is_finite(self) -> bool:
        return all(
            math.isfinite(v)
            for v in (self.Q, self.chi, self.m, self.Qhat, self.chihat, self.mhat)
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.Q, self.chi, self.m, self.Qhat, self.chihat, self.mhat])

    @staticmethod
    def from_array(a) -> "OrderParameters":
        return OrderParameters(*(float(v) for v in a))


@dataclass(frozen=True)
class SaddleSolution:
    """An extremum of the free energy, with stability and error diagnostics."""

    params: ModelParams
    theta: OrderParameters
    free_energy: float
    mse: float
    is_success: bool
    at_stable: bool
    at_value: float
    residual: float


@dataclass(frozen=True)
class PhaseBoundary:
    """Sampled critical curve (rho, alpha_c) for one norm and method."""

    norm: Norm
    method: str  # "typical_rs" or "worst_case"
    points: tuple  # of (rho, alpha_c); alpha_c is nan where no point exists
    at_valid: tuple  # of bool, per point


class NonconvergenceError(RuntimeError):
    """Fixed-point iteration failed; carries the last state and residual."""

    def __init__(self, message: str, theta: OrderParameters, residual: float):
        super().__init__(message)
        self.theta = theta
        self.residual = residual


# --------------------------
# Closed-form Gaussian moments of the single-site minimizer
# --------------------------

def _moments(norm: Norm, a: float, qhat: float) -> tuple[float, float, float]:
    """(E[x*(a z)^2], E[z x*(a z)], E[z x*(a z)]/a) for z ~ N(0, 1).

    The third entry is the smoothed response (slope) moment, returned with
    its a -> 0 limit so callers never divide by a vanishing field scale.
    All three follow from Gaussian tail integrals:

        int_t^inf z Dz = g(t),  int_t^inf z^2 Dz = H(t) + t g(t).
    """
    if norm is Norm.L2:
        d = qhat + 2.0
        return a * a / (d * d), a / d, 1.0 / d
    if a <= 0.0:
        return 0.0, 0.0, 0.0
    if norm is Norm.L1:
        t = 1.0 / a
        H, g = gauss_tail(t), gauss_pdf(t)
        ex2 = (2.0 / qhat**2) * ((a * a + 1.0) * H - a * g)
        ezx = (2.0 * a / qhat) * H
        return ex2, ezx, ezx / a
    # L0: hard threshold at |h| = sqrt(2 qhat)
    t = math.sqrt(2.0 * qhat) / a
    s = gauss_tail(t) + t * gauss_pdf(t)
    return (2.0 * a * a / qhat**2) * s, (2.0 * a / qhat) * s, (2.0 / qhat) * s


def _field_scales(theta: OrderParameters) -> tuple[float, float]:
    a1 = math.sqrt(max(theta.chihat, 0.0))
    a2 = math.sqrt(max(theta.chihat, 0.0) + theta.mhat**2)
    return a1, a2


# --------------------------
# Free energy and stationarity (quadrature route)
# --------------------------

def _check_evaluable(theta: OrderParameters):
    if not theta.is_finite():
        raise ValueError("free energy requires finite order parameters "
                         "(diverging-conjugate solutions use the analytic branch)")
    if theta.chi <= 0.0:
        raise ValueError("free energy requires chi > 0")
    if theta.Qhat <= 0.0:
        raise ValueError("free energy requires Qhat > 0")


def _phi_breaks(norm: Norm, a: float, qhat: float):
    """z-locations of the single-site kinks for field scale a, or None."""
    if norm is Norm.L2 or a <= 0.0:
        return None
    t = x_star_threshold(qhat, norm) / a
    return (-t, t)


def _mean_phi_quad(norm: Norm, a: float, qhat: float, rule: QuadratureRule) -> float:
    if a <= 0.0:
        return 0.0  # phi_p(0; qhat) = 0 for every norm
    return expect_dz(lambda z: phi_value(a * z, qhat, norm), rule,
                     breaks=_phi_breaks(norm, a, qhat))


def free_energy(theta: OrderParameters, params: ModelParams,
                rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Value of the extremand at theta (not extremized).

    The two Gaussian averages run over the zero-signal sites (field scale
    sqrt(chihat), weight 1 - rho) and the signal sites (field scale
    sqrt(chihat + mhat^2), weight rho).  Kinked integrands are split at their
    thresholds; the L2 integrand is polynomial and uses the rule directly.
    """
    _check_evaluable(theta)
    alpha, rho, norm = params.alpha, params.rho, params.norm
    a1, a2 = _field_scales(theta)
    mse = theta.Q - 2.0 * theta.m + rho
    value = (
        alpha * mse / (2.0 * theta.chi)
        + theta.mhat * theta.m
        - theta.Qhat * theta.Q / 2.0
        + theta.chihat * theta.chi / 2.0
        + (1.0 - rho) * _mean_phi_quad(norm, a1, theta.Qhat, rule)
        + rho * _mean_phi_quad(norm, a2, theta.Qhat, rule)
    )
    return float(value)


def _moments_quad(norm: Norm, a: float, qhat: float,
                  rule: QuadratureRule) -> tuple[float, float, float]:
    """Quadrature twin of _moments, used by the stationarity residuals."""
    if a <= 0.0:
        return 0.0, 0.0, float(x_star_slope_value(0.0, qhat, norm))
    breaks = _phi_breaks(norm, a, qhat)
    ex2 = expect_dz(lambda z: x_star_value(a * z, qhat, norm) ** 2, rule, breaks=breaks)
    ezx = expect_dz(lambda z: z * x_star_value(a * z, qhat, norm), rule, breaks=breaks)
    return ex2, ezx, ezx / a


def stationarity_residuals(theta: OrderParameters, params: ModelParams,
                           rule: QuadratureRule = DEFAULT_RULE) -> np.ndarray:
    """The six partial derivatives of the extremand at theta.

    Order: (Q, chi, m, Qhat, chihat, mhat).  Derived by differentiating the
    extremand; the hatted derivatives use the envelope identities
    d phi/d Qhat = x*^2 / 2 and d phi/d h = -x*, which hold almost
    everywhere for all three norms because phi is continuous.  These forms
    are cross-checked against central finite differences of
    :func:`free_energy` in the test suite.
    """
    _check_evaluable(theta)
    alpha, rho, norm = params.alpha, params.rho, params.norm
    a1, a2 = _field_scales(theta)
    mse = theta.Q - 2.0 * theta.m + rho
    ex2_1, ezx_1, esl_1 = _moments_quad(norm, a1, theta.Qhat, rule)
    ex2_2, ezx_2, esl_2 = _moments_quad(norm, a2, theta.Qhat, rule)

    r_Q = alpha / (2.0 * theta.chi) - theta.Qhat / 2.0
    r_chi = -alpha * mse / (2.0 * theta.chi**2) + theta.chihat / 2.0
    r_m = theta.mhat - alpha / theta.chi
    r_Qhat = 0.5 * ((1.0 - rho) * ex2_1 + rho * ex2_2 - theta.Q)
    r_chihat = 0.5 * (theta.chi - (1.0 - rho) * esl_1 - rho * esl_2)
    r_mhat = theta.m - rho * (theta.mhat / a2) * ezx_2 if a2 > 0.0 else theta.m
    return np.array([r_Q, r_chi, r_m, r_Qhat, r_chihat, r_mhat])


# --------------------------
# Success branch (diverging conjugates)
# --------------------------

def _l1_existence_curve(tau: float, rho: float) -> float:
    """alpha at which the L1 success solution with noise scale tau exists.

    tau = chihat^{-1/2}; the curve is rho (1 + tau^2) plus the zero-site
    contribution 2 (1 - rho) [(1 + tau^2) H(tau) - tau g(tau)].
    """
    H, g = gauss_tail(tau), gauss_pdf(tau)
    return rho * (1.0 + tau * tau) + 2.0 * (1.0 - rho) * ((1.0 + tau * tau) * H - tau * g)


def l1_success_chihat(params: ModelParams) -> float:
    """chihat of the perfect-recovery (success) solution for the L1 norm.

    Solves the self-consistency condition

        chihat = alpha^{-1} [ 2 (1 - rho) ( (chihat + 1) H(chihat^{-1/2})
                                            - chihat^{1/2} g(chihat^{-1/2}) )
                              + rho (chihat + 1) ]

    by bracketing on the stable branch in the variable tau = chihat^{-1/2},
    where the equation reads G(tau) = alpha with G the existence curve.  Of
    the two roots the larger-tau (smaller-chihat) one is the locally stable
    solution; the roots merge at the phase boundary and no positive solution
    exists below it.
    """
    if params.norm is not Norm.L1:
        raise ValueError("l1_success_chihat applies to the L1 norm only")
    alpha, rho = params.alpha, params.rho
    if not alpha > rho:
        raise ValueError(f"no success solution: alpha={alpha} <= rho={rho}")
    fun = lambda t: _l1_existence_curve(t, rho) - alpha
    res = minimize_scalar(lambda t: _l1_existence_curve(t, rho),
                          bounds=(1e-9, 60.0), method="bounded",
                          options={"xatol": 1e-13})
    tau_min = float(res.x)
    if fun(tau_min) > 0.0:
        raise ValueError(
            f"no success solution at alpha={alpha}, rho={rho}: "
            f"alpha is below the existence edge {res.fun:.8f}")
    hi = max(2.0 * tau_min, 1.0)
    while fun(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e9:  # pragma: no cover
            raise RuntimeError("failed to bracket the success solution")
    tau = brentq(fun, tau_min, hi, xtol=1e-15, rtol=8.9e-16)
    return float(tau**-2)


def _l2_success_chihat(alpha: float, rho: float) -> float:
    """Limit of chihat along the L2 success branch (finite only for alpha > 1)."""
    if alpha > 1.0:
        return 4.0 * rho / (alpha - 1.0)
    return math.inf


def _success_free_energy(params: ModelParams) -> float:
    """Extremized value on the success branch: the typical minimized cost per
    element of the true signal (rho nonzero unit Gaussians)."""
    if params.norm is Norm.L1:
        return params.rho * math.sqrt(2.0 / math.pi)  # rho * E|N(0,1)|
    return params.rho  # L0: count density; L2: mean square


def _success_at_value(params: ModelParams) -> float:
    """AT stability ratio of the success solution, in the diverging-conjugate
    limit where the finite combination chi * Qhat -> alpha.

    L1: the signal sites saturate their threshold (slope probability -> rho)
    and the zero sites contribute 2 (1 - rho) H(chihat^{-1/2}).  L2: the
    slope is constant, giving 1/alpha.  L0: the minimizer jumps at its
    threshold, so the squared-slope average carries a squared delta and the
    ratio diverges: the success solution is always unstable.
    """
    alpha, rho = params.alpha, params.rho
    if params.norm is Norm.L0:
        return math.inf
    if params.norm is Norm.L2:
        return 1.0 / alpha
    chihat = l1_success_chihat(params)
    return (2.0 * (1.0 - rho) * gauss_tail(chihat**-0.5) + rho) / alpha


def success_solution(params: ModelParams) -> SaddleSolution:
    """The analytic perfect-recovery extremum Q = m = rho, MSE = 0.

    Qhat and mhat diverge on this branch; chi vanishes.  chihat stays finite
    for L1 (self-consistent value) and for L2 with alpha > 1, and diverges
    for L0 (and for L2 at exactly alpha = 1).
    """
    rho, norm = params.rho, params.norm
    if norm is Norm.L1:
        chihat = l1_success_chihat(params)
    elif norm is Norm.L2:
        chihat = _l2_success_chihat(params.alpha, rho)
    else:
        chihat = math.inf
    theta = OrderParameters(Q=rho, chi=0.0, m=rho,
                            Qhat=math.inf, chihat=chihat, mhat=math.inf)
    at_value = _success_at_value(params)
    return SaddleSolution(
        params=params,
        theta=theta,
        free_energy=_success_free_energy(params),
        mse=0.0,
        is_success=True,
        at_stable=bool(at_value <= 1.0 + AT_MARGIN),
        at_value=float(at_value),
        residual=0.0,
    )


# --------------------------
# Damped fixed-point solver
# --------------------------

def _default_init(params: ModelParams) -> OrderParameters:
    return OrderParameters(Q=params.rho, chi=1.0, m=params.rho / 2.0,
                           Qhat=1.0, chihat=1.0, mhat=1.0)


def _success_probe_init(params: ModelParams, kappa: float) -> OrderParameters:
    """Start on the perfect-recovery manifold with threshold margin kappa.

    Used to probe the local stability of the success solution when the
    default start collapses (for the L0 norm no failure extremum with finite
    order parameters exists, so the iteration diverges from generic starts).
    The probe fixes large conjugates with chihat = 2 Qhat / kappa^2 and a
    consistent near-zero MSE; whether it runs away to the success branch or
    decays is decided by the iteration itself.
    """
    qhat = 1e7
    chi = params.alpha / qhat
    chihat = 2.0 * qhat / (kappa * kappa)
    mse = chihat * chi * chi / params.alpha
    return OrderParameters(Q=params.rho, chi=chi, m=params.rho - mse / 2.0,
                           Qhat=qhat, chihat=chihat, mhat=qhat)


def _iterate(params: ModelParams, init: OrderParameters, tol: float,
             max_iter: int, damping: float) -> tuple[str, OrderParameters, float]:
    """Damped fixed-point pass.  Returns (kind, theta, residual) with kind in
    {"converged", "runaway", "diverged", "maxiter"}.

    Each sweep blends the conjugates toward (alpha/chi, alpha/chi,
    alpha MSE/chi^2), then the order parameters toward their Gaussian
    moments at the fresh conjugates.  Convergence is judged on the six
    stationarity derivatives evaluated at the post-sweep state; since the
    moments depend only on the conjugates, those derivatives come for free
    from the sweep's own moment evaluations.
    """
    alpha, rho, norm = params.alpha, params.rho, params.norm
    Q, chi, m = init.Q, init.chi, init.m
    qh, ch, mh = init.Qhat, init.chihat, init.mhat
    om = damping
    prev_res = math.inf
    # trailing window used to spot marginal (sub-geometric) success runaways
    qh_trend: list[float] = []
    mse_trend: list[float] = []
    res = math.inf
    for it in range(max_iter):
        mse = Q - 2.0 * m + rho
        qh = (1.0 - om) * qh + om * alpha / chi
        mh = (1.0 - om) * mh + om * alpha / chi
        ch = (1.0 - om) * ch + om * alpha * max(mse, 0.0) / (chi * chi)
        a1 = math.sqrt(max(ch, 0.0))
        a2 = math.sqrt(max(ch, 0.0) + mh * mh)
        ex2_1, _, esl_1 = _moments(norm, a1, qh)
        ex2_2, ezx_2, esl_2 = _moments(norm, a2, qh)
        Q_moment = (1.0 - rho) * ex2_1 + rho * ex2_2
        m_moment = rho * (mh / a2) * ezx_2
        chi_moment = (1.0 - rho) * esl_1 + rho * esl_2
        Q = (1.0 - om) * Q + om * Q_moment
        m = (1.0 - om) * m + om * m_moment
        chi = (1.0 - om) * chi + om * chi_moment
        mse = Q - 2.0 * m + rho

        # stationarity violation at the post-sweep state (moments only
        # depend on the conjugates, which did not move since evaluation)
        res = max(abs(alpha / chi - qh) / 2.0,
                  abs(ch - alpha * mse / (chi * chi)) / 2.0,
                  abs(mh - alpha / chi),
                  abs(Q_moment - Q) / 2.0,
                  abs(chi - chi_moment) / 2.0,
                  abs(m - m_moment))

        theta = (Q, chi, m, qh, ch, mh)
        if qh > QHAT_CAP:
            kind = "runaway" if mse < 1e-6 else "diverged"
            return kind, OrderParameters(*theta), res
        if chi > 1e10 or Q > 1e10 or mse > 1e10 or not math.isfinite(Q):
            return "diverged", OrderParameters(*theta), res
        if res < tol:
            return "converged", OrderParameters(*theta), res
        if it % 100 == 0:
            qh_trend.append(qh)
            mse_trend.append(mse)
        # adaptive damping: halve on residual growth, relax back otherwise
        om = max(om * 0.5, 1e-3) if res > prev_res * 1.2 else min(om * 1.02, damping)
        prev_res = res

    # marginal success runaway: conjugates still climbing, error still
    # shrinking toward zero (e.g. L2 at exactly alpha = 1 grows only
    # polynomially and cannot reach the cap in any fixed iteration budget)
    half = len(qh_trend) // 2
    if (half >= 2 and qh_trend[-1] > 1e4 and mse_trend[-1] < 1e-4
            and all(b > a for a, b in zip(qh_trend[half:], qh_trend[half + 1:]))
            and all(b < a for a, b in zip(mse_trend[half:], mse_trend[half + 1:]))):
        return "runaway", OrderParameters(Q, chi, m, qh, ch, mh), res
    return "maxiter", OrderParameters(Q, chi, m, qh, ch, mh), res


def _closed_form_residual(theta: OrderParameters, params: ModelParams) -> float:
    """Max stationarity violation from the closed-form moment expressions."""
    alpha, rho, norm = params.alpha, params.rho, params.norm
    a1, a2 = _field_scales(theta)
    mse = theta.Q - 2.0 * theta.m + rho
    ex2_1, _, esl_1 = _moments(norm, a1, theta.Qhat)
    ex2_2, ezx_2, esl_2 = _moments(norm, a2, theta.Qhat)
    r = (
        alpha / (2.0 * theta.chi) - theta.Qhat / 2.0,
        -alpha * mse / (2.0 * theta.chi**2) + theta.chihat / 2.0,
        theta.mhat - alpha / theta.chi,
        0.5 * ((1.0 - rho) * ex2_1 + rho * ex2_2 - theta.Q),
        0.5 * (theta.chi - (1.0 - rho) * esl_1 - rho * esl_2),
        theta.m - rho * (theta.mhat / a2) * ezx_2,
    )
    return float(max(abs(v) for v in r))


def solve_saddle(params: ModelParams, init: Optional[OrderParameters] = None,
                 rule: QuadratureRule = DEFAULT_RULE, *,
                 tol: float = 1e-10, max_iter: int = 100_000,
                 damping: float = 0.5) -> SaddleSolution:
    """Extremize the free energy at fixed (alpha, rho, norm).

    Runs damped fixed-point iteration on the six stationarity conditions
    (damping 0.5, halved adaptively whenever the residual grows).  Outcomes:

    * convergence to a finite extremum: returned with is_success decided by
      MSE < 1e-8 and stability from :func:`at_condition`;
    * the conjugates run away (Qhat beyond 1e8) with MSE -> 0: the analytic
      success branch is returned;
    * otherwise the default start is retried from perfect-recovery probe
      states (see _success_probe_init); if those also fail a
      :class:`NonconvergenceError` carrying the last state is raised.  For
      the L0 norm below its threshold this is the expected outcome: the
      failure phase has no extremum with finite order parameters (the
      zero-temperature response diverges over the degenerate solution set).
      Within a few 1e-3 of that threshold the probe's runaway is numerically
      marginal (the error signal saturates the float64 cancellation floor
      before the conjugate cap) and nonconvergence may also be reported.
    """
    if init is not None and (not init.is_finite() or init.chi <= 0.0):
        raise ValueError("init must be finite with chi > 0")
    start = init if init is not None else _default_init(params)
    kind, theta, res = _iterate(params, start, tol, max_iter, damping)
    if kind in ("diverged", "maxiter") and init is None:
        for kappa in (8.0, 2.0):
            kind2, theta2, res2 = _iterate(params, _success_probe_init(params, kappa),
                                           tol, max_iter, damping)
            if kind2 == "runaway":
                kind = kind2
                break
            if kind2 == "converged":
                kind, theta, res = kind2, theta2, res2
                break
    if kind == "runaway":
        return success_solution(params)
    if kind != "converged":
        raise NonconvergenceError(
            f"saddle iteration did not converge at alpha={params.alpha}, "
            f"rho={params.rho}, norm={params.norm} (last residual {res:.3e})",
            theta, res)

    mse = max(theta.Q - 2.0 * theta.m + params.rho, 0.0)
    residual = _closed_form_residual(theta, params)
    fe = free_energy(theta, params, rule)
    solution = SaddleSolution(
        params=params, theta=theta, free_energy=fe, mse=float(mse),
        is_success=bool(mse < MSE_SUCCESS), at_stable=True, at_value=0.0,
        residual=residual)
    at_value = at_condition(solution, rule)
    return replace(solution, at_value=float(at_value),
                   at_stable=bool(at_value <= 1.0 + AT_MARGIN))


# --------------------------
# AT (replica symmetry breaking) stability
# --------------------------

def at_condition(solution: SaddleSolution, rule: QuadratureRule = DEFAULT_RULE) -> float:
    """Left-hand side of the local stability criterion

        (alpha / chi^2) [ (1 - rho) E_z (dx*/dh)^2 at h = sqrt(chihat) z
                          + rho      E_z (dx*/dh)^2 at h = sqrt(chihat+mhat^2) z ]

    Values above 1 mean the replica-symmetric extremum is locally unstable.
    On the success branch the diverging conjugates are handled analytically
    (chi * Qhat -> alpha keeps the ratio finite for L1/L2).  For the L0 norm
    the minimizer is discontinuous at its threshold, the squared slope picks
    up a squared delta, and the criterion diverges: +inf is returned.
    """
    params = solution.params
    theta = solution.theta
    if not theta.is_finite():
        return _success_at_value(params)
    if params.norm is Norm.L0:
        return math.inf
    alpha, rho, norm = params.alpha, params.rho, params.norm
    a1, a2 = _field_scales(theta)

    def slope_sq(a: float) -> float:
        if a <= 0.0:
            return float(x_star_slope_value(0.0, theta.Qhat, norm) ** 2)
        return expect_dz(lambda z: x_star_slope_value(a * z, theta.Qhat, norm) ** 2,
                         rule, breaks=_phi_breaks(norm, a, theta.Qhat))

    value = (alpha / theta.chi**2) * ((1.0 - rho) * slope_sq(a1) + rho * slope_sq(a2))
    return float(value)


# --------------------------
# Analytic threshold branches
# --------------------------

def l1_alpha_c(rho: float, tol: float = 1e-6,
               bracket: Optional[tuple[float, float]] = None) -> float:
    """Critical compression rate for L1 reconstruction at density rho.

    Bisects on alpha for the edge at which the success solution exists and
    satisfies the stability condition alpha > 2 (1 - rho) H(chihat^{-1/2})
    + rho.  The stability margin of the physical solution vanishes exactly
    where the solution ceases to exist (the two branches of the
    self-consistency condition merge), so the returned alpha_c carries
    equality in the stability condition.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if rho == 1.0:
        return 1.0

    def stable_success(alpha: float) -> bool:
        try:
            chihat = l1_success_chihat(ModelParams(alpha, rho, Norm.L1))
        except ValueError:
            return False
        return alpha - rho - 2.0 * (1.0 - rho) * gauss_tail(chihat**-0.5) >= 0.0

    lo, hi = rho, 1.0
    if bracket is not None:
        b_lo = max(lo, bracket[0])
        b_hi = min(hi, bracket[1])
        if b_lo < b_hi and not stable_success(b_lo) and stable_success(b_hi):
            lo, hi = b_lo, b_hi
    if not stable_success(hi):
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stable_success(mid):
            hi = mid
        else:
            lo = mid
    # the stable end of the bracket, so the success solution exists at the
    # returned alpha (the existence edge unfolds as a square root, making
    # the midpoint unusable for constructing the solution)
    return hi


def alpha_c(rho: float, norm: Norm, tol: float = 1e-6) -> tuple[float, bool]:
    """(alpha_c, at_valid) for the typical-case boundary of a norm.

    L0 attains the counting bound alpha_c = rho but its success solution is
    always AT-unstable (at_valid False); L1 uses the self-consistent
    threshold; L2 cannot exploit sparsity and needs alpha = 1.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if norm is Norm.L0:
        return rho, False
    if norm is Norm.L2:
        return 1.0, True
    return l1_alpha_c(rho, tol), True


# --------------------------
# Worst-case (sufficient-condition) curve for L1
# --------------------------

_C4 = 2.0 ** 0.25 - 1.0


def _worst_case_margin(alpha: float, rho: float) -> float:
    """Scaled exponent whose negativity (with the side condition below)
    guarantees recovery of every rho-sparse vector, in the large-size limit
    with S = rho N and P = alpha N."""
    return (2.0 * rho * math.log(1.0 / (2.0 * rho)) + 2.0 * rho
            - 0.5 * alpha * (_C4 - math.sqrt(2.0 * rho / alpha)) ** 2)


def worst_case_alpha(rho: float, tol: float = 1e-6) -> Optional[float]:
    """Smallest alpha in (0, 1] satisfying the worst-case sufficient
    condition, or None when no alpha <= 1 does.

    Two inequalities must hold: the side condition 2^{1/4} - 1 >
    sqrt(2 rho / alpha) (equivalently alpha > 2 rho / (2^{1/4} - 1)^2, which
    alone rules out rho >~ 0.0358/2) and the negativity of the exponent
    margin.  The margin is strictly decreasing in alpha on the feasible
    side, so bisection applies.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    lo = 2.0 * rho / (_C4 * _C4)  # side condition boundary
    if lo >= 1.0:
        return None
    if _worst_case_margin(1.0, rho) >= 0.0:
        return None
    hi = 1.0
    # margin at the side-condition edge is 2 rho ln(1/(2 rho)) + 2 rho > 0
    # for rho < 1/2; guard anyway so the bracket is always valid
    if _worst_case_margin(lo, rho) < 0.0:  # pragma: no cover
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _worst_case_margin(mid, rho) < 0.0:
            hi = mid
        else:
            lo = mid
    return hi


# --------------------------
# Boundary tracing
# --------------------------

def trace_boundary(norm: Norm, method: str, rho_grid: Sequence[float],
                   tol: float = 1e-6) -> PhaseBoundary:
    """Sample alpha_c over a strictly increasing rho grid.

    method "typical_rs" applies :func:`alpha_c` pointwise (L1 bisections are
    seeded from the previous point); "worst_case" applies
    :func:`worst_case_alpha` (L1 only) and records nan where no point
    exists.
    """
    rhos = [float(r) for r in rho_grid]
    if any(b <= a for a, b in zip(rhos, rhos[1:])):
        raise ValueError("rho_grid must be strictly increasing")
    if any(not 0.0 < r <= 1.0 for r in rhos):
        raise ValueError("rho_grid values must lie in (0, 1]")
    if method not in ("typical_rs", "worst_case"):
        raise ValueError(f"unknown method {method!r}")
    if method == "worst_case" and norm is not Norm.L1:
        raise ValueError("the worst-case curve is defined for the L1 norm only")

    points: list[tuple[float, float]] = []
    valid: list[bool] = []
    prev: Optional[float] = None
    for rho in rhos:
        try:
            if method == "worst_case":
                a = worst_case_alpha(rho, tol)
                points.append((rho, float("nan") if a is None else a))
                valid.append(a is not None)
                continue
            if norm is Norm.L1:
                bracket = None if prev is None else (prev - 0.05, prev + 0.05)
                a = l1_alpha_c(rho, tol, bracket=bracket)
                av = True
                prev = a
            else:
                a, av = alpha_c(rho, norm, tol)
            points.append((rho, a))
            valid.append(av)
        except Exception as exc:
            raise RuntimeError(f"boundary tracing failed at rho={rho}: {exc}") from exc
    return PhaseBoundary(norm=norm, method=method,
                         points=tuple(points), at_valid=tuple(valid))
