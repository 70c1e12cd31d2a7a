"""Basis pursuit: exact L1 minimization under linear equality constraints.

Solves min ||x||_1 subject to F x = y through the standard split
x = u - v with u, v >= 0, which is the linear program

    min 1'(u, v)   s.t.  [F, -F] (u; v) = y,  (u, v) >= 0,

using a dense Mehrotra predictor-corrector primal-dual interior-point
method.  The normal-equations matrix specializes to F diag(d_u + d_v) F',
so each iteration costs O(P^2 N + P^3): cubic in the problem size, which is
all these dense Gaussian instances need.

The dual vector nu of the equality constraints certifies optimality:
feasibility of the dual requires |F' nu|_inf <= 1 and strong duality gives
y' nu = ||x||_1 at the optimum.  Both are exposed on the returned solution.

A brute-force sparsest-solution search over supports (for tiny sizes) is
included as the L0 reference that the polynomial-time L1 route is measured
against.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

__all__ = [
    "EqualityConstrainedL1Problem",
    "LpSolution",
    "InfeasibleProblemError",
    "solve_basis_pursuit",
    "l0_oracle",
]


@dataclass(frozen=True)
class EqualityConstrainedL1Problem:
    """Dense equality-constrained L1 problem: minimize ||x||_1 s.t. matrix @ x = rhs."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        F = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        y = np.atleast_1d(np.asarray(self.rhs, dtype=float))
        object.__setattr__(self, "matrix", F)
        object.__setattr__(self, "rhs", y)
        p, n = F.shape
        if p > n:
            raise ValueError(f"matrix must have P <= N rows, got {p}x{n}")
        if y.shape != (p,):
            raise ValueError(f"rhs length {y.shape} does not match {p} rows")
        if not np.all(np.isfinite(F)) or not np.all(np.isfinite(y)):
            raise ValueError("matrix and rhs must be finite")
        if np.any(np.abs(F).max(axis=1) == 0.0):
            raise ValueError("matrix must not contain all-zero rows")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


@dataclass(frozen=True)
class LpSolution:
    """Result of a basis-pursuit solve.

    ``dual`` is the equality multiplier nu backing the optimality
    certificate |F' nu|_inf <= 1, y' nu = objective.
    """

    x: np.ndarray
    objective: float
    status: str  # "optimal" | "infeasible" | "numerical_failure"
    iterations: int
    max_eq_violation: float
    dual: np.ndarray


class InfeasibleProblemError(ValueError):
    """Raised by the support-search oracle when no support fits the rhs."""


def _starting_point(F: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Least-squares starting point shifted into the positive orthant.

    For the split problem A = [F, -F] has A A' = 2 F F' and A c = 0, so the
    usual heuristic reduces to x = A'(A A')^{-1} y, nu = 0, s = 1.
    """
    n = F.shape[1]
    M = 2.0 * (F @ F.T)
    try:
        w = cho_solve(cho_factor(M), y)
    except LinAlgError:
        w = np.linalg.lstsq(M, y, rcond=None)[0]
    xt = F.T @ w
    x = np.concatenate([xt, -xt])
    s = np.ones(2 * n)
    x += max(-1.5 * x.min(), 0.0)
    shift = 0.5 * (x @ s)
    x += shift / s.sum()
    s += shift / x.sum()
    return x, np.zeros(F.shape[0]), s


def solve_basis_pursuit(problem: EqualityConstrainedL1Problem, *,
                        gap_tol: float = 1e-10, feas_tol: float = 1e-9,
                        max_iter: int = 500) -> LpSolution:
    """Globally minimize ||x||_1 subject to F x = y.

    Terminates when the scaled primal infeasibility is below
    feas_tol * (1 + |y|_inf), the dual infeasibility is below feas_tol and
    the duality gap is below gap_tol * (1 + objective).  Inconsistent
    rank-deficient constraints yield status "infeasible"; running out of
    iterations yields "numerical_failure".
    """
    F, y = problem.matrix, problem.rhs
    p, n = F.shape
    n2 = 2 * n
    yscale = 1.0 + float(np.abs(y).max(initial=0.0))

    # rank-deficient constraints: detect an inconsistent rhs up front
    x_ls = np.linalg.lstsq(F, y, rcond=None)[0]
    if np.abs(F @ x_ls - y).max(initial=0.0) > feas_tol * yscale:
        return LpSolution(x=x_ls, objective=float(np.abs(x_ls).sum()),
                          status="infeasible", iterations=0,
                          max_eq_violation=float(np.abs(F @ x_ls - y).max()),
                          dual=np.zeros(p))
    if np.abs(y).max(initial=0.0) == 0.0:  # unique minimizer x = 0
        return LpSolution(x=np.zeros(n), objective=0.0, status="optimal",
                          iterations=0, max_eq_violation=0.0, dual=np.zeros(p))

    x, nu, s = _starting_point(F, y)

    def Adot(z: np.ndarray) -> np.ndarray:
        return F @ (z[:n] - z[n:])

    def ATdot(v: np.ndarray) -> np.ndarray:
        Ft = F.T @ v
        return np.concatenate([Ft, -Ft])

    def finish(xr: np.ndarray, it: int) -> LpSolution:
        # project onto the constraints: late iterates carry a primal
        # residual at the noise floor of the ill-conditioned Newton systems
        # (the complementarity gap collapses well below it), and the exact
        # correction is tiny compared to the solution scale
        r = y - F @ xr
        try:
            xr = xr + F.T @ cho_solve(cho_factor(F @ F.T), r)
        except (LinAlgError, ValueError):
            xr = xr + np.linalg.lstsq(F, r, rcond=None)[0]
        return LpSolution(
            x=xr, objective=float(np.abs(xr).sum()), status="optimal",
            iterations=it,
            max_eq_violation=float(np.abs(F @ xr - y).max(initial=0.0)),
            dual=nu.copy())

    for it in range(max_iter):
        r_p = Adot(x) - y
        r_d = ATdot(nu) + s - 1.0
        obj = float(x.sum())
        comp = float(x @ s)  # complementarity gap; equals the duality gap
        # up to the (machine-level) feasibility residuals
        if (np.abs(r_p).max(initial=0.0) <= max(feas_tol, 1e-6) * yscale
                and np.abs(r_d).max() <= feas_tol
                and comp <= gap_tol * (1.0 + abs(obj))):
            sol = finish(x[:n] - x[n:], it)
            if sol.max_eq_violation <= feas_tol * yscale:
                return sol
        d = x / s
        if not np.all(np.isfinite(d)):
            break
        M = (F * (d[:n] + d[n:])) @ F.T
        try:
            L = cho_factor(M)
            solve = lambda r: cho_solve(L, r)
        except (LinAlgError, ValueError):
            try:
                solve = lambda r: np.linalg.lstsq(M, r, rcond=None)[0]
                solve(np.zeros(p))
            except (LinAlgError, ValueError):
                break

        def newton_step(r_xs: np.ndarray):
            rhs = -r_p + Adot(r_xs / s) - Adot(d * r_d)
            dnu = solve(rhs)
            ds = -r_d - ATdot(dnu)
            dx = -r_xs / s - d * ds
            return dx, dnu, ds

        def max_step(v: np.ndarray, dv: np.ndarray) -> float:
            neg = dv < 0.0
            if not neg.any():
                return np.inf
            return float((-v[neg] / dv[neg]).min())

        mu = comp / n2
        # predictor (affine scaling) step sets the centering weight
        dx_a, _, ds_a = newton_step(x * s)
        ap = min(1.0, max_step(x, dx_a))
        ad = min(1.0, max_step(s, ds_a))
        mu_aff = float((x + ap * dx_a) @ (s + ad * ds_a)) / n2
        sigma = min((mu_aff / mu) ** 3, 1.0)
        # corrector re-solves with the same factorization
        dx, dnu, ds = newton_step(x * s + dx_a * ds_a - sigma * mu)
        if not (np.all(np.isfinite(dx)) and np.all(np.isfinite(ds))
                and np.all(np.isfinite(dnu))):
            break
        eta = 0.9995
        ap = min(1.0, eta * max_step(x, dx))
        ad = min(1.0, eta * max_step(s, ds))
        x = x + ap * dx
        nu = nu + ad * dnu
        s = s + ad * ds
    else:
        it = max_iter

    xr = x[:n] - x[n:]
    return LpSolution(x=xr, objective=float(np.abs(xr).sum()),
                      status="numerical_failure", iterations=it,
                      max_eq_violation=float(np.abs(F @ xr - y).max(initial=0.0)),
                      dual=nu.copy())


def l0_oracle(problem: EqualityConstrainedL1Problem, max_n: int = 20) -> np.ndarray:
    """Sparsest solution of F x = y by exhaustive support search (tiny N only).

    Supports are scanned in order of increasing size, lexicographically
    within each size, accepting the first support whose least-squares fit
    meets the constraints to 1e-9; ties at the minimal size therefore
    resolve to the lexicographically smallest support.  Finding this is
    NP-hard in general, hence the hard cap on N.
    """
    F, y = problem.matrix, problem.rhs
    p, n = F.shape
    if not n <= max_n <= 20:
        raise ValueError(f"support search requires N <= max_n <= 20, got N={n}, max_n={max_n}")
    if np.abs(y).max(initial=0.0) < 1e-9:
        return np.zeros(n)
    for k in range(1, min(n, p) + 1):
        for support in combinations(range(n), k):
            cols = F[:, support]
            z = np.linalg.lstsq(cols, y, rcond=None)[0]
            if np.abs(cols @ z - y).max() < 1e-9:
                x = np.zeros(n)
                x[list(support)] = z
                return x
    raise InfeasibleProblemError("no support of size <= min(N, P) satisfies the constraints")
