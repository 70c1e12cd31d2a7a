"""Monte Carlo estimation of the L1 reconstruction threshold.

Protocol, per trial at size N and density rho: draw a signal x0 with
exactly round(rho N) nonzero unit Gaussian entries, then lower the number
of measurements P one-by-one from P = N, solving basis pursuit at each P,
until the reconstruction first fails the test ||xhat - x0||_1 > tol
(tol = 1e-4 by default); record P_c = P + 1.  Averaging P_c / N over many
trials gives a finite-size critical rate alpha_c(rho, N), and a quadratic
fit in 1/N extrapolates it to N -> infinity for comparison against the
replica prediction.

Two measurement ensembles are supported: i.i.d. Gaussian entries of
variance 1/N, and the rotationally invariant family F = U S O' with Haar
orthogonal U, O and a prescribed singular spectrum.  Their basis-pursuit
behavior should coincide (the null space of F is a uniformly random
subspace either way as long as the spectrum stays clear of zero), which the
test suite checks empirically.

Trials are seeded through a splittable SeedSequence keyed by
(root, n_index, trial_index), so per-trial streams are independent,
reproducible bit-for-bit, and identical no matter how many workers run
them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .linprog import EqualityConstrainedL1Problem, solve_basis_pursuit

__all__ = [
    "EnsembleKind",
    "ProblemInstance",
    "TrialOutcome",
    "TrialSeed",
    "CriticalEstimate",
    "TrialAbortedError",
    "sample_signal",
    "sample_matrix",
    "make_instance",
    "run_trial",
    "estimate_alpha_c",
    "fit_inverse_quadratic",
]

WORKERS_ENV = "CSPHASE_WORKERS"


@dataclass(frozen=True)
class EnsembleKind:
    """Measurement ensemble: "gaussian_iid" or "rotationally_invariant".

    The rotationally invariant case needs a spectrum spec: "unit" (all
    singular values 1), ("uniform", lo, hi) with lo > 0, or an explicit
    sequence of positive eigenvalues of F'F (length = number of rows drawn).
    The spectrum support must stay away from zero so the rows of a sample
    are linearly independent.
    """

    tag: str
    spectrum: object = None

    def __post_init__(self):
        if self.tag not in ("gaussian_iid", "rotationally_invariant"):
            raise ValueError(f"unknown ensemble tag {self.tag!r}")
        if self.tag == "rotationally_invariant":
            spec = self.spectrum
            if spec is None:
                raise ValueError("rotationally_invariant requires a spectrum spec")
            if isinstance(spec, str):
                if spec != "unit":
                    raise ValueError(f"unknown named spectrum {spec!r}")
            elif isinstance(spec, tuple) and len(spec) == 3 and spec[0] == "uniform":
                lo, hi = float(spec[1]), float(spec[2])
                if not 0.0 < lo <= hi:
                    raise ValueError("uniform spectrum needs 0 < lo <= hi")
            else:
                vals = np.asarray(spec, dtype=float)
                if vals.ndim != 1 or vals.size == 0 or vals.min() <= 0.0:
                    raise ValueError("explicit spectrum must be positive eigenvalues")
                object.__setattr__(self, "spectrum", tuple(float(v) for v in vals))

    @classmethod
    def from_string(cls, s: str) -> "EnsembleKind":
        """Parse "gaussian", "rotinv:unit" or "rotinv:uniform:LO:HI"."""
        parts = s.strip().lower().split(":")
        if parts[0] in ("gaussian", "gaussian_iid"):
            return cls("gaussian_iid")
        if parts[0] in ("rotinv", "rotationally_invariant"):
            if len(parts) == 2 and parts[1] == "unit":
                return cls("rotationally_invariant", "unit")
            if len(parts) == 4 and parts[1] == "uniform":
                return cls("rotationally_invariant",
                           ("uniform", float(parts[2]), float(parts[3])))
        raise ValueError(f"cannot parse ensemble {s!r}")

    def label(self) -> str:
        if self.tag == "gaussian_iid":
            return "gaussian"
        if self.spectrum == "unit":
            return "rotinv:unit"
        if isinstance(self.spectrum, tuple) and self.spectrum and self.spectrum[0] == "uniform":
            return f"rotinv:uniform:{self.spectrum[1]}:{self.spectrum[2]}"
        return "rotinv:explicit"


@dataclass(frozen=True)
class TrialSeed:
    """Reproducible address of one trial's random stream."""

    root: int
    n_index: int = 0
    trial_index: int = 0

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.root,
                                   spawn_key=(self.n_index, self.trial_index)))

    def __str__(self) -> str:
        return f"{self.root}:{self.n_index}:{self.trial_index}"


@dataclass(frozen=True)
class ProblemInstance:
    """One realization (F, x0, y = F x0) with its provenance."""

    matrix: np.ndarray
    signal: np.ndarray
    measurement: np.ndarray
    support_size: int
    seed: TrialSeed


@dataclass(frozen=True)
class TrialOutcome:
    """Critical constraint count P_c from one decrement run."""

    N: int
    rho: float
    p_critical: int
    solves: int
    seed: TrialSeed

    def __post_init__(self):
        if not self.rho * self.N <= self.p_critical <= self.N + 1:
            raise ValueError(
                f"p_critical={self.p_critical} outside [rho N, N + 1] for N={self.N}")


@dataclass(frozen=True)
class CriticalEstimate:
    """Per-size statistics of P_c/N plus the 1/N -> 0 extrapolation."""

    rho: float
    per_n: tuple  # of (N, alpha_hat, stderr, trials), sorted by N
    extrapolated_alpha_c: float
    fit_coeffs: tuple  # (a, b, c) in alpha(N) = a + b/N + c/N^2
    fit_residual: float
    failures: tuple = ()
    outcomes: tuple = ()  # TrialOutcome records in (n_index, trial_index) order


class TrialAbortedError(RuntimeError):
    """A trial hit an LP failure; carries enough context to reproduce it."""

    def __init__(self, seed: TrialSeed, n: int, p: int, status: str):
        super().__init__(f"trial {seed} aborted at N={n}, P={p}: solver status {status}")
        self.seed = seed
        self.n = n
        self.p = p
        self.status = status


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, TrialSeed):
        return seed.rng()
    return np.random.default_rng(seed)


def _support_size(n: int, rho: float) -> int:
    return int(math.floor(rho * n + 0.5))  # round half up, not banker's


# --------------------------
# Instance generation
# --------------------------

def sample_signal(n: int, rho: float, seed, values: str = "gauss") -> np.ndarray:
    """Length-n vector with exactly round(rho n) nonzeros on a uniform support.

    Nonzero values are i.i.d. standard normal by default; values="uniform"
    draws them from U[-sqrt(3), sqrt(3)] (same variance), used to check that
    the threshold does not care about the nonzero distribution.
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    s = _support_size(n, rho)
    if s < 1:
        raise ValueError(f"round(rho n) = {s}; need at least one nonzero entry")
    rng = _as_rng(seed)
    support = rng.choice(n, size=s, replace=False)
    x = np.zeros(n)
    if values == "gauss":
        x[support] = rng.standard_normal(s)
    elif values == "uniform":
        x[support] = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=s)
    else:
        raise ValueError(f"unknown values kind {values!r}")
    return x


def _haar_orthogonal(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via QR with sign-fixed diagonal."""
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    d = np.sign(np.diag(r))
    d[d == 0.0] = 1.0
    return q * d


def _spectrum_values(kind: EnsembleKind, p: int, rng: np.random.Generator) -> np.ndarray:
    spec = kind.spectrum
    if spec == "unit":
        return np.ones(p)
    if isinstance(spec, tuple) and spec and spec[0] == "uniform":
        return rng.uniform(spec[1], spec[2], size=p)
    vals = np.asarray(spec, dtype=float)
    if vals.size != p:
        raise ValueError(f"explicit spectrum has {vals.size} values, need {p}")
    return vals


def sample_matrix(p: int, n: int, kind: EnsembleKind, seed) -> np.ndarray:
    """P x N measurement matrix from the requested ensemble.

    gaussian_iid: entries N(0, 1/n).  rotationally_invariant: F = U S O'
    with U, O Haar orthogonal and S carrying sqrt of the prescribed
    eigenvalues on its diagonal, so F'F = O diag(spectrum, 0...) O'.
    """
    if p > n:
        raise ValueError(f"need p <= n, got {p} > {n}")
    rng = _as_rng(seed)
    if kind.tag == "gaussian_iid":
        return rng.standard_normal((p, n)) / math.sqrt(n)
    lam = _spectrum_values(kind, p, rng)
    u = _haar_orthogonal(p, rng)
    o = _haar_orthogonal(n, rng)
    return (u * np.sqrt(lam)) @ o[:, :p].T


def make_instance(p: int, n: int, rho: float, kind: EnsembleKind,
                  seed, values: str = "gauss") -> ProblemInstance:
    """Draw one (F, x0, y) realization from a single seeded stream."""
    tseed = seed if isinstance(seed, TrialSeed) else TrialSeed(int(seed))
    rng = tseed.rng()
    x0 = sample_signal(n, rho, rng, values=values)
    F = sample_matrix(p, n, kind, rng)
    return ProblemInstance(matrix=F, signal=x0, measurement=F @ x0,
                           support_size=int(np.count_nonzero(x0)), seed=tseed)


# --------------------------
# Decrement protocol
# --------------------------

def run_trial(n: int, rho: float, kind: EnsembleKind,
              recovery_tol: float = 1e-4, seed=0, *,
              redraw: bool = False, values: str = "gauss") -> TrialOutcome:
    """One decrement run: P = n, n-1, ... until recovery first fails.

    The signal is fixed once per trial.  By default a single n x n matrix is
    drawn and lowering P removes its last row (nested design); redraw=True
    draws a fresh P x n matrix at every P instead.  Decrementing stops at
    P = max(1, ceil(rho n) - 1): below round(rho n) rows recovery is
    impossible, so probing further only burns solver time.  If the failure
    test never fires (e.g. recovery_tol = inf), P_c is the smallest probed
    P plus one.
    """
    tseed = seed if isinstance(seed, TrialSeed) else TrialSeed(int(seed))
    rng = tseed.rng()
    x0 = sample_signal(n, rho, rng, values=values)
    full = None if redraw else sample_matrix(n, n, kind, rng)
    floor_p = max(1, math.ceil(rho * n) - 1)
    solves = 0
    for p in range(n, floor_p - 1, -1):
        F = sample_matrix(p, n, kind, rng) if redraw else full[:p]
        sol = solve_basis_pursuit(EqualityConstrainedL1Problem(F, F @ x0))
        solves += 1
        if sol.status != "optimal":
            raise TrialAbortedError(tseed, n, p, sol.status)
        if np.abs(sol.x - x0).sum() > recovery_tol:
            return TrialOutcome(N=n, rho=rho, p_critical=p + 1,
                                solves=solves, seed=tseed)
    return TrialOutcome(N=n, rho=rho, p_critical=floor_p + 1,
                        solves=solves, seed=tseed)


def _trial_job(args) -> tuple:
    """Worker-side wrapper; returns ("ok", outcome) or ("fail", record)."""
    n, rho, kind, recovery_tol, tseed, redraw, values = args
    try:
        out = run_trial(n, rho, kind, recovery_tol, tseed,
                        redraw=redraw, values=values)
        return "ok", out
    except TrialAbortedError as exc:
        return "fail", {"seed": str(exc.seed), "N": exc.n, "P": exc.p,
                        "status": exc.status}


def fit_inverse_quadratic(n_values: Sequence[float],
                          alpha_values: Sequence[float]) -> tuple[tuple[float, float, float], float]:
    """Least-squares fit alpha(N) = a + b/N + c/N^2.

    Returns ((a, b, c), rms_residual); a is the N -> infinity extrapolation.
    """
    n_arr = np.asarray(n_values, dtype=float)
    a_arr = np.asarray(alpha_values, dtype=float)
    if len(set(n_arr.tolist())) < 3:
        raise ValueError("quadratic fit needs at least 3 distinct sizes")
    coeffs = np.polynomial.polynomial.polyfit(1.0 / n_arr, a_arr, deg=2)
    fitted = np.polynomial.polynomial.polyval(1.0 / n_arr, coeffs)
    rms = float(np.sqrt(np.mean((fitted - a_arr) ** 2)))
    return (float(coeffs[0]), float(coeffs[1]), float(coeffs[2])), rms


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def estimate_alpha_c(rho: float, n_list: Sequence[int], trials_per_n: int,
                     kind: EnsembleKind, seed: int, *,
                     recovery_tol: float = 1e-4, workers: Optional[int] = None,
                     redraw: bool = False, values: str = "gauss") -> CriticalEstimate:
    """Mean P_c/N at each size plus the quadratic 1/N extrapolation.

    Trials run independently (optionally across processes); outcomes are
    keyed by (n_index, trial_index) so the estimate does not depend on the
    worker count.  Aborted trials are reported in ``failures`` and excluded
    from the statistics rather than silently dropped.
    """
    ns = sorted(set(int(n) for n in n_list))
    if len(ns) < 3:
        raise ValueError("need at least 3 distinct sizes for the quadratic fit")
    if trials_per_n < 1:
        raise ValueError("trials_per_n must be >= 1")
    jobs = [(n, rho, kind, recovery_tol, TrialSeed(seed, ni, ti), redraw, values)
            for ni, n in enumerate(ns) for ti in range(trials_per_n)]
    nworkers = workers if workers is not None else default_workers()
    if nworkers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=nworkers) as pool:
            results = list(pool.map(_trial_job, jobs, chunksize=32))
    else:
        results = [_trial_job(j) for j in jobs]

    by_n: dict[int, list[int]] = {n: [] for n in ns}
    outcomes = []
    failures = []
    for tag, payload in results:
        if tag == "ok":
            by_n[payload.N].append(payload.p_critical)
            outcomes.append(payload)
        else:
            failures.append(payload)

    per_n = []
    for n in ns:
        pcs = np.asarray(by_n[n], dtype=float)
        if pcs.size == 0:
            raise RuntimeError(f"all trials aborted at N={n}")
        rates = pcs / n
        stderr = float(rates.std(ddof=1) / math.sqrt(rates.size)) if rates.size > 1 else 0.0
        per_n.append((n, float(rates.mean()), stderr, int(rates.size)))

    coeffs, rms = fit_inverse_quadratic([q[0] for q in per_n], [q[1] for q in per_n])
    return CriticalEstimate(rho=rho, per_n=tuple(per_n),
                            extrapolated_alpha_c=coeffs[0], fit_coeffs=coeffs,
                            fit_residual=rms, failures=tuple(failures),
                            outcomes=tuple(outcomes))
