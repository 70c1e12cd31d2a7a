"""Closed-form single-site quantities for L_p-regularized scalar minimization.

The building block of every replica-symmetric computation in this package is
the scalar problem

    phi_p(h; Qhat) = min_x { (Qhat/2) x^2 - h x + cost_p(x) }

where cost_p(x) = |x|^p for p = 1, 2 and the counting cost 1{x != 0} for
p = 0 (the limit p -> 0+ of |x|^p).  All three cases have closed-form minima
and minimizers:

    p = 0:  dead zone |h| <= sqrt(2 Qhat), then x* = h/Qhat (hard threshold)
    p = 1:  dead zone |h| <= 1, then x* = (h - sign h)/Qhat (soft threshold)
    p = 2:  x* = h/(Qhat + 2) (linear shrinkage)

This module provides phi_p, its minimizer x_p*, the piecewise slope
d x_p*/dh, the Gaussian tail function H(x) = int_x^inf Dz, and quadrature
for averages over the unit Gaussian measure Dz = dz exp(-z^2/2)/sqrt(2 pi).

Everything here is a pure function of its arguments: no caches, no state,
safe to call concurrently.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

__all__ = [
    "Norm",
    "CavityField",
    "QuadratureRule",
    "phi",
    "phi_value",
    "x_star",
    "x_star_value",
    "x_star_slope",
    "x_star_slope_value",
    "x_star_threshold",
    "gauss_tail",
    "gauss_pdf",
    "gauss_dz_rule",
    "expect_dz",
]

SQRT_2PI = np.sqrt(2.0 * np.pi)

# |z| beyond which the Gaussian weight is < 1e-44; tails past this point are
# dropped by the panel integrator.
_Z_MAX = 14.0


class Norm(enum.Enum):
    """Which L_p cost the reconstruction minimizes (p = 0, 1 or 2)."""

    L0 = 0
    L1 = 1
    L2 = 2

    @classmethod
    def from_string(cls, s: str) -> "Norm":
        try:
            return {"l0": cls.L0, "l1": cls.L1, "l2": cls.L2}[s.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown norm {s!r}; expected l0, l1 or l2") from None

    def __str__(self) -> str:
        return f"l{self.value}"


@dataclass(frozen=True)
class CavityField:
    """Effective local field h and curvature Qhat seen by a single site."""

    h: float
    qhat: float

    def __post_init__(self):
        if not self.qhat > 0.0:
            raise ValueError(f"qhat must be positive, got {self.qhat}")


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights for averages over Dz = dz exp(-z^2/2)/sqrt(2 pi).

    Weights are normalized (sum to 1) and nodes are symmetric about 0, so a
    rule integrates polynomials up to degree 2*order - 1 exactly.
    """

    nodes: np.ndarray
    weights: np.ndarray
    order: int

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.order <= 0:
            raise ValueError("order must be a positive integer")
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 (normalized Gaussian measure)")
        if np.abs(nodes + nodes[::-1]).max() > 1e-10 * max(1.0, np.abs(nodes).max()):
            raise ValueError("nodes must be symmetric about 0")


def gauss_dz_rule(order: int = 201) -> QuadratureRule:
    """Gauss-Hermite rule rescaled to the unit Gaussian measure Dz.

    hermgauss integrates int e^{-t^2} f(t) dt, so z = sqrt(2) t and the
    weights pick up 1/sqrt(pi).  An odd order puts a node at z = 0.
    """
    t, w = np.polynomial.hermite.hermgauss(order)
    return QuadratureRule(nodes=np.sqrt(2.0) * t, weights=w / np.sqrt(np.pi), order=order)


# --------------------------
# Gaussian tail / density
# --------------------------

def gauss_tail(x):
    """H(x) = int_x^inf Dz = erfc(x/sqrt(2))/2; strictly decreasing in x."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / np.sqrt(2.0)) if np.ndim(x) else float(
        0.5 * erfc(x / np.sqrt(2.0))
    )


def gauss_pdf(x):
    """Standard normal density exp(-x^2/2)/sqrt(2 pi)."""
    x = np.asarray(x, dtype=float) if np.ndim(x) else x
    return np.exp(-0.5 * np.square(x)) / SQRT_2PI if np.ndim(x) else float(
        np.exp(-0.5 * x * x) / SQRT_2PI
    )


# --------------------------
# Single-site minimization
# --------------------------

def x_star_threshold(qhat: float, norm: Norm) -> float:
    """Field magnitude below which the minimizer is pinned at 0 (0 for L2)."""
    if norm is Norm.L0:
        return float(np.sqrt(2.0 * qhat))
    if norm is Norm.L1:
        return 1.0
    return 0.0


def phi_value(h, qhat: float, norm: Norm):
    """phi_p(h; Qhat); broadcasts over h.  Continuous in h for all norms."""
    if not qhat > 0.0:
        raise ValueError(f"qhat must be positive, got {qhat}")
    h = np.asarray(h, dtype=float)
    if norm is Norm.L2:
        out = -np.square(h) / (2.0 * (qhat + 2.0))
    elif norm is Norm.L1:
        excess = np.maximum(np.abs(h) - 1.0, 0.0)
        out = -np.square(excess) / (2.0 * qhat)
    else:  # L0: cost 1 for any nonzero minimizer, so compare against 0
        nonzero = 1.0 - np.square(h) / (2.0 * qhat)
        out = np.where(np.abs(h) > np.sqrt(2.0 * qhat), nonzero, 0.0)
    return out if out.ndim else float(out)


def x_star_value(h, qhat: float, norm: Norm):
    """Minimizer x_p*(h; Qhat); odd in h; broadcasts over h."""
    if not qhat > 0.0:
        raise ValueError(f"qhat must be positive, got {qhat}")
    h = np.asarray(h, dtype=float)
    if norm is Norm.L2:
        out = h / (qhat + 2.0)
    elif norm is Norm.L1:
        out = np.sign(h) * np.maximum(np.abs(h) - 1.0, 0.0) / qhat
    else:
        out = np.where(np.abs(h) > np.sqrt(2.0 * qhat), h / qhat, 0.0)
    return out if out.ndim else float(out)


def x_star_slope_value(h, qhat: float, norm: Norm):
    """Piecewise d x_p*/dh.

    At a threshold point the interior-side value (0 for L0/L1) is returned;
    threshold points carry zero weight under the Gaussian averages that
    consume this slope.  The L0 minimizer also jumps at its threshold; that
    delta contribution is handled by the caller (it makes the replica
    stability integral diverge), not here.
    """
    if not qhat > 0.0:
        raise ValueError(f"qhat must be positive, got {qhat}")
    h = np.asarray(h, dtype=float)
    if norm is Norm.L2:
        out = np.full_like(h, 1.0 / (qhat + 2.0))
    else:
        thr = x_star_threshold(qhat, norm)
        out = np.where(np.abs(h) > thr, 1.0 / qhat, 0.0)
    return out if out.ndim else float(out)


def phi(field: CavityField, norm: Norm) -> float:
    """phi_p at a typed cavity field."""
    return phi_value(field.h, field.qhat, norm)


def x_star(field: CavityField, norm: Norm) -> float:
    """x_p* at a typed cavity field."""
    return x_star_value(field.h, field.qhat, norm)


def x_star_slope(field: CavityField, norm: Norm) -> float:
    """Piecewise d x_p*/dh at a typed cavity field."""
    return x_star_slope_value(field.h, field.qhat, norm)


# --------------------------
# Gaussian averages
# --------------------------

# Gauss-Legendre panels reused by the kink-splitting integrator.
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_nodes(deg: int) -> tuple[np.ndarray, np.ndarray]:
    if deg not in _GL_CACHE:
        _GL_CACHE[deg] = np.polynomial.legendre.leggauss(deg)
    return _GL_CACHE[deg]


def _split_panels(breaks, deg: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights (Gaussian weight included) on [-Z_MAX, Z_MAX] split at breaks."""
    pts = sorted({0.0, _Z_MAX} | {abs(float(b)) for b in breaks if 0.0 < abs(float(b)) < _Z_MAX})
    edges = [-p for p in reversed(pts)] + pts[1:] if pts[0] == 0.0 else None
    if edges is None:  # pragma: no cover - pts always contains 0
        edges = sorted({-p for p in pts} | set(pts))
    t, w = _gl_nodes(deg)
    zs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        # subdivide wide segments so a single panel never spans more than 2 units
        k = max(1, int(np.ceil((hi - lo) / 2.0)))
        for sub in range(k):
            a = lo + (hi - lo) * sub / k
            b = lo + (hi - lo) * (sub + 1) / k
            mid, half = 0.5 * (a + b), 0.5 * (b - a)
            z = mid + half * t
            zs.append(z)
            ws.append(half * w * np.exp(-0.5 * z * z) / SQRT_2PI)
    return np.concatenate(zs), np.concatenate(ws)


def expect_dz(f, rule: QuadratureRule, breaks=None) -> float:
    """Average of f over Dz.

    With ``breaks=None`` this is the plain weighted sum over the rule's nodes
    (exact for polynomials up to degree 2*order - 1).  Passing the locations
    where f is non-smooth via ``breaks`` switches to Gauss-Legendre panels
    split at those points (with the Gaussian weight folded in), which keeps
    full accuracy for kinked or jumpy integrands; the panel degree scales
    with the rule's order.
    """
    if breaks is None:
        return float(np.dot(rule.weights, f(rule.nodes)))
    deg = int(min(max(rule.order // 4, 8), 48))
    z, w = _split_panels(breaks, deg)
    return float(np.dot(w, f(z)))
