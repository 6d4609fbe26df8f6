"""Smooth and prox-friendly objective terms.

Smooth terms expose value/gradient plus a certified gradient Lipschitz
constant; prox-friendly terms expose value/prox plus a certified strong
convexity modulus. Moduli and Lipschitz constants are stored data, never
inferred at call time.
"""

from __future__ import annotations

import numpy as np


# ---------------------------------------------------------------------------
# closed-form proximal maps


def prox_l1(v: np.ndarray, t: float) -> np.ndarray:
    """Soft thresholding: argmin_x ‖x‖₁ + (1/2t)‖x−v‖², componentwise."""
    if t < 0:
        raise ValueError("prox_l1: threshold must be nonnegative")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_nonneg(v: np.ndarray) -> np.ndarray:
    """Projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def prox_hinge_sum(v: np.ndarray, t: float, m: int) -> np.ndarray:
    """Prox of (1/m)·Σᵢ max(vᵢ, 0) with parameter t.

    Componentwise: v−t/m above the kink interval, 0 on [0, t/m],
    unchanged below 0.
    """
    if t < 0:
        raise ValueError("prox_hinge_sum: parameter must be nonnegative")
    if m < 1:
        raise ValueError("prox_hinge_sum: m must be at least 1")
    v = np.asarray(v, dtype=float)
    shift = t / m
    return np.where(v > shift, v - shift, np.where(v < 0, v, 0.0))


def prox_elastic_net(v: np.ndarray, t: float, mu1: float, mu2: float) -> np.ndarray:
    """Prox of mu1‖x‖₁ + (mu2/2)‖x‖²: soft-threshold then shrink."""
    if t < 0 or mu1 < 0 or mu2 < 0:
        raise ValueError("prox_elastic_net: parameters must be nonnegative")
    return prox_l1(v, t * mu1) / (1.0 + t * mu2)


# ---------------------------------------------------------------------------
# smooth terms


class SmoothFn:
    """Differentiable convex term with certified constants.

    ``lipschitz`` bounds the gradient's Lipschitz constant from above and
    ``strong_convexity`` bounds the modulus from below.
    """

    lipschitz: float = 0.0
    strong_convexity: float = 0.0

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ZeroSmooth(SmoothFn):
    def value(self, x):
        return 0.0

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class QuadraticSmooth(SmoothFn):
    """f(x) = (1/2)xᵀQx + cᵀx with symmetric Q."""

    def __init__(self, Q: np.ndarray, c: np.ndarray,
                 lipschitz: float | None = None, strong_convexity: float = 0.0):
        self.Q = np.asarray(Q, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.lipschitz = float(np.linalg.norm(self.Q, 2) if lipschitz is None else lipschitz)
        self.strong_convexity = float(strong_convexity)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ (self.Q @ x)) + float(self.c @ x)

    def gradient(self, x):
        return self.Q @ np.asarray(x, dtype=float) + self.c


# ---------------------------------------------------------------------------
# prox-friendly terms


class ProxFn:
    """Convex term with an exact proximal map.

    ``value`` returns the finite part; indicator-type terms signal domain
    membership through ``in_domain`` instead of returning float inf, so
    objective traces stay finite and comparable.
    """

    strong_convexity: float = 0.0
    is_indicator: bool = False

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, v: np.ndarray, t: float) -> np.ndarray:
        """argmin_x value(x) + (1/2t)‖x−v‖²."""
        raise NotImplementedError

    def in_domain(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return True


class ZeroProx(ProxFn):
    def value(self, x):
        return 0.0

    def prox(self, v, t):
        return np.asarray(v, dtype=float)


class L1Norm(ProxFn):
    """weight·‖x‖₁."""

    def __init__(self, weight: float = 1.0):
        if weight < 0:
            raise ValueError("L1Norm weight must be nonnegative")
        self.weight = float(weight)

    def value(self, x):
        return self.weight * float(np.sum(np.abs(x)))

    def prox(self, v, t):
        return prox_l1(v, t * self.weight)


class NonnegIndicator(ProxFn):
    """Indicator of the nonnegative orthant."""

    is_indicator = True

    def value(self, x):
        return 0.0

    def prox(self, v, t):
        return project_nonneg(v)

    def in_domain(self, x, tol=0.0):
        return bool(np.min(x) >= -tol) if np.size(x) else True


class HingeSum(ProxFn):
    """(1/m)·Σᵢ max(xᵢ, 0), the averaged positive-part penalty."""

    def __init__(self, m: int):
        if m < 1:
            raise ValueError("HingeSum: m must be at least 1")
        self.m = int(m)

    def value(self, x):
        return float(np.sum(np.maximum(x, 0.0))) / self.m

    def prox(self, v, t):
        return prox_hinge_sum(v, t, self.m)


class ElasticNet(ProxFn):
    """mu1‖x‖₁ + (mu2/2)‖x‖², strongly convex with modulus mu2."""

    def __init__(self, mu1: float, mu2: float):
        if mu1 < 0 or mu2 < 0:
            raise ValueError("ElasticNet parameters must be nonnegative")
        self.mu1 = float(mu1)
        self.mu2 = float(mu2)
        self.strong_convexity = self.mu2

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.mu1 * float(np.sum(np.abs(x))) + 0.5 * self.mu2 * float(x @ x)

    def prox(self, v, t):
        return prox_elastic_net(v, t, self.mu1, self.mu2)


class SquaredDistance(ProxFn, SmoothFn):
    """(1/2)‖x − target‖², both prox-friendly and smooth (L = μ = 1)."""

    def __init__(self, target: np.ndarray):
        self.target = np.asarray(target, dtype=float)
        self.strong_convexity = 1.0
        self.lipschitz = 1.0

    def value(self, x):
        d = np.asarray(x, dtype=float) - self.target
        return 0.5 * float(d @ d)

    def gradient(self, x):
        return np.asarray(x, dtype=float) - self.target

    def prox(self, v, t):
        if t < 0:
            raise ValueError("prox parameter must be nonnegative")
        return (np.asarray(v, dtype=float) + t * self.target) / (1.0 + t)


class QuadraticProx(ProxFn):
    """(1/2)xᵀHx + cᵀx with H ⪰ 0; prox is a dense linear solve."""

    def __init__(self, H: np.ndarray, c: np.ndarray, strong_convexity: float = 0.0):
        self.H = np.asarray(H, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.strong_convexity = float(strong_convexity)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ (self.H @ x)) + float(self.c @ x)

    def prox(self, v, t):
        if t < 0:
            raise ValueError("prox parameter must be nonnegative")
        v = np.asarray(v, dtype=float)
        if t == 0:
            return v
        n = v.shape[0]
        return np.linalg.solve(np.eye(n) + t * self.H, v - t * self.c)
