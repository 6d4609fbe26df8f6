"""Shared solver for the block subproblems of both outer algorithms.

Every primal update has the shape

    min_x  g(x) + ⟨w, x⟩ + (beta/2)‖Kx − d‖² + (1/2)‖x − x0‖²_W

and is dispatched to a closed form whenever the structure allows:
a prox step when W cancels the Gram term or K is a scaled identity, an
FFT solve for the periodic-difference data term, a Woodbury or dense
linear solve for quadratic g, and the inner accelerated prox-gradient
loop otherwise.
"""

from __future__ import annotations

import numpy as np

from .baselines import ProxSubproblem, inner_prox_solve
from .functions import ProxFn, QuadraticProx, SquaredDistance, ZeroProx
from .operators import (DenseMap, LinearMap, ScaledIdentityMap,
                        ScalingOperator, operator_norm)


def _cached_opnorm(op: LinearMap) -> float:
    cached = getattr(op, "_opnorm_cache", None)
    if cached is None:
        cached = operator_norm(op)
        op._opnorm_cache = cached
    return cached


def _matches_gram(W: ScalingOperator, K: LinearMap, beta: float) -> bool:
    return (W.kind == "identity-minus-gram" and W.op is K
            and abs(W.c - beta) <= 1e-12 * max(1.0, abs(beta)))


def solve_block(g: ProxFn, w: np.ndarray, beta: float, K: LinearMap,
                d: np.ndarray, W: ScalingOperator, x0: np.ndarray,
                subtol: float = 1e-10, max_inner: int = 200000) -> tuple[np.ndarray, dict]:
    """Minimize the block model above; returns (x, info).

    ``info['path']`` names the dispatch taken and ``info['residual']`` the
    inner residual when the iterative path ran (None for exact paths).
    """
    x0 = np.asarray(x0, dtype=float)
    info = {"path": None, "residual": None}

    # W = a·I − beta·KᵀK: the Gram term cancels, leaving a pure prox step.
    if _matches_gram(W, K, beta):
        a = W.a
        v = x0 - (w + beta * K.adjoint_apply(K.apply(x0) - d)) / a
        info["path"] = "prox-linearized"
        return g.prox(v, 1.0 / a), info

    # K = s·I with a scalar weight: quadratic part is (beta s² + a)·I.
    if isinstance(K, ScaledIdentityMap) and W.is_scaled_identity:
        s = K.scale
        a = beta * s * s + W.a
        if a == 0.0:
            # objective has no curvature in x; keep the current point
            info["path"] = "stationary"
            return x0.copy(), info
        v = (beta * s * d - w + W.a * x0) / a
        info["path"] = "prox-scaled-identity"
        return g.prox(v, 1.0 / a), info

    # (1/2)‖x − target‖² data term against the periodic difference Gram: FFT solve.
    if (isinstance(g, SquaredDistance) and W.is_scaled_identity
            and hasattr(K, "solve_shifted_gram")):
        rhs = g.target - w + beta * K.adjoint_apply(d) + W.a * x0
        info["path"] = "fft"
        return K.solve_shifted_gram(1.0 + W.a, beta, rhs), info

    # quadratic g with explicit K: direct linear solve.
    if isinstance(g, (QuadraticProx, ZeroProx, SquaredDistance)) and isinstance(K, DenseMap):
        rhs = -w + beta * K.adjoint_apply(d) + W.apply(x0)
        n = x0.shape[0]
        if isinstance(g, QuadraticProx):
            rhs = rhs - g.c
        elif isinstance(g, SquaredDistance):
            rhs = rhs + g.target
        if (isinstance(g, ZeroProx) and W.is_scaled_identity and W.a > 0
                and K.rows < K.cols):
            # (a·I + beta·KᵀK)⁻¹ via the m×m Woodbury system
            a = W.a
            small = a * np.eye(K.rows) + beta * K.gram_small()
            x = (rhs - beta * K.adjoint_apply(np.linalg.solve(small, K.apply(rhs)))) / a
            info["path"] = "woodbury"
            return x, info
        hess = beta * K.gram_big()
        if isinstance(g, QuadraticProx):
            hess = hess + g.H
        elif isinstance(g, SquaredDistance):
            hess = hess + np.eye(n)
        if W.is_scaled_identity:
            hess = hess + W.a * np.eye(n)
        else:
            hess = hess + W.dense(n)
        info["path"] = "dense"
        return np.linalg.solve(hess, rhs), info

    # general case: inner accelerated prox-gradient to subtol
    lo, hi = W.eigenvalue_bounds()
    k_norm_sq = _cached_opnorm(K) ** 2
    lipschitz = beta * k_norm_sq + max(hi, 0.0)
    strong = max(lo, 0.0)

    def grad(x):
        return w + beta * K.adjoint_apply(K.apply(x) - d) + W.apply(x - x0)

    grad_hp = None
    if subtol < 1e-8 and isinstance(K, DenseMap) and W.is_scaled_identity:
        # float64 gradient noise (~beta‖K‖²·eps) can exceed tight subtols;
        # certify termination in extended precision instead.
        K_hp = K.matrix.astype(np.longdouble)
        w_hp = np.asarray(w, dtype=np.longdouble)
        d_hp = np.asarray(d, dtype=np.longdouble)
        x0_hp = x0.astype(np.longdouble)
        a_hp = np.longdouble(W.a)
        beta_hp = np.longdouble(beta)

        def grad_hp(x):
            x = x.astype(np.longdouble)
            out = w_hp + beta_hp * (K_hp.T @ (K_hp @ x - d_hp)) + a_hp * (x - x0_hp)
            return out.astype(float)

    sub = ProxSubproblem(grad=grad, lipschitz=lipschitz, strong_convexity=strong,
                         prox=g.prox, x0=x0, grad_hp=grad_hp)
    x, resid = inner_prox_solve(sub, subtol, max_inner)
    info["path"] = "inner"
    info["residual"] = resid
    return x, info
