"""Comparison solvers and the generic inner subproblem solver.

``inner_prox_solve`` is an accelerated proximal gradient loop used
whenever an outer algorithm's block subproblem has no closed form; it
terminates on the unit-step prox-gradient residual
‖x − prox_g(x − ∇q(x))‖ ≤ subtol. FISTA (with periodic momentum restart)
and the accelerated Chambolle-Pock method are the outer baselines.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .functions import L1Norm, NonnegIndicator, ZeroProx
from .operators import DenseMap
from .problems import PeriodicDiffMap
from .record import RunRecord, SolverError


class InnerSolveError(RuntimeError):
    """Inner solver hit its iteration cap; carries the best iterate."""

    def __init__(self, residual: float, subtol: float, best_x: np.ndarray):
        super().__init__(
            f"inner solver stalled at residual {residual:.3e} (target {subtol:.3e})")
        self.residual = residual
        self.best_x = best_x


@dataclass
class ProxSubproblem:
    """min_x q(x) + g(x) with q smooth (grad, L, mu) and g prox-friendly.

    ``grad_hp`` optionally evaluates the same gradient in extended
    precision; it is used only for the termination residual, never for
    the iteration itself.
    """

    grad: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    strong_convexity: float
    prox: Callable[[np.ndarray, float], np.ndarray]
    x0: np.ndarray
    grad_hp: Optional[Callable[[np.ndarray], np.ndarray]] = None


def prox_grad_residual(sub: ProxSubproblem, x: np.ndarray) -> float:
    """Unit-step prox-gradient residual ‖x − prox_g(x − ∇q(x))‖."""
    g = sub.grad_hp(x) if sub.grad_hp is not None else sub.grad(x)
    step = np.asarray(x - g, dtype=float)
    return float(np.linalg.norm(x - sub.prox(step, 1.0)))


def inner_prox_solve(sub: ProxSubproblem, subtol: float, max_inner: int,
                     check_every: int = 5) -> tuple[np.ndarray, float]:
    """Accelerated proximal gradient on a (strongly) convex composite.

    Uses the constant momentum (√L−√μ)/(√L+√μ) when μ > 0, the FISTA
    t-sequence otherwise. Returns (x, residual) with residual ≤ subtol, or
    raises InnerSolveError carrying the best iterate found.
    """
    L = sub.lipschitz
    mu = sub.strong_convexity
    x = np.asarray(sub.x0, dtype=float)
    resid = prox_grad_residual(sub, x)
    if resid <= subtol:
        return x, resid
    best_x, best_resid = x, resid

    theta = ((math.sqrt(L) - math.sqrt(mu)) / (math.sqrt(L) + math.sqrt(mu))
             if mu > 0 else None)
    y = x
    t_mom = 1.0
    for it in range(1, max_inner + 1):
        x_new = sub.prox(y - sub.grad(y) / L, 1.0 / L)
        if theta is not None:
            y = x_new + theta * (x_new - x)
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
            y = x_new + ((t_mom - 1.0) / t_new) * (x_new - x)
            t_mom = t_new
        x = x_new
        if it % check_every == 0 or it == max_inner:
            resid = prox_grad_residual(sub, x)
            if resid <= subtol:
                return x, resid
            if resid < best_resid:
                best_x, best_resid = x, resid
    raise InnerSolveError(best_resid, subtol, best_x)


# ---------------------------------------------------------------------------
# projections onto {Ax = b} and {Ax = b, x >= 0}


def project_affine(A: DenseMap, b: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Exact projection onto {x : Ax = b} via the cached m×m Gram system."""
    gram = A.gram_small()
    return v - A.adjoint_apply(np.linalg.solve(gram, A.apply(v) - b))


def project_affine_nonneg(A: DenseMap, b: np.ndarray, v: np.ndarray,
                          subtol: float, max_inner: int,
                          mu0: Optional[np.ndarray] = None) -> tuple[np.ndarray, np.ndarray]:
    """Projection onto {Ax = b, x ≥ 0} solved through its smooth dual.

    The dual of the projection QP is an unconstrained m-dimensional
    smooth problem with gradient Ax(μ)−b, x(μ)=[v+Aᵀμ]₊, maximized with
    the same accelerated loop; termination at ‖Ax(μ)−b‖ ≤ subtol. Returns
    (x, μ); x is exactly nonnegative and feasible to within subtol.
    """
    lips = float(np.linalg.norm(A.matrix, 2)) ** 2

    def primal(mu):
        return np.maximum(v + A.adjoint_apply(mu), 0.0)

    sub = ProxSubproblem(
        grad=lambda mu: A.apply(primal(mu)) - b,
        lipschitz=lips,
        strong_convexity=0.0,
        prox=lambda w, t: w,
        x0=np.zeros(A.rows) if mu0 is None else mu0,
    )
    mu, _ = inner_prox_solve(sub, subtol, max_inner)
    return primal(mu), mu


# ---------------------------------------------------------------------------
# FISTA with periodic restart


def fista(problem, L: float, restart_every: Optional[int], subtol: float,
          max_iter: int, x1: Optional[np.ndarray] = None,
          max_inner: int = 200000) -> RunRecord:
    """Accelerated projected gradient on min f(x) s.t. Ax=b (and x ≥ 0 if g says so).

    The feasible-set projection is exact for the affine case and solved by
    the dual inner loop to ``subtol`` for the nonnegative case. Momentum is
    reset every ``restart_every`` iterations (``None`` disables restarts;
    1 gives plain projected gradient).
    """
    if L < problem.f.lipschitz:
        raise ValueError("fista: L must dominate the gradient Lipschitz constant")
    g = problem.g
    if not isinstance(g, (ZeroProx, NonnegIndicator)):
        raise ValueError("fista supports g = 0 or the nonnegative indicator")
    nonneg = isinstance(g, NonnegIndicator)
    A = problem.A
    if not isinstance(A, DenseMap):
        raise ValueError("fista requires an explicit constraint matrix")

    ref = problem.reference
    record = RunRecord("fista", "restart" if restart_every else "plain",
                       {"L": L, "restart_every": restart_every, "subtol": subtol,
                        "problem": problem.name})
    mu_warm = None

    def proj(v):
        nonlocal mu_warm
        if nonneg:
            x, mu_warm = project_affine_nonneg(A, problem.b, v, subtol, max_inner,
                                               mu0=mu_warm)
            return x
        return project_affine(A, problem.b, v)

    if x1 is None:
        x1 = proj(np.zeros(A.cols))
    x = np.asarray(x1, dtype=float)
    x_prev = x
    t_mom = 1.0
    since_restart = 0
    start = time.perf_counter()
    try:
        for k in range(1, max_iter + 1):
            if restart_every is not None and since_restart >= restart_every:
                t_mom = 1.0
                since_restart = 0
            if since_restart == 0:
                y = x
            else:
                t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
                y = x + ((t_mom - 1.0) / t_new) * (x - x_prev)
                t_mom = t_new
            x_prev = x
            x = proj(y - problem.f.gradient(y) / L)
            since_restart += 1

            obj_err = None
            if ref is not None:
                obj_err = abs(problem.f.value(x) - ref.fstar)
            record.append(k, obj_err=obj_err,
                          feas=float(np.linalg.norm(A.apply(x) - problem.b)),
                          wall_time_s=time.perf_counter() - start)
    except InnerSolveError as err:
        record.final["x"] = x
        raise SolverError(f"fista projection failed: {err}", record) from err
    record.final["x"] = x
    return record


# ---------------------------------------------------------------------------
# accelerated Chambolle-Pock for TV denoising


@dataclass
class CpState:
    """Chambolle-Pock iterate: box-constrained dual Z, image X, extrapolation X̄."""

    Z: np.ndarray
    X: np.ndarray
    X_bar: np.ndarray
    tau: float
    sigma: float
    theta: float = 1.0


def cp_step(state: CpState, M: np.ndarray, mu: float, gamma: float,
            D: PeriodicDiffMap) -> CpState:
    """One accelerated primal-dual update on the scaled TV problem."""
    Z = np.clip(state.Z + state.sigma * D.apply(state.X_bar), -1.0, 1.0)
    # prox of tau/(2 mu)·‖X−M‖² at X − tau·DᵀZ
    X = (state.X - state.tau * D.adjoint_apply(Z) + (state.tau / mu) * M) \
        / (1.0 + state.tau / mu)
    theta = 1.0 / math.sqrt(1.0 + 2.0 * gamma * state.tau)
    X_bar = X + theta * (X - state.X)
    return CpState(Z=Z, X=X, X_bar=X_bar, tau=theta * state.tau,
                   sigma=state.sigma / theta, theta=theta)


def chambolle_pock_tv(image: np.ndarray, mu: float, tau1: Optional[float] = None,
                      sigma1: Optional[float] = None, gamma_cp: Optional[float] = None,
                      max_iter: int = 200, ref_obj: Optional[float] = None) -> RunRecord:
    """Accelerated Chambolle-Pock on min (1/2)‖X−M‖²_F + mu‖DX‖₁.

    Defaults follow the suggested setting tau1 = sigma1 = 1/‖D‖₂ and
    gamma = 0.35/mu; theta_k = 1/sqrt(1+2·gamma·tau_k) with tau·sigma kept
    invariant. Records the unconstrained objective at X^k per iteration.
    """
    image = np.asarray(image, dtype=float)
    h, w = image.shape
    D = PeriodicDiffMap(h, w)
    d_norm_sq = D.gram_norm_sq()
    if tau1 is None:
        tau1 = 1.0 / math.sqrt(d_norm_sq)
    if sigma1 is None:
        sigma1 = 1.0 / math.sqrt(d_norm_sq)
    if gamma_cp is None:
        gamma_cp = 0.35 / mu
    if tau1 * sigma1 * d_norm_sq > 1.0 + 1e-12:
        raise ValueError("chambolle_pock_tv: need tau1*sigma1*‖D‖₂² <= 1")

    m_flat = image.ravel()
    l1 = L1Norm(mu)

    def objective(x_flat):
        d = x_flat - m_flat
        return 0.5 * float(d @ d) + l1.value(D.apply(x_flat))

    state = CpState(Z=np.zeros(D.rows), X=m_flat.copy(), X_bar=m_flat.copy(),
                    tau=tau1, sigma=sigma1)
    record = RunRecord("chambolle_pock", "accelerated",
                       {"mu": mu, "tau1": tau1, "sigma1": sigma1,
                        "gamma": gamma_cp, "grid": [h, w]})
    start = time.perf_counter()
    for k in range(1, max_iter + 1):
        state = cp_step(state, m_flat, mu, gamma_cp, D)
        obj = objective(state.X)
        record.append(k,
                      obj_err=None if ref_obj is None else abs(obj - ref_obj),
                      wall_time_s=time.perf_counter() - start,
                      obj=obj, tau_sigma=state.tau * state.sigma)
    record.final["X"] = state.X.reshape(h, w)
    record.final["state"] = state
    return record
