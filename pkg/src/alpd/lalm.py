"""Accelerated linearized augmented Lagrangian method (three-sequence form).

Implements the four-update iteration

    x̂ᵏ   = (1−αₖ)·x̄ᵏ + αₖ·xᵏ
    xᵏ⁺¹ = argmin ⟨∇f(x̂ᵏ) − Aᵀλᵏ, x⟩ + g(x) + (βₖ/2)‖Ax−b‖² + (1/2)‖x−xᵏ‖²_{Pᵏ}
    x̄ᵏ⁺¹ = (1−αₖ)·x̄ᵏ + αₖ·xᵏ⁺¹
    λᵏ⁺¹ = λᵏ − γₖ(Axᵏ⁺¹ − b)

with the constant O(1/t) and adaptive O(1/t²) parameter schedules, their
rate certificates, and the per-iteration inequality check that audits
every step of a trace at runtime.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ._blocksolve import solve_block
from .baselines import InnerSolveError
from .functions import ProxFn, SmoothFn
from .operators import LinearMap, ScalingOperator
from .record import RunOptions, RunRecord, SolverError


class ScheduleError(ValueError):
    """A schedule parameter violates its admissibility window."""


@dataclass
class Reference:
    """Known primal-dual solution used for diagnostics and bound audits."""

    xstar: np.ndarray
    lamstar: np.ndarray
    fstar: float


@dataclass
class CompositeProblem:
    """min f(x) + g(x) s.t. Ax = b with smooth f and prox-friendly g."""

    f: SmoothFn
    g: ProxFn
    A: LinearMap
    b: np.ndarray
    reference: Optional[Reference] = None
    name: str = ""

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if self.b.shape != (self.A.rows,):
            raise ValueError("b must have length A.rows")
        if self.reference is not None:
            primal = float(np.linalg.norm(self.A.apply(self.reference.xstar) - self.b))
            if primal > 1e-8 * (1.0 + float(np.linalg.norm(self.b))):
                raise ValueError(f"reference is primal-infeasible: ‖Ax*−b‖ = {primal:.3e}")

    @property
    def dim(self) -> int:
        return self.A.cols

    def objective(self, x: np.ndarray) -> float:
        return self.f.value(x) + self.g.value(x)

    def feasibility(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.A.apply(x) - self.b))


def augmented_lagrangian(problem: CompositeProblem, x: np.ndarray,
                         lam: np.ndarray, beta: float) -> float:
    """F(x) − ⟨λ, Ax−b⟩ + (β/2)‖Ax−b‖²; +inf if x is outside g's domain."""
    if not problem.g.in_domain(x, tol=0.0):
        return math.inf
    r = problem.A.apply(x) - problem.b
    lam = np.asarray(lam, dtype=float)
    if lam.shape != r.shape:
        raise ValueError("multiplier has wrong length")
    return problem.objective(x) - float(lam @ r) + 0.5 * beta * float(r @ r)


@dataclass
class LalmState:
    """Iterate triple at schedule index k (λ¹ = 0 and x̄¹ = x¹ at start)."""

    k: int
    x: np.ndarray
    xbar: np.ndarray
    lam: np.ndarray

    @classmethod
    def initial(cls, problem: CompositeProblem, x1: np.ndarray) -> "LalmState":
        x1 = np.asarray(x1, dtype=float)
        return cls(k=1, x=x1, xbar=x1, lam=np.zeros(problem.A.rows))


@dataclass
class LalmParams:
    """Per-iteration parameters (αₖ, βₖ, γₖ, Pᵏ)."""

    alpha: float
    beta: float
    gamma: float
    P: ScalingOperator

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ScheduleError("alpha must lie in [0, 1]")
        if self.beta <= 0 or self.gamma <= 0:
            raise ScheduleError("beta and gamma must be positive")


def lalm_step(problem: CompositeProblem, state: LalmState, params: LalmParams,
              subtol: float = 1e-10, max_inner: int = 200000):
    """One iteration; returns (next_state, info) with the subproblem path taken."""
    a = params.alpha
    xhat = (1.0 - a) * state.xbar + a * state.x
    w = problem.f.gradient(xhat) - problem.A.adjoint_apply(state.lam)
    x_new, info = solve_block(problem.g, w, params.beta, problem.A, problem.b,
                              params.P, state.x, subtol=subtol, max_inner=max_inner)
    xbar_new = (1.0 - a) * state.xbar + a * x_new
    lam_new = state.lam - params.gamma * (problem.A.apply(x_new) - problem.b)
    return LalmState(state.k + 1, x_new, xbar_new, lam_new), info


# ---------------------------------------------------------------------------
# schedules


class LalmSchedule:
    kind = ""

    def params(self, k: int) -> LalmParams:
        raise NotImplementedError


class ConstantLalmSchedule(LalmSchedule):
    kind = "constant"

    def __init__(self, beta: float, gamma: float, P: ScalingOperator):
        self.beta = beta
        self.gamma = gamma
        self.P = P
        self._params = LalmParams(1.0, beta, gamma, P)

    def params(self, k: int) -> LalmParams:
        return self._params


class AdaptiveLalmSchedule(LalmSchedule):
    kind = "adaptive"

    def __init__(self, gamma: float, eta: float,
                 beta_rule: Optional[Callable[[float], float]] = None):
        self.gamma = gamma
        self.eta = eta
        self.beta_rule = beta_rule

    def params(self, k: int) -> LalmParams:
        gamma_k = k * self.gamma
        beta_k = gamma_k if self.beta_rule is None else float(self.beta_rule(gamma_k))
        if beta_k < gamma_k / 2:
            raise ScheduleError("beta_k must be at least gamma_k/2")
        return LalmParams(2.0 / (k + 1), beta_k, gamma_k,
                          ScalingOperator.scaled_identity(self.eta / k))


def schedule_lalm_constant(problem: CompositeProblem, beta: float, gamma: float,
                           eta: float, linearize_aug: bool = False) -> ConstantLalmSchedule:
    """Constant schedule of the O(1/t) theorem: αₖ=1, βₖ=β, γₖ=γ∈(0,2β), P ≻ L_f·I.

    With ``linearize_aug`` the weight is P = η·I − β·AᵀA (requires
    η > L_f + β‖A‖₂²), otherwise P = η·I with η > L_f; both strict.
    """
    if beta <= 0:
        raise ScheduleError("beta must be positive")
    if not 0.0 < gamma < 2.0 * beta:
        raise ScheduleError("gamma must lie in the open interval (0, 2*beta)")
    lf = problem.f.lipschitz
    if linearize_aug:
        from .operators import operator_norm
        a_norm_sq = operator_norm(problem.A) ** 2
        if eta <= lf + beta * a_norm_sq:
            raise ScheduleError(
                "eta must exceed L_f + beta*‖A‖₂² to keep P ≻ L_f·I after "
                "linearizing the augmented term")
        P = ScalingOperator.identity_minus_gram(eta, beta, problem.A)
    else:
        if eta <= lf:
            raise ScheduleError("eta must exceed L_f strictly (P ≻ L_f·I)")
        P = ScalingOperator.scaled_identity(eta)
    return ConstantLalmSchedule(beta, gamma, P)


def schedule_lalm_adaptive(problem: CompositeProblem, gamma: float, eta: float,
                           beta_rule: Optional[Callable[[float], float]] = None
                           ) -> AdaptiveLalmSchedule:
    """Adaptive schedule of the O(1/t²) theorem.

    αₖ = 2/(k+1), γₖ = kγ, βₖ = beta_rule(γₖ) (default γₖ, always ≥ γₖ/2),
    Pᵏ = (η/k)·I with γ > 0 and η ≥ 2L_f.
    """
    if gamma <= 0:
        raise ScheduleError("gamma must be positive")
    if eta < 2.0 * problem.f.lipschitz:
        raise ScheduleError("eta must be at least 2*L_f")
    return AdaptiveLalmSchedule(gamma, eta, beta_rule)


# ---------------------------------------------------------------------------
# certificates


def _gap(problem: CompositeProblem, x: np.ndarray, x_ref: np.ndarray,
         lam: np.ndarray) -> float:
    return (problem.objective(x) - problem.objective(x_ref)
            - float(lam @ (problem.A.apply(x) - problem.b)))


def check_one_iter_lalm(prev: LalmState, new: LalmState, params: LalmParams,
                        x_feas: np.ndarray, lam_test: np.ndarray,
                        problem: CompositeProblem) -> float:
    """Slack (RHS − LHS) of the one-iteration inequality at this step.

    Nonnegative (to roundoff) whenever the subproblem was solved exactly;
    ``x_feas`` must satisfy Ax=b and λ may be arbitrary.
    """
    slack, _ = check_one_iter_lalm_scaled(prev, new, params, x_feas, lam_test, problem)
    return slack


def check_one_iter_lalm_scaled(prev, new, params, x_feas, lam_test, problem):
    """(raw slack, magnitude scale) of the one-iteration inequality."""
    if not 0.0 <= params.alpha <= 1.0:
        raise ValueError("alpha outside [0, 1] violates the lemma hypothesis")
    x_feas = np.asarray(x_feas, dtype=float)
    lam_test = np.asarray(lam_test, dtype=float)
    feas = float(np.linalg.norm(problem.A.apply(x_feas) - problem.b))
    if feas > 1e-8 * (1.0 + float(np.linalg.norm(problem.b))):
        raise ValueError(f"x_feas violates Ax=b (residual {feas:.3e})")
    a, beta, gamma, P = params.alpha, params.beta, params.gamma, params.P
    lf = problem.f.lipschitz

    gap_new = _gap(problem, new.xbar, x_feas, lam_test)
    gap_old = _gap(problem, prev.xbar, x_feas, lam_test)
    lhs = gap_new - (1.0 - a) * gap_old

    dx_new = new.x - x_feas
    dx_old = prev.x - x_feas
    dstep = new.x - prev.x
    dlam_old = prev.lam - lam_test
    dlam_new = new.lam - lam_test
    dlam_step = new.lam - prev.lam

    t_p = -0.5 * a * (P.norm_sq(dx_new) - P.norm_sq(dx_old) + P.norm_sq(dstep))
    t_lf = 0.5 * a * a * lf * float(dstep @ dstep)
    t_lam = (a / (2.0 * gamma)) * (float(dlam_old @ dlam_old)
                                   - float(dlam_new @ dlam_new)
                                   + float(dlam_step @ dlam_step))
    t_pen = -(a * beta / gamma ** 2) * float(dlam_step @ dlam_step)
    rhs = t_p + t_lf + t_lam + t_pen
    scale = max(1.0, abs(gap_new) + abs(gap_old) + abs(t_p) + abs(t_lf)
                + abs(t_lam) + abs(t_pen))
    return rhs - lhs, scale


def bound_lalm_adaptive(t: int, x1, xstar, lamstar, eta: float, gamma: float):
    """(objective bound, feasibility bound) of the adaptive-schedule theorem at t.

    obj: (η‖x¹−x*‖² + 4‖λ*‖²/γ) / (t(t+1)); feas: obj/‖λ*‖, or None when
    λ* = 0 (the feasibility form is then unavailable).
    """
    if t < 1:
        raise ValueError("bound requires t >= 1")
    dx = np.asarray(x1, dtype=float) - np.asarray(xstar, dtype=float)
    lam_norm = float(np.linalg.norm(lamstar))
    num = eta * float(dx @ dx) + 4.0 * lam_norm ** 2 / gamma
    obj = num / (t * (t + 1.0))
    return obj, (obj / lam_norm if lam_norm > 0 else None)


def bound_lalm_constant(t: int, x1, xstar, lamstar, P: ScalingOperator, gamma: float):
    """Constant-schedule ergodic bounds: ((1/2)‖x¹−x*‖²_P + 2‖λ*‖²/γ) / t."""
    if t < 1:
        raise ValueError("bound requires t >= 1")
    dx = np.asarray(x1, dtype=float) - np.asarray(xstar, dtype=float)
    lam_norm = float(np.linalg.norm(lamstar))
    num = 0.5 * P.norm_sq(dx) + 2.0 * lam_norm ** 2 / gamma
    obj = num / t
    return obj, (obj / lam_norm if lam_norm > 0 else None)


# ---------------------------------------------------------------------------
# driver


def run_lalm(problem: CompositeProblem, schedule: LalmSchedule, x1: np.ndarray,
             max_iter: int, opts: Optional[RunOptions] = None) -> RunRecord:
    """Run the method, producing a per-iteration certificate trace.

    The obj_err/feas columns evaluate the iterate the schedule's rate
    theorem speaks about: the running uniform ergodic average for the
    constant schedule, the x̄ sequence for the adaptive one. Restarting
    (every ``opts.restart_every`` outer iterations) resets the schedule
    index and x̄ but keeps the multiplier; bound columns are disabled for
    restarted runs since the certificate's t-indexing no longer applies.
    """
    opts = opts or RunOptions()
    x1 = np.asarray(x1, dtype=float)
    if not problem.g.in_domain(x1, tol=0.0):
        raise ValueError("x1 must lie in the domain of g")
    ref = problem.reference
    record = RunRecord("lalm", schedule.kind,
                       {"problem": problem.name, "subtol": opts.subtol,
                        "restart_every": opts.restart_every})
    state = LalmState.initial(problem, x1)
    if max_iter == 0:
        record.final.update(x=state.x, xbar=state.xbar, lam=state.lam)
        return record

    erg_sum = np.zeros_like(x1)
    erg_count = 0
    restarted = opts.restart_every is not None
    start = time.perf_counter()
    try:
        for t in range(1, max_iter + 1):
            params = schedule.params(state.k)
            new_state, info = lalm_step(problem, state, params,
                                        subtol=opts.subtol, max_inner=opts.max_inner)

            if schedule.kind == "constant":
                erg_sum += new_state.x
                erg_count += 1
                cert_x = erg_sum / erg_count
            else:
                cert_x = new_state.xbar

            obj_err = feas = bound_obj = bound_feas = slack = None
            extras = {}
            if ref is not None:
                obj_err = abs(problem.objective(cert_x) - ref.fstar)
                feas = problem.feasibility(cert_x)
                if opts.bounds and not restarted:
                    if schedule.kind == "adaptive":
                        bound_obj, bound_feas = bound_lalm_adaptive(
                            t, x1, ref.xstar, ref.lamstar, schedule.eta, schedule.gamma)
                    else:
                        bound_obj, bound_feas = bound_lalm_constant(
                            t, x1, ref.xstar, ref.lamstar, schedule.P, schedule.gamma)
                if opts.checks:
                    raw, scale = check_one_iter_lalm_scaled(
                        state, new_state, params, ref.xstar, ref.lamstar, problem)
                    slack = raw / scale
                if opts.track_extras:
                    extras["obj_err_last"] = abs(problem.objective(new_state.x) - ref.fstar)
                    extras["feas_last"] = problem.feasibility(new_state.x)
            if opts.track_extras:
                extras["inner_resid"] = info["residual"]

            record.append(t, obj_err=obj_err, feas=feas, bound_obj=bound_obj,
                          bound_feas=bound_feas, ineq_slack=slack,
                          wall_time_s=time.perf_counter() - start, **extras)

            state = new_state
            if opts.restart_every is not None and t % opts.restart_every == 0:
                state = replace(state, k=1, xbar=state.x)
                erg_sum[:] = 0.0
                erg_count = 0
    except InnerSolveError as err:
        record.final.update(x=state.x, xbar=state.xbar, lam=state.lam)
        raise SolverError(f"lalm inner solve failed at iteration {len(record)+1}: {err}",
                          record) from err

    if schedule.kind == "constant" and erg_count > 0:
        record.final["x_ergodic"] = erg_sum / erg_count
    record.final.update(x=state.x, xbar=state.xbar, lam=state.lam)
    return record
