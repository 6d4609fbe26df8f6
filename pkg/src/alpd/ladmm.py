"""Accelerated linearized ADMM for two-block problems.

Implements the alternating updates

    yᵏ⁺¹ = argmin f(y) − ⟨λᵏ, By⟩ + (βₖ/2)‖By+Czᵏ−b‖² + (1/2)‖y−yᵏ‖²_{Pᵏ}
    zᵏ⁺¹ = argmin g(z) + ⟨∇h(zᵏ) − Cᵀλᵏ, z⟩ + (βₖ/2)‖Byᵏ⁺¹+Cz−b‖² + (1/2)‖z−zᵏ‖²_{Qᵏ}
    λᵏ⁺¹ = λᵏ − γₖ(Byᵏ⁺¹ + Czᵏ⁺¹ − b)

with the constant O(1/t) schedule and the strongly-convex adaptive
O(1/t²) schedule, including the iteration offset k₀, the potential φₖ,
weighted ergodic averaging, and per-iteration inequality checks.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._blocksolve import solve_block
from .baselines import InnerSolveError
from .functions import ProxFn, SmoothFn
from .operators import LinearMap, ScalingOperator, operator_norm
from .record import RunOptions, RunRecord, SolverError

from .lalm import ScheduleError


@dataclass
class TwoBlockReference:
    ystar: np.ndarray
    zstar: np.ndarray
    lamstar: np.ndarray
    fstar: float


@dataclass
class TwoBlockProblem:
    """min f(y) + g(z) + h(z) s.t. By + Cz = b.

    f and g are prox-friendly, h is smooth; the adaptive schedule
    additionally needs mu_g + mu_h > 0 (strong convexity on the z block).
    ``outer_objective``, when present, evaluates the source problem's
    unconstrained objective at a z iterate (e.g. F(X) for TV denoising).
    """

    f: ProxFn
    g: ProxFn
    h: SmoothFn
    B: LinearMap
    C: LinearMap
    b: np.ndarray
    reference: Optional[TwoBlockReference] = None
    outer_objective: Optional[Callable[[np.ndarray], float]] = None
    name: str = ""

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if self.B.rows != self.C.rows or self.b.shape != (self.B.rows,):
            raise ValueError("B.rows, C.rows and len(b) must agree")
        if self.reference is not None:
            primal = self.feasibility(self.reference.ystar, self.reference.zstar)
            if primal > 1e-8 * (1.0 + float(np.linalg.norm(self.b))):
                raise ValueError(f"reference is primal-infeasible: {primal:.3e}")

    @property
    def mu_g(self) -> float:
        return self.g.strong_convexity

    @property
    def mu_h(self) -> float:
        return self.h.strong_convexity

    @property
    def lips_h(self) -> float:
        return self.h.lipschitz

    def objective(self, y: np.ndarray, z: np.ndarray) -> float:
        return self.f.value(y) + self.g.value(z) + self.h.value(z)

    def feasibility(self, y: np.ndarray, z: np.ndarray) -> float:
        return float(np.linalg.norm(self.B.apply(y) + self.C.apply(z) - self.b))


@dataclass
class LadmmState:
    k: int
    y: np.ndarray
    z: np.ndarray
    lam: np.ndarray

    @classmethod
    def initial(cls, problem: TwoBlockProblem, y1, z1) -> "LadmmState":
        return cls(k=1, y=np.asarray(y1, dtype=float), z=np.asarray(z1, dtype=float),
                   lam=np.zeros(problem.B.rows))


@dataclass
class LadmmParams:
    beta: float
    gamma: float
    P: ScalingOperator
    Q: ScalingOperator

    def __post_init__(self):
        if self.beta <= 0 or self.gamma <= 0:
            raise ScheduleError("beta and gamma must be positive")


def ladmm_step(problem: TwoBlockProblem, state: LadmmState, params: LadmmParams,
               subtol: float = 1e-10, max_inner: int = 200000):
    """One alternating update; returns (next_state, info)."""
    lam = state.lam
    w_y = -problem.B.adjoint_apply(lam)
    y_new, info_y = solve_block(problem.f, w_y, params.beta, problem.B,
                                problem.b - problem.C.apply(state.z), params.P,
                                state.y, subtol=subtol, max_inner=max_inner)
    w_z = problem.h.gradient(state.z) - problem.C.adjoint_apply(lam)
    z_new, info_z = solve_block(problem.g, w_z, params.beta, problem.C,
                                problem.b - problem.B.apply(y_new), params.Q,
                                state.z, subtol=subtol, max_inner=max_inner)
    resid = problem.B.apply(y_new) + problem.C.apply(z_new) - problem.b
    lam_new = lam - params.gamma * resid
    info = {"y": info_y, "z": info_z}
    return LadmmState(state.k + 1, y_new, z_new, lam_new), info


# ---------------------------------------------------------------------------
# schedules


@dataclass
class AdaptiveLadmmConfig:
    """Parameters of the strongly-convex adaptive schedule.

    Certifies η·γ·CᵀC ⪯ Q ⪯ ((μ_g+μ_h)/2)·I through spectral interval
    bounds and fixes k₀ = max(1, ⌈1 + 2(L_h−μ_h)/(μ_g+μ_h)⌉). Q is either
    q·I (augmented term linearized) or γ·CᵀC (plain adaptive ADMM).
    """

    gamma: float
    p: float
    Q: ScalingOperator
    eta: float
    k0: int
    lips_h: float
    mu_g: float
    mu_h: float

    @classmethod
    def create(cls, problem: TwoBlockProblem, gamma: float, p: float,
               Q: ScalingOperator, eta: float = 1.0) -> "AdaptiveLadmmConfig":
        if gamma <= 0:
            raise ScheduleError("gamma must be positive")
        if p < 0:
            raise ScheduleError("p must be nonnegative")
        if eta < 1.0:
            raise ScheduleError("eta must be at least 1")
        mu = problem.mu_g + problem.mu_h
        if mu <= 0:
            raise ScheduleError("adaptive schedule needs mu_g + mu_h > 0")
        tol = 1e-10
        c_norm_sq = operator_norm(problem.C) ** 2
        upper = 0.5 * mu
        if Q.is_scaled_identity:
            q = Q.a
            if eta * gamma * c_norm_sq > q * (1.0 + tol) + tol:
                raise ScheduleError(
                    "lower window violated: need eta*gamma*‖C‖₂² <= q")
            if q > upper * (1.0 + tol) + tol:
                raise ScheduleError(
                    "upper window violated: need q <= (mu_g+mu_h)/2")
        elif Q.kind == "gram" and Q.op is problem.C:
            if abs(Q.c - gamma) > 1e-12 * max(1.0, gamma):
                raise ScheduleError("gram-form Q must equal gamma*CᵀC")
            if eta > 1.0 + tol:
                raise ScheduleError("gram-form Q only admits eta = 1")
            if Q.c * c_norm_sq > upper * (1.0 + tol) + tol:
                raise ScheduleError(
                    "upper window violated: need gamma*‖C‖₂² <= (mu_g+mu_h)/2")
        else:
            raise ScheduleError("cannot certify the Q window for this operator kind")
        k0 = max(1, math.ceil(1.0 + 2.0 * (problem.lips_h - problem.mu_h) / mu))
        return cls(gamma=gamma, p=p, Q=Q, eta=eta, k0=k0,
                   lips_h=problem.lips_h, mu_g=problem.mu_g, mu_h=problem.mu_h)


class LadmmSchedule:
    kind = ""

    def params(self, k: int) -> LadmmParams:
        raise NotImplementedError


class ConstantLadmmSchedule(LadmmSchedule):
    kind = "constant"

    def __init__(self, gamma: float, P: ScalingOperator, Q: ScalingOperator):
        self.gamma = gamma
        self.P = P
        self.Q = Q
        self._params = LadmmParams(gamma, gamma, P, Q)

    def params(self, k: int) -> LadmmParams:
        return self._params


class AdaptiveLadmmSchedule(LadmmSchedule):
    kind = "adaptive"

    def __init__(self, cfg: AdaptiveLadmmConfig, C: LinearMap):
        self.cfg = cfg
        self.C = C

    def params(self, k: int) -> LadmmParams:
        cfg = self.cfg
        beta = (k + 1) * cfg.gamma
        P = ScalingOperator.scaled_identity(cfg.p / (k + 1))
        if cfg.Q.is_scaled_identity:
            # Qᵏ = (k+1)(q·I − γCᵀC) + L_h·I; the Gram part cancels the
            # augmented term in the z update.
            Q = ScalingOperator.identity_minus_gram(
                (k + 1) * cfg.Q.a + cfg.lips_h, beta, self.C)
        else:
            Q = ScalingOperator.scaled_identity(cfg.lips_h)
        return LadmmParams(beta, beta, P, Q)


def schedule_ladmm_constant(problem: TwoBlockProblem, gamma: float,
                            P: ScalingOperator, Q: ScalingOperator) -> ConstantLadmmSchedule:
    """Constant schedule: βₖ=γₖ=γ>0 with P ⪰ 0 and Q ⪰ L_h·I (certified)."""
    if gamma <= 0:
        raise ScheduleError("gamma must be positive")
    if not P.psd_certified():
        raise ScheduleError("P must be certified positive semidefinite")
    if not Q.psd_certified(shift=problem.lips_h):
        raise ScheduleError("Q − L_h·I must be certified positive semidefinite")
    return ConstantLadmmSchedule(gamma, P, Q)


def schedule_ladmm_adaptive(problem: TwoBlockProblem,
                            cfg: AdaptiveLadmmConfig) -> AdaptiveLadmmSchedule:
    """Adaptive schedule: βₖ=γₖ=(k+1)γ, Pᵏ=(p/(k+1))·I, Qᵏ=(k+1)(Q−γCᵀC)+L_h·I."""
    return AdaptiveLadmmSchedule(cfg, problem.C)


def default_adaptive_config(problem: TwoBlockProblem, p: float = 0.0,
                            eta: float = 1.0, q: Optional[float] = None
                            ) -> AdaptiveLadmmConfig:
    """Config with q at the top of its window and γ = q/(η‖C‖₂²)."""
    mu = problem.mu_g + problem.mu_h
    if q is None:
        q = 0.5 * mu
    gamma = q / (eta * operator_norm(problem.C) ** 2)
    return AdaptiveLadmmConfig.create(
        problem, gamma, p, ScalingOperator.scaled_identity(q), eta)


# ---------------------------------------------------------------------------
# potential, certificates, bounds


def phi(k: int, cfg: AdaptiveLadmmConfig, state: LadmmState, ref_point,
        problem: TwoBlockProblem) -> float:
    """Potential φₖ(y,z,λ) of the adaptive analysis at the state's iterates.

    ((k+k₀)/2k)·p‖yᵏ−y‖² + ((k+k₀)/2)(k‖zᵏ−z‖²_Q + (L_h+μ_g)‖zᵏ−z‖²)
    + ((k+k₀)/2γk)‖λ−λᵏ‖² with (y,z,λ) = ref_point.
    """
    if k < 1:
        raise ValueError("phi requires k >= 1")
    y_ref, z_ref, lam_ref = ref_point
    k0 = cfg.k0
    dy = state.y - np.asarray(y_ref, dtype=float)
    dz = state.z - np.asarray(z_ref, dtype=float)
    dlam = np.asarray(lam_ref, dtype=float) - state.lam
    t_y = (k + k0) / (2.0 * k) * cfg.p * float(dy @ dy)
    t_z = (k + k0) / 2.0 * (k * cfg.Q.norm_sq(dz)
                            + (cfg.lips_h + cfg.mu_g) * float(dz @ dz))
    t_lam = (k + k0) / (2.0 * cfg.gamma * k) * float(dlam @ dlam)
    return t_y + t_z + t_lam


def check_one_iter_ladmm(prev: LadmmState, new: LadmmState, params: LadmmParams,
                         y_ref: np.ndarray, z_ref: np.ndarray, lam_test: np.ndarray,
                         problem: TwoBlockProblem) -> float:
    """Slack (RHS − LHS) of the two-block one-iteration inequality."""
    slack, _ = check_one_iter_ladmm_scaled(prev, new, params, y_ref, z_ref,
                                           lam_test, problem)
    return slack


def check_one_iter_ladmm_scaled(prev, new, params, y_ref, z_ref, lam_test, problem):
    y_ref = np.asarray(y_ref, dtype=float)
    z_ref = np.asarray(z_ref, dtype=float)
    lam_test = np.asarray(lam_test, dtype=float)
    feas = problem.feasibility(y_ref, z_ref)
    if feas > 1e-8 * (1.0 + float(np.linalg.norm(problem.b))):
        raise ValueError(f"(y,z) reference violates By+Cz=b (residual {feas:.3e})")
    beta, gamma = params.beta, params.gamma

    resid_new = problem.B.apply(new.y) + problem.C.apply(new.z) - problem.b
    lhs = (problem.objective(new.y, new.z) - problem.objective(y_ref, z_ref)
           - float(lam_test @ resid_new))

    dlam = prev.lam - new.lam
    dz_new = new.z - z_ref
    dz_old = prev.z - z_ref
    dz_step = new.z - prev.z
    dy_new = new.y - y_ref
    dy_step = new.y - prev.y
    c_dz_new = problem.C.apply(dz_new)
    c_dz_step = problem.C.apply(dz_step)

    t1 = -float((dlam / gamma) @ (lam_test - prev.lam + (beta / gamma) * dlam))
    t2 = beta * float((dlam / gamma - c_dz_new) @ c_dz_step)
    t3 = 0.5 * problem.lips_h * float(dz_step @ dz_step)
    t4 = -0.5 * problem.mu_h * float(dz_old @ dz_old)
    t5 = -0.5 * problem.mu_g * float(dz_new @ dz_new)
    t6 = -float(dy_new @ params.P.apply(dy_step))
    t7 = -float(dz_new @ params.Q.apply(dz_step))
    rhs = t1 + t2 + t3 + t4 + t5 + t6 + t7
    scale = max(1.0, abs(lhs) + abs(t1) + abs(t2) + abs(t3) + abs(t4)
                + abs(t5) + abs(t6) + abs(t7))
    return rhs - lhs, scale


def bounds_ladmm_adaptive(t: int, cfg: AdaptiveLadmmConfig, y1, z1, ystar, zstar,
                          lamstar, problem: TwoBlockProblem) -> dict:
    """Adaptive-schedule bounds at index t.

    z_Q_bound/z_dist_bound bound ‖zᵗ−z*‖²_Q and ‖zᵗ−z*‖²; obj_bound and
    feas_bound bound the weighted ergodic objective gap and feasibility
    (feas_bound None when λ* = 0).
    """
    if t < 1:
        raise ValueError("bounds require t >= 1")
    state1 = LadmmState(1, np.asarray(y1, dtype=float), np.asarray(z1, dtype=float),
                        np.zeros(problem.B.rows))
    lamstar = np.asarray(lamstar, dtype=float)
    phi1_star = phi(1, cfg, state1, (ystar, zstar, lamstar), problem)
    phi1_2star = phi(1, cfg, state1, (ystar, zstar, 2.0 * lamstar), problem)
    k0 = cfg.k0
    lam_norm = float(np.linalg.norm(lamstar))
    obj = 2.0 * phi1_2star / (t * (t + 2 * k0 + 3))
    return {
        "z_Q_bound": 2.0 * phi1_star / (t * (t + k0)),
        "z_dist_bound": 2.0 * phi1_star / ((t + k0) * (cfg.lips_h + cfg.mu_h + 2.0 * cfg.mu_g)),
        "obj_bound": obj,
        "feas_bound": obj / lam_norm if lam_norm > 0 else None,
    }


def bounds_ladmm_constant(t: int, gamma: float, P: ScalingOperator,
                          Q: ScalingOperator, C: LinearMap, y1, z1, ystar, zstar,
                          lamstar) -> tuple:
    """Constant-schedule ergodic bounds:
    (4‖λ*‖²/γ + ‖y¹−y*‖²_P + ‖z¹−z*‖²_{Q+CᵀC}) / (2t)."""
    if t < 1:
        raise ValueError("bounds require t >= 1")
    dy = np.asarray(y1, dtype=float) - np.asarray(ystar, dtype=float)
    dz = np.asarray(z1, dtype=float) - np.asarray(zstar, dtype=float)
    lam_norm = float(np.linalg.norm(lamstar))
    c_dz = C.apply(dz)
    num = (4.0 * lam_norm ** 2 / gamma + P.norm_sq(dy)
           + Q.norm_sq(dz) + float(c_dz @ c_dz))
    obj = num / (2.0 * t)
    return obj, (obj / lam_norm if lam_norm > 0 else None)


def prop1_margin(cfg: AdaptiveLadmmConfig, k_max: int = 10000) -> float:
    """Minimum eigenvalue margin of the telescoping matrix inequality.

    For k = 1..k_max checks (k+k₀)(kQ+(L_h+μ_g)I) ⪰ (k+k₀+1)((k+1)Q+(L_h−μ_h)I)
    via the certified upper spectral bound of Q; nonnegative return means
    every k is verified.
    """
    q_hi = cfg.Q.eigenvalue_bounds()[1]
    ks = np.arange(1, k_max + 1, dtype=float)
    k0 = float(cfg.k0)
    # difference = −(2k+k₀+1)·Q + c_k·I with the scalar below
    c_k = (ks + k0) * (cfg.lips_h + cfg.mu_g) - (ks + k0 + 1.0) * (cfg.lips_h - cfg.mu_h)
    margin = c_k - (2.0 * ks + k0 + 1.0) * q_hi
    return float(margin.min())


# ---------------------------------------------------------------------------
# driver


def run_ladmm(problem: TwoBlockProblem, schedule: LadmmSchedule, y1, z1,
              max_iter: int, opts: Optional[RunOptions] = None) -> RunRecord:
    """Run the method with certificate tracking.

    obj_err/feas evaluate the certificate iterate: the uniform ergodic
    average for constant schedules and the (k+k₀+1)-weighted ergodic
    average for the adaptive schedule. The phi column holds φₖ₊₁(y*,z*,λ*)
    along adaptive traces; extras carry last-iterate errors, the z-iterate
    distance bounds, and multiplier increments.
    """
    opts = opts or RunOptions()
    ref = problem.reference
    record = RunRecord("ladmm", schedule.kind,
                       {"problem": problem.name, "subtol": opts.subtol})
    state = LadmmState.initial(problem, y1, z1)
    if max_iter == 0:
        record.final.update(y=state.y, z=state.z, lam=state.lam)
        return record

    adaptive = schedule.kind == "adaptive"
    cfg = schedule.cfg if adaptive else None
    y_init, z_init = state.y, state.z
    y_sum = np.zeros_like(state.y)
    z_sum = np.zeros_like(state.z)
    yw_sum = np.zeros_like(state.y)
    zw_sum = np.zeros_like(state.z)
    w_sum = 0.0

    phi1_star = phi1_2star = const_bound_1 = None
    if ref is not None and opts.bounds:
        if adaptive:
            phi1_star = phi(1, cfg, state, (ref.ystar, ref.zstar, ref.lamstar), problem)
            phi1_2star = phi(1, cfg, state, (ref.ystar, ref.zstar, 2.0 * ref.lamstar),
                             problem)
        else:
            const_bound_1 = bounds_ladmm_constant(
                1, schedule.gamma, schedule.P, schedule.Q, problem.C,
                y_init, z_init, ref.ystar, ref.zstar, ref.lamstar)

    start = time.perf_counter()
    try:
        for t in range(1, max_iter + 1):
            params = schedule.params(state.k)
            new_state, info = ladmm_step(problem, state, params,
                                         subtol=opts.subtol, max_inner=opts.max_inner)

            y_sum += new_state.y
            z_sum += new_state.z
            y_erg, z_erg = y_sum / t, z_sum / t
            if adaptive:
                weight = t + cfg.k0 + 1.0
                yw_sum += weight * new_state.y
                zw_sum += weight * new_state.z
                w_sum += weight
                y_cert, z_cert = yw_sum / w_sum, zw_sum / w_sum
            else:
                y_cert, z_cert = y_erg, z_erg

            obj_err = feas = bound_obj = bound_feas = slack = phi_val = None
            extras = {}
            if ref is not None:
                obj_err = abs(problem.objective(y_cert, z_cert) - ref.fstar)
                feas = problem.feasibility(y_cert, z_cert)
                if opts.bounds:
                    if adaptive:
                        k0 = cfg.k0
                        bound_obj = 2.0 * phi1_2star / (t * (t + 2 * k0 + 3))
                        lam_norm = float(np.linalg.norm(ref.lamstar))
                        bound_feas = bound_obj / lam_norm if lam_norm > 0 else None
                        dz = new_state.z - ref.zstar
                        extras["z_Q_dist_sq"] = cfg.Q.norm_sq(dz)
                        extras["z_dist_sq"] = float(dz @ dz)
                        kz = t + 1  # new_state is the iterate with index t+1
                        extras["z_Q_bound"] = 2.0 * phi1_star / (kz * (kz + k0))
                        extras["z_dist_bound"] = 2.0 * phi1_star / (
                            (kz + k0) * (cfg.lips_h + cfg.mu_h + 2.0 * cfg.mu_g))
                    else:
                        bound_obj = const_bound_1[0] / t
                        bound_feas = (None if const_bound_1[1] is None
                                      else const_bound_1[1] / t)
                if adaptive:
                    phi_val = phi(t + 1, cfg, new_state,
                                  (ref.ystar, ref.zstar, ref.lamstar), problem)
                if opts.checks:
                    raw, scale = check_one_iter_ladmm_scaled(
                        state, new_state, params, ref.ystar, ref.zstar,
                        ref.lamstar, problem)
                    slack = raw / scale
                if opts.track_extras:
                    extras["obj_err_last"] = abs(
                        problem.objective(new_state.y, new_state.z) - ref.fstar)
                    extras["feas_last"] = problem.feasibility(new_state.y, new_state.z)
                    if problem.outer_objective is not None:
                        extras["outer_obj_err"] = abs(
                            problem.outer_objective(new_state.z) - ref.fstar)
            if opts.track_extras:
                dlam = new_state.lam - state.lam
                extras["dlam_sq"] = float(dlam @ dlam)
                extras["inner_resid_y"] = info["y"]["residual"]
                extras["inner_resid_z"] = info["z"]["residual"]

            record.append(t, obj_err=obj_err, feas=feas, bound_obj=bound_obj,
                          bound_feas=bound_feas, ineq_slack=slack, phi=phi_val,
                          wall_time_s=time.perf_counter() - start, **extras)
            state = new_state
    except InnerSolveError as err:
        record.final.update(y=state.y, z=state.z, lam=state.lam)
        raise SolverError(f"ladmm inner solve failed at iteration {len(record)+1}: {err}",
                          record) from err

    record.final.update(y=state.y, z=state.z, lam=state.lam,
                        y_ergodic=y_sum / max_iter, z_ergodic=z_sum / max_iter)
    if adaptive and w_sum > 0:
        record.final.update(y_weighted=yw_sum / w_sum, z_weighted=zw_sum / w_sum)
    return record
