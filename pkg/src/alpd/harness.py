"""Metrics, KKT residuals, bound auditing, rate fitting, reference solving,
and experiment configuration."""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import baselines, problems
from .functions import QuadraticSmooth, ZeroProx
from .lalm import (CompositeProblem, LalmState, Reference, lalm_step,
                   run_lalm, schedule_lalm_adaptive, schedule_lalm_constant)
from .ladmm import (AdaptiveLadmmConfig, LadmmState, TwoBlockProblem,
                    TwoBlockReference, default_adaptive_config, ladmm_step,
                    run_ladmm, schedule_ladmm_adaptive, schedule_ladmm_constant)
from .operators import ScaledIdentityMap, ScalingOperator, operator_norm
from .record import RunOptions, RunRecord, SolverError


# ---------------------------------------------------------------------------
# KKT residuals


def kkt_residual(problem: CompositeProblem, x: np.ndarray, lam: np.ndarray):
    """(primal, dual) residual pair; both vanish exactly at KKT points.

    primal = ‖Ax−b‖; dual is the unit-step prox-gradient stationarity
    residual ‖x − prox_g(x − (∇f(x) − Aᵀλ), 1)‖.
    """
    x = np.asarray(x, dtype=float)
    lam = np.asarray(lam, dtype=float)
    primal = float(np.linalg.norm(problem.A.apply(x) - problem.b))
    grad = problem.f.gradient(x) - problem.A.adjoint_apply(lam)
    dual = float(np.linalg.norm(x - problem.g.prox(x - grad, 1.0)))
    return primal, dual


def kkt_residual_two_block(problem: TwoBlockProblem, y, z, lam):
    """(primal, dual) for the two-block problem; dual aggregates both blocks."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    lam = np.asarray(lam, dtype=float)
    primal = problem.feasibility(y, z)
    dual_y = float(np.linalg.norm(
        y - problem.f.prox(y + problem.B.adjoint_apply(lam), 1.0)))
    grad_z = problem.h.gradient(z) - problem.C.adjoint_apply(lam)
    dual_z = float(np.linalg.norm(z - problem.g.prox(z - grad_z, 1.0)))
    return primal, math.hypot(dual_y, dual_z)


# ---------------------------------------------------------------------------
# bound conversion (dual-gap function -> objective/feasibility bound)


def bound_convert(phi_fn: Callable[[np.ndarray], float], rho: float, dim: int,
                  lam_star_norm: Optional[float] = None) -> float:
    """sup over ‖λ‖ ≤ rho of an isotropic quadratic dual-gap bound φ(λ).

    φ must have the form a + bᵀλ + c‖λ‖² (the shape every rate theorem
    produces); the supremum a + ρ‖b‖ + cρ² is attained on the boundary.
    When ``lam_star_norm`` is given, enforces ρ > ‖λ*‖ so the conversion
    into separate objective and feasibility bounds is valid.
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if lam_star_norm is not None and rho <= lam_star_norm:
        raise ValueError("rho must exceed ‖λ*‖ for the bound split")
    a = float(phi_fn(np.zeros(dim)))
    b = np.zeros(dim)
    c_vals = np.zeros(dim)
    eye = np.eye(dim)
    for i in range(dim):
        up = float(phi_fn(eye[i]))
        dn = float(phi_fn(-eye[i]))
        b[i] = 0.5 * (up - dn)
        c_vals[i] = 0.5 * (up + dn) - a
    scale = max(1.0, abs(a), float(np.max(np.abs(c_vals))))
    if float(np.max(c_vals) - np.min(c_vals)) > 1e-8 * scale:
        raise ValueError("phi is not an isotropic quadratic in λ")
    c = float(np.mean(c_vals))
    if c < -1e-10 * scale:
        raise ValueError("phi has concave λ-dependence; supremum is not on the ball")
    probe = np.full(dim, 1.0 / math.sqrt(dim))
    model = a + float(b @ probe) + c
    if abs(float(phi_fn(probe)) - model) > 1e-8 * max(scale, abs(model)):
        raise ValueError("phi is not an isotropic quadratic in λ")
    return a + rho * float(np.linalg.norm(b)) + max(c, 0.0) * rho * rho


# ---------------------------------------------------------------------------
# empirical rate fitting


def rate_fit(record: RunRecord, k_lo: int, k_hi: int, field: str) -> float:
    """Least-squares slope of log(field) vs log(k) over k in [k_lo, k_hi]."""
    ks = np.asarray(record.k, dtype=float)
    vals = record.column_array(field)
    mask = (ks >= k_lo) & (ks <= k_hi)
    if not mask.any():
        raise ValueError("empty k range")
    ks, vals = ks[mask], vals[mask]
    if np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise ValueError(
            f"nonpositive or missing {field} values in [{k_lo}, {k_hi}] "
            "(machine-precision floor?); shrink the range")
    slope = np.polyfit(np.log(ks), np.log(vals), 1)[0]
    return float(slope)


# ---------------------------------------------------------------------------
# oracles and reference solutions


def nonneg_qp_enumerate(Q: np.ndarray, c: np.ndarray, A: np.ndarray, b: np.ndarray,
                        tol: float = 1e-9):
    """Exact solution of min (1/2)xᵀQx+cᵀx s.t. Ax=b, x≥0 by active-set enumeration.

    Tries every free/active sign pattern (2ⁿ of them, so n ≤ 16) and keeps
    the KKT-consistent candidate with the smallest objective. Returns
    (x, λ, objective).
    """
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = Q.shape[0]
    m = A.shape[0]
    if n > 16:
        raise ValueError("enumeration oracle is for tiny instances (n <= 16)")
    best = None
    for r in range(n + 1):
        for free in itertools.combinations(range(n), r):
            free = list(free)
            nf = len(free)
            sys_mat = np.zeros((nf + m, nf + m))
            sys_mat[:nf, :nf] = Q[np.ix_(free, free)]
            sys_mat[:nf, nf:] = -A[:, free].T
            sys_mat[nf:, :nf] = A[:, free]
            rhs = np.concatenate([-c[free], b])
            sol, *_ = np.linalg.lstsq(sys_mat, rhs, rcond=None)
            x = np.zeros(n)
            x[free] = sol[:nf]
            lam = sol[nf:]
            if np.linalg.norm(A @ x - b) > tol * (1.0 + np.linalg.norm(b)):
                continue
            if nf and np.min(x[free]) < -tol:
                continue
            slack = Q @ x + c - A.T @ lam
            if np.linalg.norm(slack[free]) > tol * (1.0 + np.linalg.norm(c)):
                continue
            fixed = [i for i in range(n) if i not in free]
            if fixed and np.min(slack[fixed]) < -tol:
                continue
            obj = 0.5 * float(x @ (Q @ x)) + float(c @ x)
            if best is None or obj < best[2]:
                best = (np.maximum(x, 0.0), lam, obj)
    if best is None:
        raise ValueError("no KKT-consistent sign pattern found (infeasible problem?)")
    return best


def _lift_y(problem: TwoBlockProblem, z: np.ndarray) -> Optional[np.ndarray]:
    # exact y completing feasibility when the y block enters through s·I
    if isinstance(problem.B, ScaledIdentityMap) and problem.B.scale != 0:
        return (problem.b - problem.C.apply(z)) / problem.B.scale
    return None


def reference_solve(problem, tol: float = 1e-10, cache_dir=None,
                    max_outer: int = 400000):
    """High-accuracy (x*, λ*, F*) reference for a problem.

    Quadratic equality-constrained problems are solved by the dense KKT
    system, tiny nonnegative QPs by active-set enumeration, and everything
    else by a long run of the best-performing configured solver until the
    KKT residual drops below ``tol``. Results are cached to disk keyed by
    the instance name and tolerance.
    """
    cached = _cache_load(problem, tol, cache_dir)
    if cached is not None:
        return cached
    if isinstance(problem, CompositeProblem):
        ref = _reference_composite(problem, tol, max_outer)
    elif isinstance(problem, TwoBlockProblem):
        ref = _reference_two_block(problem, tol, max_outer)
    else:
        raise TypeError(f"no reference strategy for {type(problem).__name__}")
    _cache_store(problem, tol, cache_dir, ref)
    return ref


def _reference_composite(problem: CompositeProblem, tol: float, max_outer: int):
    f, g, A = problem.f, problem.g, problem.A
    if isinstance(g, ZeroProx) and isinstance(f, QuadraticSmooth) \
            and A.explicit_matrix is not None:
        a_mat = A.explicit_matrix
        n, m = A.cols, A.rows
        kkt = np.zeros((n + m, n + m))
        kkt[:n, :n] = f.Q
        kkt[:n, n:] = -a_mat.T
        kkt[n:, :n] = a_mat
        sol = np.linalg.solve(kkt, np.concatenate([-f.c, problem.b]))
        x, lam = sol[:n], sol[n:]
        return Reference(x, lam, problem.objective(x))
    if isinstance(f, QuadraticSmooth) and A.explicit_matrix is not None \
            and problem.dim <= 12 and not isinstance(g, ZeroProx):
        x, lam, obj = nonneg_qp_enumerate(f.Q, f.c, A.explicit_matrix, problem.b)
        return Reference(x, lam, obj)

    # restarted adaptive run, finished by an exact reduced KKT solve once the
    # active set has settled; the polish is verified by the full KKT residual
    sched = schedule_lalm_adaptive(problem, gamma=float(A.rows),
                                   eta=2.0 * f.lipschitz)
    state = LalmState.initial(problem, problem.g.prox(np.zeros(problem.dim), 1.0))
    subtol = max(1e-10, tol * 1e-1)
    restart_every = 50
    for t in range(1, max_outer + 1):
        state, _ = lalm_step(problem, state, sched.params(state.k),
                             subtol=subtol, max_inner=500000)
        if t % restart_every == 0:
            state = LalmState(1, state.x, state.x, state.lam)
        if t % 100 == 0:
            if isinstance(f, QuadraticSmooth) and A.explicit_matrix is not None:
                polished = _polish_nonneg(problem, state.x, tol)
                if polished is not None:
                    return polished
            primal, dual = kkt_residual(problem, state.x, state.lam)
            if primal <= tol and dual <= tol:
                return Reference(state.x, state.lam, problem.objective(state.x))
    raise SolverError(f"reference solve did not reach tol {tol:g} in {max_outer} iterations")


def _polish_nonneg(problem: CompositeProblem, x: np.ndarray, tol: float):
    """Exact finish of a nonnegative QP from a near-solution iterate.

    Fixes the apparent active set, solves the reduced equality-constrained
    KKT system densely, and accepts only if the full KKT conditions hold
    at ``tol``.
    """
    Q, c = problem.f.Q, problem.f.c
    A = problem.A.explicit_matrix
    b = problem.b
    thresh = 1e-7 * max(1.0, float(np.max(np.abs(x))))
    free = np.nonzero(x > thresh)[0]
    if free.size < A.shape[0]:
        return None
    nf = free.size
    sys_mat = np.zeros((nf + A.shape[0], nf + A.shape[0]))
    sys_mat[:nf, :nf] = Q[np.ix_(free, free)]
    sys_mat[:nf, nf:] = -A[:, free].T
    sys_mat[nf:, :nf] = A[:, free]
    try:
        sol = np.linalg.solve(sys_mat, np.concatenate([-c[free], b]))
    except np.linalg.LinAlgError:
        return None
    xs = np.zeros_like(x)
    xs[free] = sol[:nf]
    lam = sol[nf:]
    if free.size and float(np.min(xs[free])) < 0.0:
        return None
    slack = Q @ xs + c - A.T @ lam
    fixed = np.setdiff1d(np.arange(x.shape[0]), free)
    if fixed.size and float(np.min(slack[fixed])) < -tol:
        return None
    primal, dual = kkt_residual(problem, xs, lam)
    if primal <= tol and dual <= tol:
        return Reference(xs, lam, problem.objective(xs))
    return None


def _reference_two_block(problem: TwoBlockProblem, tol: float, max_outer: int):
    from .functions import QuadraticProx, SquaredDistance, ZeroSmooth

    quad_like = (QuadraticProx, SquaredDistance)
    if isinstance(problem.f, quad_like) and isinstance(problem.g, quad_like) \
            and problem.B.explicit_matrix is not None \
            and problem.C.explicit_matrix is not None \
            and isinstance(problem.h, (QuadraticSmooth, ZeroSmooth)):
        return _reference_two_block_dense(problem)

    if problem.mu_g + problem.mu_h <= 0:
        raise SolverError("iterative two-block reference needs mu_g + mu_h > 0")
    cfg = _natural_adaptive_config(problem)
    sched = schedule_ladmm_adaptive(problem, cfg)
    y, z = _default_two_block_start(problem)
    state = LadmmState.initial(problem, y, z)
    for t in range(1, max_outer + 1):
        state, _ = ladmm_step(problem, state, sched.params(state.k), subtol=1e-12)
        if t % 100 == 0:
            primal, dual = kkt_residual_two_block(problem, state.y, state.z, state.lam)
            if primal <= tol and dual <= tol:
                break
    else:
        raise SolverError(f"reference solve did not reach tol {tol:g} in {max_outer} iterations")
    z = state.z
    y = _lift_y(problem, z)
    if y is None:
        y = state.y
    fstar = (problem.outer_objective(z) if problem.outer_objective is not None
             else problem.objective(y, z))
    return TwoBlockReference(y, z, state.lam, fstar)


def _reference_two_block_dense(problem: TwoBlockProblem):
    from .functions import QuadraticProx, SquaredDistance, ZeroSmooth

    def quad_parts(fn, n):
        if isinstance(fn, QuadraticProx):
            return fn.H, fn.c
        if isinstance(fn, SquaredDistance):
            return np.eye(n), -fn.target
        raise TypeError

    B = problem.B.explicit_matrix
    C = problem.C.explicit_matrix
    n_y, n_z, m = B.shape[1], C.shape[1], B.shape[0]
    Qf, cf = quad_parts(problem.f, n_y)
    Qg, cg = quad_parts(problem.g, n_z)
    if isinstance(problem.h, ZeroSmooth):
        Qh, ch = np.zeros((n_z, n_z)), np.zeros(n_z)
    else:
        Qh, ch = problem.h.Q, problem.h.c
    dim = n_y + n_z + m
    kkt = np.zeros((dim, dim))
    kkt[:n_y, :n_y] = Qf
    kkt[:n_y, n_y + n_z:] = -B.T
    kkt[n_y:n_y + n_z, n_y:n_y + n_z] = Qg + Qh
    kkt[n_y:n_y + n_z, n_y + n_z:] = -C.T
    kkt[n_y + n_z:, :n_y] = B
    kkt[n_y + n_z:, n_y:n_y + n_z] = C
    sol = np.linalg.solve(kkt, np.concatenate([-cf, -(cg + ch), problem.b]))
    y, z, lam = sol[:n_y], sol[n_y:n_y + n_z], sol[n_y + n_z:]
    return TwoBlockReference(y, z, lam, problem.objective(y, z))


def _natural_adaptive_config(problem: TwoBlockProblem) -> AdaptiveLadmmConfig:
    from .problems import PeriodicDiffMap

    if isinstance(problem.C, PeriodicDiffMap):
        # plain adaptive ADMM (Q = γCᵀC cancels nothing; FFT handles the z step)
        gamma = 1.0 / (2.0 * problem.C.gram_norm_sq())
        return AdaptiveLadmmConfig.create(
            problem, gamma, 0.0, ScalingOperator.gram(gamma, problem.C), 1.0)
    mu = problem.mu_g + problem.mu_h
    q = 0.05 * mu  # mirrors the linearized q = mu_g/20 experiment setting
    gamma = q / operator_norm(problem.C) ** 2
    return AdaptiveLadmmConfig.create(
        problem, gamma, 0.0, ScalingOperator.scaled_identity(q), 1.0)


def _default_two_block_start(problem: TwoBlockProblem):
    z = np.zeros(problem.C.cols)
    y = _lift_y(problem, z)
    if y is None:
        y = np.zeros(problem.B.cols)
    return y, z


def ensure_reference(problem, tol: float = 1e-10, cache_dir=None):
    """Attach a reference to the problem if it does not already have one."""
    if problem.reference is None:
        problem.reference = reference_solve(problem, tol=tol, cache_dir=cache_dir)
    return problem


def _cache_path(problem, tol, cache_dir) -> Optional[Path]:
    if cache_dir is None or not problem.name:
        return None
    key = re.sub(r"[^A-Za-z0-9_.=-]+", "_", problem.name)
    return Path(cache_dir) / f"ref_{key}_tol{tol:g}.json"


def _cache_load(problem, tol, cache_dir):
    path = _cache_path(problem, tol, cache_dir)
    if path is None or not path.exists():
        return None
    data = json.loads(path.read_text())
    if data.get("kind") == "composite":
        return Reference(np.array(data["xstar"]), np.array(data["lamstar"]),
                         float(data["fstar"]))
    return TwoBlockReference(np.array(data["ystar"]), np.array(data["zstar"]),
                             np.array(data["lamstar"]), float(data["fstar"]))


def _cache_store(problem, tol, cache_dir, ref) -> None:
    path = _cache_path(problem, tol, cache_dir)
    if path is None:
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(ref, Reference):
        payload = {"kind": "composite", "name": problem.name, "tol": tol,
                   "xstar": ref.xstar, "lamstar": ref.lamstar, "fstar": ref.fstar}
    else:
        payload = {"kind": "two_block", "name": problem.name, "tol": tol,
                   "ystar": ref.ystar, "zstar": ref.zstar,
                   "lamstar": ref.lamstar, "fstar": ref.fstar}
    problems.dump_structured(payload, path)


# ---------------------------------------------------------------------------
# trace audit


def audit_record(record: RunRecord, bound_slack: float = 1e-8,
                 slack_floor: float = -1e-8, phi_rel: float = 1e-9) -> list:
    """Re-run the certificate checks a trace encodes; returns violations."""
    out = []
    ks = record.k
    for i in range(1, len(ks)):
        if ks[i] <= ks[i - 1]:
            out.append(f"row {i}: iteration index not increasing")
        if record.wall_time_s[i] < record.wall_time_s[i - 1]:
            out.append(f"row {i}: wall time decreased")
    prev_phi = None
    for i in range(len(ks)):
        obj, feas = record.obj_err[i], record.feas[i]
        b_obj, b_feas = record.bound_obj[i], record.bound_feas[i]
        if obj is not None and b_obj is not None and obj > b_obj + bound_slack:
            out.append(f"k={ks[i]}: objective bound violated ({obj:.3e} > {b_obj:.3e})")
        if feas is not None and b_feas is not None and feas > b_feas + bound_slack:
            out.append(f"k={ks[i]}: feasibility bound violated ({feas:.3e} > {b_feas:.3e})")
        s = record.ineq_slack[i]
        if s is not None and s < slack_floor:
            out.append(f"k={ks[i]}: one-iteration inequality violated (slack {s:.3e})")
        p = record.phi[i]
        if p is not None:
            if prev_phi is not None and p > prev_phi + phi_rel * max(1.0, prev_phi):
                out.append(f"k={ks[i]}: phi increased ({prev_phi:.6e} -> {p:.6e})")
            prev_phi = p
    return out


# ---------------------------------------------------------------------------
# experiment configuration and runner


@dataclass
class ExperimentConfig:
    """Mirror of the JSON experiment description.

    problem: {"family", "params", "seed"}; solver: {"algorithm",
    "schedule", "overrides"}; run: {"max_iter", "subtol", "restart_every",
    "checks"}; output: {"dir", "stem"}.
    """

    problem: dict
    solver: dict
    run: dict
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        missing = {"problem", "solver", "run"} - set(data)
        if missing:
            raise ValueError(f"config missing sections: {sorted(missing)}")
        return cls(problem=dict(data["problem"]), solver=dict(data["solver"]),
                   run=dict(data["run"]), output=dict(data.get("output", {})))

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {"problem": self.problem, "solver": self.solver,
                "run": self.run, "output": self.output}


def build_problem(config: ExperimentConfig):
    """Instantiate the configured problem; returns (problem, aux)."""
    family = config.problem.get("family")
    params = dict(config.problem.get("params", {}))
    seed = int(config.problem.get("seed", 0))
    aux = {}
    if family == "ecqp":
        prob = problems.gen_ecqp(params.get("m", 20), params.get("n", 500), seed)
    elif family == "nnqp":
        prob = problems.gen_nnqp(params.get("m", 50), params.get("n", 1000), seed,
                                 params.get("dist", "gaussian"))
    elif family == "two_block_qp":
        prob = problems.gen_two_block_qp(params.get("n_y", 50), params.get("n_z", 50),
                                         params.get("m", 10), seed,
                                         params.get("with_h", True))
    elif family == "tv":
        n = params.get("n", 64)
        clean = problems.synth_image(n)
        noisy = problems.add_noise(clean, params.get("noise", 0.1), seed)
        prob = problems.tv_problem(noisy, params.get("mu", 0.04))
        prob.name += f"[n={n},noise={params.get('noise', 0.1)},seed={seed}]"
        aux = {"clean": clean, "noisy": noisy}
    elif family == "svm":
        prob, dataset = problems.gen_svm(params.get("m", 100), params.get("p", 500),
                                         params.get("s", 50), params.get("rho", 0.5),
                                         seed, params.get("mu1", 0.01),
                                         params.get("mu2", 0.01))
        aux = {"dataset": dataset}
    else:
        raise ValueError(f"unknown problem family {family!r}")
    return prob, aux


def _tv_schedule(problem: TwoBlockProblem, variant: str):
    d_norm_sq = problem.C.gram_norm_sq()
    if variant == "nonacc_admm":
        return schedule_ladmm_constant(problem, 10.0,
                                       ScalingOperator.scaled_identity(0.0),
                                       ScalingOperator.scaled_identity(0.0))
    if variant == "acc_admm":
        gamma = 1.0 / (2.0 * d_norm_sq)
        cfg = AdaptiveLadmmConfig.create(
            problem, gamma, 0.0, ScalingOperator.gram(gamma, problem.C), 1.0)
        return schedule_ladmm_adaptive(problem, cfg)
    if variant == "nonacc_ladmm":
        gamma = 1.0 / (2.0 * d_norm_sq)
        Q = ScalingOperator.identity_minus_gram(0.5, gamma, problem.C)
        return schedule_ladmm_constant(problem, gamma,
                                       ScalingOperator.scaled_identity(0.0), Q)
    if variant == "acc_ladmm":
        gamma = 1.0 / (20.0 * d_norm_sq)
        cfg = AdaptiveLadmmConfig.create(
            problem, gamma, 0.0, ScalingOperator.scaled_identity(1.0 / 20.0), 1.0)
        return schedule_ladmm_adaptive(problem, cfg)
    raise ValueError(f"unknown tv variant {variant!r}")


def _svm_schedule(problem: TwoBlockProblem, variant: str, mu2: float):
    bs_norm_sq = operator_norm(problem.C) ** 2
    if variant == "nonacc_ladmm":
        gamma = 1.0 / (2.0 * bs_norm_sq)
        Q = ScalingOperator.identity_minus_gram(0.5, gamma, problem.C)
        return schedule_ladmm_constant(problem, gamma,
                                       ScalingOperator.scaled_identity(0.0), Q)
    if variant == "acc_ladmm":
        gamma = mu2 / (20.0 * bs_norm_sq)
        cfg = AdaptiveLadmmConfig.create(
            problem, gamma, 0.0, ScalingOperator.scaled_identity(mu2 / 20.0), 1.0)
        return schedule_ladmm_adaptive(problem, cfg)
    raise ValueError(f"unknown svm variant {variant!r}")


def _run_configured(config: ExperimentConfig, problem, aux) -> RunRecord:
    algo = config.solver.get("algorithm")
    kind = config.solver.get("schedule", "adaptive")
    over = dict(config.solver.get("overrides", {}))
    run = config.run
    opts = RunOptions(subtol=float(run.get("subtol", 1e-10)),
                      max_inner=int(run.get("max_inner", 200000)),
                      restart_every=run.get("restart_every"),
                      checks=bool(run.get("checks", True)),
                      bounds=bool(run.get("bounds", True)))
    max_iter = int(run.get("max_iter", 1000))

    if algo == "lalm":
        m = problem.A.rows
        if kind == "constant":
            beta = float(over.get("beta", m))
            gamma = float(over.get("gamma", m))
            eta = float(over.get("eta", (1.0 + 1e-6) * problem.f.lipschitz))
            sched = schedule_lalm_constant(problem, beta, gamma, eta,
                                           bool(over.get("linearize_aug", False)))
        else:
            gamma = float(over.get("gamma", m))
            eta = float(over.get("eta", 2.0 * problem.f.lipschitz))
            sched = schedule_lalm_adaptive(problem, gamma, eta)
        x1 = np.asarray(over.get("x1", np.zeros(problem.dim)), dtype=float)
        return run_lalm(problem, sched, x1, max_iter, opts)

    if algo == "ladmm":
        family = config.problem.get("family")
        variant = over.get("variant")
        if family == "tv":
            sched = _tv_schedule(problem, variant or
                                 ("acc_admm" if kind == "adaptive" else "nonacc_admm"))
            z1 = problem.g.target.copy()          # start from the noisy image
            y1 = problem.C.apply(z1)
        elif family == "svm":
            mu2 = float(config.problem.get("params", {}).get("mu2", 0.01))
            sched = _svm_schedule(problem, variant or
                                  ("acc_ladmm" if kind == "adaptive" else "nonacc_ladmm"),
                                  mu2)
            z1 = np.zeros(problem.C.cols)
            y1 = problem.b - problem.C.apply(z1)
        else:
            if kind == "adaptive":
                cfg = default_adaptive_config(problem, p=float(over.get("p", 1.0)),
                                              eta=float(over.get("eta", 1.25)))
                sched = schedule_ladmm_adaptive(problem, cfg)
            else:
                gamma = float(over.get("gamma", 1.0 / operator_norm(problem.C)))
                Q = ScalingOperator.identity_minus_gram(
                    problem.lips_h + gamma * operator_norm(problem.C) ** 2,
                    gamma, problem.C)
                sched = schedule_ladmm_constant(
                    problem, gamma, ScalingOperator.scaled_identity(0.0), Q)
            y1 = np.asarray(over.get("y1", np.zeros(problem.B.cols)), dtype=float)
            z1 = np.asarray(over.get("z1", np.zeros(problem.C.cols)), dtype=float)
        return run_ladmm(problem, sched, y1, z1, max_iter, opts)

    if algo == "fista":
        L = float(over.get("L", problem.f.lipschitz))
        return baselines.fista(problem, L, run.get("restart_every"),
                               opts.subtol, max_iter, max_inner=opts.max_inner)

    if algo == "chambolle_pock":
        noisy = aux["noisy"]
        mu = float(config.problem.get("params", {}).get("mu", 0.04))
        ref_obj = problem.reference.fstar if problem.reference else None
        return baselines.chambolle_pock_tv(noisy, mu, max_iter=max_iter,
                                           ref_obj=ref_obj)

    raise ValueError(f"unknown algorithm {algo!r}")


def run_experiment(config: ExperimentConfig, write_files: bool = True):
    """Build, reference, run, and persist one configured experiment.

    Returns (record, summary). On solver failure the partial trace is
    still flushed and the failure recorded in the summary, then the
    SolverError is re-raised for the caller to map to an exit status.
    """
    problem, aux = build_problem(config)
    out_dir = Path(config.output.get("dir", "runs"))
    stem = config.output.get("stem") or re.sub(r"[^A-Za-z0-9_.=-]+", "_",
                                               f"{problem.name}_{config.solver.get('algorithm')}"
                                               f"_{config.solver.get('schedule', '')}")
    ref_tol = float(config.run.get("reference_tol", 1e-9))
    if problem.reference is None and config.run.get("reference", True):
        ensure_reference(problem, tol=ref_tol,
                         cache_dir=config.output.get("cache_dir", out_dir / "refs"))

    summary = {"config": config.to_dict(), "problem": problem.name, "status": "ok"}
    record = None
    try:
        record = _run_configured(config, problem, aux)
    except SolverError as err:
        record = err.record
        summary["status"] = "solver_error"
        summary["error"] = str(err)
    except ValueError as err:
        summary["status"] = "config_error"
        summary["error"] = str(err)

    if record is not None and len(record) > 0:
        summary["iterations"] = len(record)
        summary["wall_time_s"] = record.total_time
        for col in ("obj_err", "feas"):
            val = record.column(col)[-1]
            if val is not None:
                summary[f"final_{col}"] = val
        if "clean" in aux and "X" in record.final:
            summary["psnr_noisy"] = problems.psnr(aux["noisy"], aux["clean"])
            summary["psnr_denoised"] = problems.psnr(record.final["X"], aux["clean"])
        elif "clean" in aux and "z" in record.final:
            n = aux["clean"].shape[0]
            summary["psnr_noisy"] = problems.psnr(aux["noisy"], aux["clean"])
            summary["psnr_denoised"] = problems.psnr(
                record.final["z"].reshape(n, n), aux["clean"])

    if write_files:
        out_dir.mkdir(parents=True, exist_ok=True)
        if record is not None:
            trace_path = out_dir / f"{stem}.csv"
            record.to_csv(trace_path)
            summary["trace"] = str(trace_path)
        summary_path = out_dir / f"{stem}.json"
        summary_path.write_text(json.dumps(summary, indent=2, default=float))
        summary["summary"] = str(summary_path)

    if summary["status"] == "solver_error":
        raise SolverError(summary["error"], record)
    if summary["status"] == "config_error":
        raise ValueError(summary["error"])
    return record, summary
