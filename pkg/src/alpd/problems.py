"""Seeded experiment-instance generators, the periodic difference operator,
its DFT-diagonalized quadratic solver, and instance/image serialization.

Every generator is a pure function of its arguments including the seed:
the same call produces a bit-identical instance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .functions import (ElasticNet, HingeSum, L1Norm, NonnegIndicator,
                        QuadraticProx, QuadraticSmooth, SquaredDistance,
                        ZeroProx, ZeroSmooth)
from .operators import DenseMap, LinearMap, ScaledIdentityMap
from .rng import stream


# ---------------------------------------------------------------------------
# periodic finite differences and the DFT solver


class PeriodicDiffMap(LinearMap):
    """Forward differences with wraparound on an h×w grid.

    Maps a flattened image to the stacked horizontal then vertical
    differences (each h·w long); the adjoint is the negative periodic
    divergence. The Gram operator DᵀD is diagonalized by the 2-D DFT with
    symbol 4sin²(πi/h) + 4sin²(πj/w).
    """

    def __init__(self, height: int, width: int):
        if height < 2 or width < 2:
            raise ValueError("periodic differences need at least a 2x2 grid")
        super().__init__(2 * height * width, height * width)
        self.height = int(height)
        self.width = int(width)
        i = np.arange(self.height)
        j = np.arange(self.width)
        self._symbol = (4.0 * np.sin(np.pi * i / self.height)[:, None] ** 2
                        + 4.0 * np.sin(np.pi * j / self.width)[None, :] ** 2)

    def _forward(self, v):
        x = v.reshape(self.height, self.width)
        dh = np.roll(x, -1, axis=1) - x
        dv = np.roll(x, -1, axis=0) - x
        return np.concatenate([dh.ravel(), dv.ravel()])

    def _adjoint(self, v):
        n = self.height * self.width
        yh = v[:n].reshape(self.height, self.width)
        yv = v[n:].reshape(self.height, self.width)
        out = (np.roll(yh, 1, axis=1) - yh) + (np.roll(yv, 1, axis=0) - yv)
        return out.ravel()

    def gram_symbol(self) -> np.ndarray:
        return self._symbol

    def gram_norm_sq(self) -> float:
        """Exact ‖D‖₂² = max of the Gram symbol (8 on even grids)."""
        return float(self._symbol.max())

    def solve_shifted_gram(self, coef_identity: float, coef_gram: float,
                           rhs: np.ndarray) -> np.ndarray:
        """Solve (coef_identity·I + coef_gram·DᵀD) x = rhs exactly via FFT2."""
        r = rhs.reshape(self.height, self.width)
        denom = coef_identity + coef_gram * self._symbol
        return (np.fft.ifft2(np.fft.fft2(r) / denom).real).ravel()


def diff_op_periodic(height: int, width: int) -> PeriodicDiffMap:
    return PeriodicDiffMap(height, width)


def dft_quadratic_solve(rhs: np.ndarray, beta: float, q: float) -> np.ndarray:
    """Solve ((1+q)·I + beta·DᵀD) X = rhs on rhs's grid, periodic BC."""
    if beta < 0 or q < 0:
        raise ValueError("dft_quadratic_solve: beta and q must be nonnegative")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.ndim != 2:
        raise ValueError("dft_quadratic_solve expects a 2-D image")
    op = PeriodicDiffMap(*rhs.shape)
    return op.solve_shifted_gram(1.0 + q, beta, rhs.ravel()).reshape(rhs.shape)


# ---------------------------------------------------------------------------
# images


def synth_image(n: int) -> np.ndarray:
    """Deterministic piecewise-constant n×n scene (rectangles plus a disk)."""
    if n < 4:
        raise ValueError("synthetic scene needs n >= 4")
    img = np.full((n, n), 0.2)
    img[int(0.15 * n):int(0.45 * n), int(0.10 * n):int(0.50 * n)] = 0.8
    img[int(0.55 * n):int(0.90 * n), int(0.20 * n):int(0.45 * n)] = 0.5
    ii, jj = np.mgrid[0:n, 0:n]
    disk = (ii - 0.30 * n) ** 2 + (jj - 0.75 * n) ** 2 <= (0.18 * n) ** 2
    img[disk] = 1.0
    img[int(0.70 * n):int(0.85 * n), int(0.60 * n):int(0.95 * n)] = 0.0
    return img


def add_noise(image: np.ndarray, level: float, seed: int) -> np.ndarray:
    """Add i.i.d. Gaussian noise with sigma = level (peak intensity 1), clipped to [0,1]."""
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    image = np.asarray(image, dtype=float)
    if level == 0:
        return image.copy()
    noise = stream(seed, "image-noise").normal(size=image.shape)
    return np.clip(image + level * noise, 0.0, 1.0)


def psnr(x: np.ndarray, ref: np.ndarray) -> float:
    """10·log10(1/MSE) with peak intensity 1; +inf for identical images."""
    x = np.asarray(x, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if x.shape != ref.shape:
        raise ValueError("psnr: images must have identical shapes")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


# ---------------------------------------------------------------------------
# quadratic programming instances


def gen_ecqp(m: int, n: int, seed: int):
    """Equality-constrained QP: min (1/2)xᵀQx + cᵀx s.t. Ax=b.

    Q = GᵀG + 1e-2·I with Gaussian G (certified positive definite), A, b, c
    standard Gaussian. The exact primal-dual solution from the dense KKT
    system is attached as the reference.
    """
    from .lalm import CompositeProblem, Reference

    if m >= n:
        raise ValueError("gen_ecqp requires m < n")
    gen = stream(seed, "ecqp")
    G = gen.normal(size=(n, n))
    A = gen.normal(size=(m, n))
    b = gen.normal(size=m)
    c = gen.normal(size=n)
    Q = G.T @ G + 1e-2 * np.eye(n)

    kkt = np.zeros((n + m, n + m))
    kkt[:n, :n] = Q
    kkt[:n, n:] = -A.T
    kkt[n:, :n] = A
    sol = np.linalg.solve(kkt, np.concatenate([-c, b]))
    xstar, lamstar = sol[:n], sol[n:]

    lipschitz = float(np.linalg.eigvalsh(Q)[-1])
    f = QuadraticSmooth(Q, c, lipschitz=lipschitz, strong_convexity=1e-2)
    fstar = f.value(xstar)
    return CompositeProblem(
        f=f, g=ZeroProx(), A=DenseMap(A), b=b,
        reference=Reference(xstar, lamstar, fstar),
        name=f"ecqp[m={m},n={n},seed={seed}]")


def gen_nnqp(m: int, n: int, seed: int, dist: str = "gaussian"):
    """Nonnegative linearly constrained QP: min (1/2)xᵀQx + cᵀx s.t. Ax=b, x ≥ 0.

    Q = HHᵀ with H ∈ R^{n×(n−100)} (rank-deficient, weakly convex), A = [B, I]
    so x = (0, b) certifies feasibility, b uniform on [0,1) hence b ≥ 0.
    No reference is attached; the harness solves for one on demand.
    """
    from .lalm import CompositeProblem

    if n <= 100:
        raise ValueError("gen_nnqp requires n > 100")
    if m >= n:
        raise ValueError("gen_nnqp requires m < n")
    if dist not in ("gaussian", "uniform"):
        raise ValueError("dist must be 'gaussian' or 'uniform'")
    gen = stream(seed, f"nnqp-{dist}")
    H = gen.normal(size=(n, n - 100))
    c = gen.normal(size=n)
    b = gen.uniform(size=m)
    if dist == "gaussian":
        B = gen.normal(size=(m, n - m))
    else:
        B = gen.uniform(size=(m, n - m))
    A = np.concatenate([B, np.eye(m)], axis=1)
    Q = H @ H.T
    lipschitz = float(np.linalg.svd(H, compute_uv=False)[0] ** 2)
    f = QuadraticSmooth(Q, c, lipschitz=lipschitz)
    return CompositeProblem(
        f=f, g=NonnegIndicator(), A=DenseMap(A), b=b,
        name=f"nnqp-{dist}[m={m},n={n},seed={seed}]")


def gen_two_block_qp(n_y: int, n_z: int, m: int, seed: int, with_h: bool = True):
    """Strongly convex two-block QP: min f(y)+g(z)+h(z) s.t. By+Cz=b.

    f and g are convex quadratics (g strongly convex with certified modulus 1),
    h is a diagonal quadratic with 0 < mu_h < L_h when ``with_h``. The exact
    solution from the dense KKT system is attached.
    """
    from .ladmm import TwoBlockProblem, TwoBlockReference

    gen = stream(seed, "two-block-qp")
    Gf = gen.normal(size=(n_y, n_y))
    Qf = Gf.T @ Gf / n_y + 0.1 * np.eye(n_y)
    cf = gen.normal(size=n_y)
    Gg = gen.normal(size=(n_z, n_z))
    Qg = Gg.T @ Gg / n_z + np.eye(n_z)
    cg = gen.normal(size=n_z)
    if with_h:
        diag = gen.uniform(0.5, 2.0, size=n_z)
        Qh = np.diag(diag)
        ch = gen.normal(size=n_z)
        h = QuadraticSmooth(Qh, ch, lipschitz=float(diag.max()),
                            strong_convexity=float(diag.min()))
    else:
        h = ZeroSmooth()
    B = gen.normal(size=(m, n_y))
    C = gen.normal(size=(m, n_z))
    b = gen.normal(size=m)

    Qh_full = h.Q if with_h else np.zeros((n_z, n_z))
    ch_full = h.c if with_h else np.zeros(n_z)
    dim = n_y + n_z + m
    kkt = np.zeros((dim, dim))
    kkt[:n_y, :n_y] = Qf
    kkt[:n_y, n_y + n_z:] = -B.T
    kkt[n_y:n_y + n_z, n_y:n_y + n_z] = Qg + Qh_full
    kkt[n_y:n_y + n_z, n_y + n_z:] = -C.T
    kkt[n_y + n_z:, :n_y] = B
    kkt[n_y + n_z:, n_y:n_y + n_z] = C
    rhs = np.concatenate([-cf, -(cg + ch_full), b])
    sol = np.linalg.solve(kkt, rhs)
    ystar, zstar, lamstar = sol[:n_y], sol[n_y:n_y + n_z], sol[n_y + n_z:]

    f = QuadraticProx(Qf, cf)
    g = QuadraticProx(Qg, cg, strong_convexity=1.0)
    fstar = f.value(ystar) + g.value(zstar) + h.value(zstar)
    return TwoBlockProblem(
        f=f, g=g, h=h, B=DenseMap(B), C=DenseMap(C), b=b,
        reference=TwoBlockReference(ystar, zstar, lamstar, fstar),
        name=f"two_block_qp[ny={n_y},nz={n_z},m={m},with_h={with_h},seed={seed}]")


# ---------------------------------------------------------------------------
# total variation denoising


def tv_problem(image: np.ndarray, mu: float):
    """Two-block form of TV denoising: min (1/2)‖X−M‖²_F + mu‖Y‖₁ s.t. DX = Y.

    The ‖·‖₁ block Y is updated first (B = −I on Y, C = D on X, b = 0),
    matching the anisotropic split with periodic boundary conditions.
    """
    from .ladmm import TwoBlockProblem

    if mu <= 0:
        raise ValueError("tv_problem requires mu > 0")
    image = np.asarray(image, dtype=float)
    h, w = image.shape
    D = diff_op_periodic(h, w)
    m_flat = image.ravel()
    g = SquaredDistance(m_flat)
    l1 = L1Norm(mu)

    def outer_objective(x_flat):
        # objective of the unconstrained formulation, G(X, DX)
        return g.value(x_flat) + l1.value(D.apply(x_flat))

    return TwoBlockProblem(
        f=l1, g=g, h=ZeroSmooth(),
        B=ScaledIdentityMap(-1.0, D.rows), C=D, b=np.zeros(D.rows),
        outer_objective=outer_objective,
        name=f"tv[h={h},w={w},mu={mu}]")


# ---------------------------------------------------------------------------
# elastic net SVM


@dataclass
class SvmDataset:
    """Synthetic two-class sample set with block-correlated features."""

    A: np.ndarray          # p×m, samples as columns
    labels: np.ndarray     # m entries in {+1, −1}, balanced
    u: np.ndarray          # class mean
    s: int
    rho: float


def gen_svm(m: int, p: int, s: int, rho: float, seed: int,
            mu1: float, mu2: float):
    """Elastic-net hinge-loss SVM in two-block form.

    Samples are N(±u, Σ) with Σ = [ρE+ρI, 0; 0, I] on the first s features,
    drawn via w = √ρ·ζ·1 + √ρ·ξ. Returns the two-block problem for
    min (1/m)eᵀ[y]₊ + mu1‖x‖₁ + (mu2/2)‖x‖² s.t. B_svm·x + y = e, together
    with the dataset.
    """
    from .ladmm import TwoBlockProblem

    if s > p:
        raise ValueError("gen_svm requires s <= p")
    if not 0.0 <= rho <= 1.0:
        raise ValueError("gen_svm requires rho in [0, 1]")
    if m % 2 != 0:
        raise ValueError("gen_svm requires even m (balanced classes)")
    if mu1 < 0 or mu2 < 0:
        raise ValueError("regularization weights must be nonnegative")
    gen = stream(seed, "svm")
    u = np.concatenate([np.ones(s), np.zeros(p - s)])
    half = m // 2

    def draw(n_cls):
        zeta = gen.normal(size=n_cls)
        xi = gen.normal(size=(n_cls, s))
        first = math.sqrt(rho) * zeta[:, None] + math.sqrt(rho) * xi
        rest = gen.normal(size=(n_cls, p - s))
        return np.concatenate([first, rest], axis=1)

    plus = draw(half) + u
    minus = draw(half) - u
    samples = np.concatenate([plus, minus], axis=0)      # m×p
    labels = np.concatenate([np.ones(half), -np.ones(half)])
    A = samples.T                                        # p×m, columns = samples
    B_svm = labels[:, None] * samples                    # Diag(labels)·Aᵀ, m×p
    e = np.ones(m)

    hinge = HingeSum(m)
    enet = ElasticNet(mu1, mu2)

    def outer_objective(x):
        # objective of the unconstrained formulation, G(x, e − Bx)
        return hinge.value(e - B_svm @ x) + enet.value(x)

    problem = TwoBlockProblem(
        f=hinge, g=enet, h=ZeroSmooth(),
        B=ScaledIdentityMap(1.0, m), C=DenseMap(B_svm), b=e,
        outer_objective=outer_objective,
        name=f"svm[m={m},p={p},s={s},rho={rho},mu1={mu1},mu2={mu2},seed={seed}]")
    return problem, SvmDataset(A=A, labels=labels, u=u, s=s, rho=rho)


# ---------------------------------------------------------------------------
# serialization: structured text (JSON, 17 significant digits) and PGM


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format(float(obj), ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(key))}: {_encode(value)}" for key, value in obj.items())
        return "{" + ", ".join(items) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_structured(obj, path) -> None:
    """Write a JSON document with floats printed to 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(_encode(obj))
        fh.write("\n")


def load_structured(path):
    with open(path) as fh:
        return json.load(fh)


def instance_fields(problem, dataset: SvmDataset | None = None) -> dict:
    """Serializable field dict mirroring the problem's type definition."""
    out = {"name": problem.name}
    for attr in ("A", "B", "C"):
        op = getattr(problem, attr, None)
        if op is not None and op.explicit_matrix is not None:
            out[attr] = op.explicit_matrix
    if hasattr(problem, "b"):
        out["b"] = problem.b
    f = getattr(problem, "f", None)
    if isinstance(f, (QuadraticSmooth, QuadraticProx)):
        out["Q"] = f.Q if isinstance(f, QuadraticSmooth) else f.H
        out["c"] = f.c
    ref = problem.reference
    if ref is not None:
        if hasattr(ref, "xstar"):
            out["reference"] = {"xstar": ref.xstar, "lamstar": ref.lamstar,
                                "fstar": ref.fstar}
        else:
            out["reference"] = {"ystar": ref.ystar, "zstar": ref.zstar,
                                "lamstar": ref.lamstar, "fstar": ref.fstar}
    if dataset is not None:
        out["dataset"] = {"A": dataset.A, "labels": dataset.labels,
                          "u": dataset.u, "s": dataset.s, "rho": dataset.rho}
    return out


def write_pgm(path, image: np.ndarray) -> None:
    """Binary PGM (P5), maxval 65535, big-endian, intensities in [0,1]."""
    image = np.asarray(image, dtype=float)
    if image.ndim != 2:
        raise ValueError("write_pgm expects a 2-D image")
    scaled = np.clip(np.rint(image * 65535.0), 0, 65535).astype(">u2")
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.shape[1]} {image.shape[0]}\n65535\n".encode())
        fh.write(scaled.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM file")
    w, h = map(int, parts[1].split())
    maxval = int(parts[2])
    pix = np.frombuffer(parts[3], dtype=">u2" if maxval > 255 else "u1",
                        count=h * w).astype(float)
    return (pix / maxval).reshape(h, w)
